"""Synthetic fixture corpora for benchmarks, demos, and the test suite.

Real product corpora and their judgments cannot ship with the engine, so
this module constructs small deterministic ones. The interesting part is
the adversarial case-study set: for each of its queries, the record whose
text embeds nearest to the query violates the brand constraint (its text is
a near-copy of the query), while a constraint-satisfying target record
exists with only moderate text overlap. Purely semantic retrieval picks the
violator; filter-then-rank retrieval cannot.

Everything is driven by one seed; identical seeds produce identical files.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .corpus import Record, Schema, schema_from_dict

BRANDS = [
    "Spyder", "3Skull", "Halex", "Martin", "Nike", "Adidas",
    "Sony", "Samsung", "Orca", "Sufix", "Zumba", "Kingman",
]
CATEGORIES = [
    "paintball", "table tennis", "socks", "archery", "swim caps",
    "leggings", "fishing line", "electronics", "hunting bows", "toss games",
    # Filler-only categories keep distractors out of adversarial filters.
    "camping", "cycling", "rowing", "climbing", "bowling",
]
PREFERENCES = [
    "sturdy reliable", "lightweight agile", "colorful playful", "quiet smooth",
    "rugged weatherproof", "compact foldable", "ergonomic comfortable",
    "premium polished", "budget friendly", "beginner approachable",
]
FILLER_WORDS = [
    "axolotl", "breeze", "cobble", "dune", "ember", "fjord", "gully",
    "harbor", "inlet", "juniper", "knoll", "lagoon", "mesa", "nectar",
    "orchard", "pebble", "quarry", "ridge", "summit", "thicket",
]


def make_schema() -> Schema:
    return schema_from_dict(
        {
            "columns": [
                {"name": "BRAND", "kind": "single", "allowable_values": BRANDS},
                {"name": "CATEGORY", "kind": "multiple", "allowable_values": CATEGORIES},
                {"name": "PRICE", "kind": "numeric"},
            ]
        }
    )


@dataclass
class Benchmark:
    schema: Schema
    records: list[Record]
    queries: dict[str, str]
    qrels: dict[str, set[str]]
    filters: dict[str, dict]
    adversarial_qids: list[str] = field(default_factory=list)
    adversarial_targets: dict[str, str] = field(default_factory=dict)

    def rows(self) -> list[dict]:
        """Corpus rows in the JSONL ingest shape (title/description/reviews)."""
        out = []
        for r in self.records:
            title, _, rest = r.text.partition(" \n ")
            description, _, reviews = rest.partition(" \n ")
            row = {"id": r.id, **r.attrs, "title": title}
            if description:
                row["description"] = description
            if reviews:
                row["reviews"] = reviews
            out.append(row)
        return out


def _filler_text(rng: random.Random, n: int = 6) -> str:
    return " ".join(rng.choice(FILLER_WORDS) for _ in range(n))


def _record(doc_id, brand, categories, price, title, description, reviews) -> Record:
    return Record(
        id=doc_id,
        attrs={"BRAND": brand, "CATEGORY": list(categories), "PRICE": price},
        text=" \n ".join([title, description, reviews]),
    )


def make_case_study(seed: int = 7) -> Benchmark:
    """50 records, 10 queries; the embedding-nearest record always violates
    the brand constraint while an in-filter target exists."""
    rng = random.Random(seed)
    records: list[Record] = []
    queries: dict[str, str] = {}
    qrels: dict[str, set[str]] = {}
    filters: dict[str, dict] = {}
    targets: dict[str, str] = {}

    for i in range(10):
        brand = BRANDS[i]
        decoy_brand = BRANDS[(i + 1) % 10]
        category = CATEGORIES[i]
        pref = PREFERENCES[i]
        qid = f"adv{i:02d}"
        query = f"{pref} {category} from {brand}"

        target_id = f"t{i:02d}"
        decoy_id = f"x{i:02d}"
        # Target: satisfies the filter, shares only the preference words.
        records.append(
            _record(
                target_id,
                brand,
                [category],
                float(20 + 10 * i),
                f"{pref} {category} gear",
                _filler_text(rng),
                "works as advertised",
            )
        )
        # Decoy: text is a near-copy of the query, brand violates it.
        records.append(
            _record(
                decoy_id,
                decoy_brand,
                [category],
                float(25 + 10 * i),
                query,
                f"{query} top rated pick",
                "the best I have ever used",
            )
        )
        queries[qid] = query
        qrels[qid] = {target_id}
        filters[qid] = {"BRAND": {"$eq": brand}, "CATEGORY": {"$in": [category]}}
        targets[qid] = target_id

    for j in range(30):
        records.append(
            _record(
                f"f{j:02d}",
                BRANDS[10 + j % 2],
                [CATEGORIES[10 + j % 5]],
                float(5 + j),
                _filler_text(rng, 4),
                _filler_text(rng),
                _filler_text(rng, 3),
            )
        )

    return Benchmark(
        schema=make_schema(),
        records=records,
        queries=queries,
        qrels=qrels,
        filters=filters,
        adversarial_qids=sorted(queries),
        adversarial_targets=targets,
    )


def make_benchmark(seed: int = 7) -> Benchmark:
    """The case-study set plus 20 ordinary constraint+preference queries."""
    bench = make_case_study(seed)
    rng = random.Random(seed + 1)

    next_doc = 0
    for i in range(20):
        brand = BRANDS[(3 * i + 1) % len(BRANDS)]
        category = CATEGORIES[(2 * i + 3) % 10]
        pref = PREFERENCES[(i + 5) % 10]
        qid = f"std{i:02d}"
        with_price = i % 3 == 0
        limit = 40 + 5 * i

        relevant: set[str] = set()
        for _ in range(2 + i % 3):
            doc_id = f"r{next_doc:03d}"
            next_doc += 1
            price = float(rng.randrange(10, limit if with_price else 200))
            records_text = f"{pref} {category} everyone recommends"
            bench.records.append(
                _record(
                    doc_id,
                    brand,
                    [category],
                    price,
                    records_text,
                    _filler_text(rng),
                    f"{pref.split()[0]} and dependable",
                )
            )
            relevant.add(doc_id)
        # Distractors: right category, wrong brand; and over-budget twins.
        bench.records.append(
            _record(
                f"r{next_doc:03d}",
                BRANDS[(3 * i + 2) % len(BRANDS)],
                [category],
                float(rng.randrange(10, 200)),
                f"{pref} {category} everyone recommends",
                _filler_text(rng),
                "crowd favorite",
            )
        )
        next_doc += 1
        if with_price:
            bench.records.append(
                _record(
                    f"r{next_doc:03d}",
                    brand,
                    [category],
                    float(limit + 50),
                    f"{pref} {category} everyone recommends",
                    _filler_text(rng),
                    "premium tier",
                )
            )
            next_doc += 1

        if with_price:
            query = f"{pref} {category} from {brand} under ${limit}"
            filter_wire = {
                "BRAND": {"$eq": brand},
                "CATEGORY": {"$in": [category]},
                "PRICE": {"$lt": limit},
            }
        else:
            query = f"{pref} {category} from {brand}"
            filter_wire = {"BRAND": {"$eq": brand}, "CATEGORY": {"$in": [category]}}

        bench.queries[qid] = query
        bench.qrels[qid] = relevant
        bench.filters[qid] = filter_wire

    return bench


def write_scripted_fixture(bench: Benchmark, path: str | Path, refine_identity: bool = True) -> None:
    """LLM replay fixture: one filter response per query, plus identity
    refinement responses so the refine toggle can be exercised offline."""
    lines = []
    for qid in sorted(bench.queries):
        query = bench.queries[qid]
        lines.append(
            json.dumps(
                {
                    "prompt_substring": f"User question: {query}",
                    "response": json.dumps(bench.filters[qid]),
                },
                ensure_ascii=False,
            )
        )
        if refine_identity:
            lines.append(
                json.dumps(
                    {"prompt_substring": f"Original question: {query}", "response": query},
                    ensure_ascii=False,
                )
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_project(
    directory: str | Path,
    bench: Benchmark | None = None,
    *,
    seed: int = 7,
    dim: int = 128,
    planner: str = "rules",
) -> Path:
    """Materialize a ready-to-run project: corpus, schema, queries, qrels,
    scripted LLM fixture, and a config file. Returns the config path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    if bench is None:
        bench = make_benchmark(seed)

    with open(directory / "corpus.jsonl", "w", encoding="utf-8") as fh:
        for row in bench.rows():
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")

    from .corpus import schema_to_dict

    (directory / "schema.json").write_text(
        json.dumps(schema_to_dict(bench.schema), indent=2), encoding="utf-8"
    )
    with open(directory / "queries.tsv", "w", encoding="utf-8") as fh:
        for qid in sorted(bench.queries):
            fh.write(f"{qid}\t{bench.queries[qid]}\n")
    with open(directory / "qrels.tsv", "w", encoding="utf-8") as fh:
        for qid in sorted(bench.qrels):
            for doc_id in sorted(bench.qrels[qid]):
                fh.write(f"{qid}\t{doc_id}\n")
    write_scripted_fixture(bench, directory / "llm_fixture.jsonl")

    config = {
        "paths": {
            "corpus": "corpus.jsonl",
            "schema": "schema.json",
            "index_dir": "index",
            "cache_dir": "cache",
        },
        "embedder": {"id": "hashed", "dim": dim, "seed": seed},
        "planner": (
            {"id": "scripted", "fixture": "llm_fixture.jsonl"}
            if planner == "scripted"
            else {"id": planner}
        ),
        "defaults": {"k": 10, "lambda": 0.5, "refine": False, "rrf_c": 60},
        "text_fields": ["title", "description", "reviews"],
    }
    config_path = directory / "hyst.yaml"
    config_path.write_text(yaml.safe_dump(config, sort_keys=True), encoding="utf-8")
    return config_path


def _main() -> None:
    import sys

    out = sys.argv[1] if len(sys.argv) > 1 else "demo_project"
    planner = sys.argv[2] if len(sys.argv) > 2 else "rules"
    config_path = write_project(out, planner=planner)
    print(f"wrote demo project; config at {config_path}")


if __name__ == "__main__":
    _main()

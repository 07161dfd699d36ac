"""IR metrics, relevance judgments, and multi-method comparison reports.

Metrics are macro-averaged over queries (every query weighs equally) and
judgments are binary. Precision@k keeps k in the denominator even when
fewer than k items come back: returning little is not rewarded.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .fusion import RankedList
from .pipeline import MethodConfig, SearchEngine

METRIC_NAMES = ("P@1", "P@5", "P@10", "R@20", "MRR")

# Row order for comparison tables: lexical, dense, fusion, semantic-only,
# then the hybrid method.
METHOD_ORDER = {"bm25": 0, "dense": 1, "bm25+dense": 2, "rrf": 3, "linearized": 4, "hyst": 5}


class QrelsError(ValueError):
    """Raised for invalid relevance judgment sets."""


class EvalError(RuntimeError):
    """Raised when a per-query execution fails; carries the query id."""


@dataclass
class Qrels:
    """query id -> set of relevant doc ids; every query has 1..20 judgments."""

    judgments: dict[str, set[str]]

    def __post_init__(self) -> None:
        for qid, relevant in self.judgments.items():
            if not relevant:
                raise QrelsError(f"query {qid!r} has no relevant documents")
            if len(relevant) > 20:
                raise QrelsError(
                    f"query {qid!r} has {len(relevant)} relevant documents; "
                    "the benchmark design caps relevant sets at 20"
                )


def load_qrels(path: str | Path) -> Qrels:
    """Read TSV judgments: one "query_id<TAB>doc_id" line per judgment."""
    judgments: dict[str, set[str]] = {}
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise QrelsError(f"{path}:{line_number}: expected 'query_id<TAB>doc_id'")
            judgments.setdefault(parts[0], set()).add(parts[1])
    return Qrels(judgments=judgments)


def load_queries(path: str | Path) -> dict[str, str]:
    """Read TSV queries: one "query_id<TAB>query text" line per query."""
    queries: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t", 1)
            if len(parts) != 2:
                raise QrelsError(f"{path}:{line_number}: expected 'query_id<TAB>query text'")
            if parts[0] in queries:
                raise QrelsError(f"{path}:{line_number}: duplicate query id {parts[0]!r}")
            queries[parts[0]] = parts[1]
    return queries


def precision_at_k(ranked: Sequence[str], relevant: set[str], k: int) -> float:
    """|relevant among top-k| / k; the denominator stays k regardless."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return len(set(ranked[:k]) & relevant) / k


def recall_at_k(ranked: Sequence[str], relevant: set[str], k: int) -> float:
    """|relevant among top-k| / |relevant|."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not relevant:
        raise ValueError("relevant set must be non-empty")
    return len(set(ranked[:k]) & relevant) / len(relevant)


def reciprocal_rank(ranked: Sequence[str], relevant: set[str]) -> float:
    for rank, doc_id in enumerate(ranked, start=1):
        if doc_id in relevant:
            return 1.0 / rank
    return 0.0


def mrr(runs: dict[str, Sequence[str]], qrels: Qrels) -> float:
    """Mean reciprocal rank of the first relevant item over all judged queries.

    A query without a run counts as reciprocal rank 0.
    """
    if not qrels.judgments:
        return 0.0
    total = 0.0
    for qid, relevant in qrels.judgments.items():
        total += reciprocal_rank(runs.get(qid, ()), relevant)
    return total / len(qrels.judgments)


@dataclass
class MethodRow:
    """One comparison row: a labeled method with macro metrics and the
    per-query breakdown behind them."""

    method: str
    label: str
    metrics: dict[str, float]
    per_query: dict[str, dict[str, float]]

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "label": self.label,
            "metrics": dict(self.metrics),
            "per_query": {q: dict(m) for q, m in self.per_query.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MethodRow":
        return cls(
            method=data["method"],
            label=data["label"],
            metrics=dict(data["metrics"]),
            per_query={q: dict(m) for q, m in data["per_query"].items()},
        )


@dataclass
class EvalReport:
    query_count: int
    rows: list[MethodRow]

    def best_per_metric(self) -> dict[str, list[str]]:
        """Labels achieving the best value of each metric column."""
        best: dict[str, list[str]] = {}
        for name in METRIC_NAMES:
            if not self.rows:
                best[name] = []
                continue
            top = max(row.metrics[name] for row in self.rows)
            best[name] = [row.label for row in self.rows if row.metrics[name] == top]
        return best

    def to_dict(self) -> dict:
        return {
            "query_count": self.query_count,
            "rows": [row.to_dict() for row in self.rows],
            "best": self.best_per_metric(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "EvalReport":
        return cls(
            query_count=data["query_count"],
            rows=[MethodRow.from_dict(r) for r in data["rows"]],
        )

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))

    def to_table(self) -> str:
        """Aligned text table, best value per column flagged with '*'."""
        best = self.best_per_metric()
        header = ["Method", *METRIC_NAMES]
        body = []
        for row in self.rows:
            cells = [row.label]
            for name in METRIC_NAMES:
                flag = "*" if row.label in best[name] else " "
                cells.append(f"{row.metrics[name]:.4f}{flag}")
            body.append(cells)
        widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
        lines = [
            "  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip(),
            "  ".join("-" * w for w in widths),
        ]
        for cells in body:
            lines.append("  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip())
        lines.append(f"queries: {self.query_count}")
        return "\n".join(lines)


def _query_metrics(ranked_ids: Sequence[str], relevant: set[str]) -> dict[str, float]:
    return {
        "P@1": precision_at_k(ranked_ids, relevant, 1),
        "P@5": precision_at_k(ranked_ids, relevant, 5),
        "P@10": precision_at_k(ranked_ids, relevant, 10),
        "R@20": recall_at_k(ranked_ids, relevant, 20),
        "MRR": reciprocal_rank(ranked_ids, relevant),
    }


LabeledMethod = MethodConfig | tuple[str, MethodConfig]


def _normalize_methods(methods: Sequence[LabeledMethod]) -> list[tuple[str, MethodConfig]]:
    out = []
    for m in methods:
        if isinstance(m, MethodConfig):
            out.append((m.method, m))
        else:
            out.append((m[0], m[1]))
    labels = [label for label, _ in out]
    if len(labels) != len(set(labels)):
        raise ValueError("method labels must be unique")
    return out


def run_all(
    engine: SearchEngine,
    methods: Sequence[LabeledMethod],
    queries: dict[str, str],
    jobs: int = 1,
) -> dict[str, dict[str, RankedList]]:
    """Execute every labeled method over every query: label -> qid -> results.

    Queries fan out over a bounded thread pool when jobs > 1; results are
    keyed, so parallelism never perturbs output order.
    """
    out: dict[str, dict[str, RankedList]] = {}
    for label, config in _normalize_methods(methods):
        eval_config = MethodConfig(
            method=config.method,
            k=max(20, config.k),
            lam=config.lam,
            refine=config.refine,
            planner_id=config.planner_id,
            embedder_id=config.embedder_id,
            rrf_c=config.rrf_c,
        )

        def one(item: tuple[str, str], _cfg=eval_config, _label=label) -> tuple[str, RankedList]:
            qid, text = item
            try:
                return qid, engine.run(text, _cfg)
            except Exception as exc:
                raise EvalError(f"method {_label!r} failed on query {qid!r}: {exc}") from exc

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(one, queries.items()))
        else:
            results = [one(item) for item in queries.items()]
        out[label] = dict(results)
    return out


def report_from_runs(
    runs: dict[str, dict[str, RankedList]],
    methods: Sequence[LabeledMethod],
    qrels: Qrels,
) -> EvalReport:
    labeled = _normalize_methods(methods)
    labeled.sort(key=lambda lm: METHOD_ORDER.get(lm[1].method, len(METHOD_ORDER)))
    rows = []
    query_count = 0
    for label, config in labeled:
        per_query = {}
        for qid, relevant in qrels.judgments.items():
            ranked = runs[label].get(qid)
            ranked_ids = ranked.doc_ids if ranked is not None else []
            per_query[qid] = _query_metrics(ranked_ids, relevant)
        query_count = len(per_query)
        macro = {
            name: (sum(m[name] for m in per_query.values()) / len(per_query) if per_query else 0.0)
            for name in METRIC_NAMES
        }
        rows.append(MethodRow(method=config.method, label=label, metrics=macro, per_query=per_query))
    return EvalReport(query_count=query_count, rows=rows)


def compare(
    engine: SearchEngine,
    methods: Sequence[LabeledMethod],
    queries: dict[str, str],
    qrels: Qrels,
    jobs: int = 1,
) -> EvalReport:
    """Run every method over every judged query and tabulate all metrics.

    Methods run at k = max(20, requested) so Recall@20 and the deeper
    precision cuts are measurable.
    """
    missing = [qid for qid in qrels.judgments if qid not in queries]
    if missing:
        raise EvalError(f"qrels reference queries with no text: {', '.join(sorted(missing))}")
    runs = run_all(engine, methods, queries, jobs=jobs)
    return report_from_runs(runs, methods, qrels)

"""Command-line surface: ingest, plan, search, eval.

Data goes to stdout, diagnostics to stderr, and every command is
deterministic given unchanged inputs: re-running ingest rewrites
byte-identical artifacts, re-running search or eval reprints identical
bytes. Exit code 0 means no error case fired.
"""

from __future__ import annotations

import json
from pathlib import Path

import click

from . import artifacts
from .config import ProjectConfig, load_config, make_embedder, make_planner
from .corpus import ingest_with_report, linearize
from .evaluation import EvalError, load_qrels, load_queries, report_from_runs, run_all
from .lexical import build_index
from .pipeline import METHODS, MethodConfig, SearchEngine, build_engine, format_run_lines


def _fail(message: str) -> None:
    raise click.ClickException(message)


def _load_engine(config: ProjectConfig) -> SearchEngine:
    schema = config.load_schema()
    try:
        records = artifacts.load_records(config.records_file)
        index = artifacts.load_bm25(config.bm25_file)
        attrs_by_id = {r.id: r.attrs for r in records}
        text_store, text_embedder = artifacts.load_vector_store(
            config.text_vectors_file, attrs_by_id
        )
        linearized_store, _ = artifacts.load_vector_store(
            config.linearized_vectors_file, attrs_by_id
        )
    except artifacts.ArtifactError as exc:
        _fail(str(exc))
    embedder = make_embedder(config)
    if embedder.provider_id != text_embedder:
        click.echo(
            f"warning: configured embedder {embedder.provider_id!r} differs from "
            f"the one that built the index ({text_embedder!r})",
            err=True,
        )
    if embedder.dim != text_store.dimension:
        _fail(
            f"embedder dimension {embedder.dim} does not match indexed dimension "
            f"{text_store.dimension}; re-run ingest"
        )
    planner = make_planner(config, schema)
    return SearchEngine(
        schema=schema,
        records={r.id: r for r in records},
        bm25_index=index,
        text_store=text_store,
        linearized_store=linearized_store,
        embedder=embedder,
        planner=planner,
        relax=config.relax,
    )


def _method_config(config: ProjectConfig, method: str, k: int, lam: float | None, refine: bool) -> MethodConfig:
    return MethodConfig(
        method=method,
        k=k,
        lam=(lam if method == "bm25+dense" else None),
        refine=refine,
        planner_id=config.planner.get("id", "rules"),
        embedder_id=config.embedder.get("id", "hashed"),
        rrf_c=config.rrf_c,
    )


@click.group()
@click.option(
    "--config",
    "-c",
    "config_path",
    default="hyst.yaml",
    show_default=True,
    help="Project config file.",
)
@click.option(
    "--format",
    "output_format",
    type=click.Choice(["table", "json"]),
    default="table",
    show_default=True,
    help="Output format for reports and plans.",
)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
              help="Parallel query executions during eval.")
@click.pass_context
def main(ctx: click.Context, config_path: str, output_format: str, jobs: int) -> None:
    """Hybrid retrieval over semi-structured tabular records."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    ctx.obj["format"] = output_format
    ctx.obj["jobs"] = jobs


def _config(ctx: click.Context) -> ProjectConfig:
    try:
        return load_config(ctx.obj["config_path"])
    except Exception as exc:
        _fail(str(exc))


@main.command()
@click.pass_context
def ingest(ctx: click.Context) -> None:
    """Build and persist all index artifacts from the corpus."""
    config = _config(ctx)
    schema = config.load_schema()
    try:
        result = ingest_with_report(config.corpus_path, schema, list(config.text_fields))
    except (OSError, ValueError) as exc:
        _fail(str(exc))
    for skip in result.skipped:
        click.echo(f"skipped line {skip.line_number}: {skip.reason}", err=True)
    if not result.records:
        click.echo("warning: corpus produced 0 records", err=True)

    embedder = make_embedder(config)
    records = result.records
    linearized = [(r.id, linearize(r, schema)) for r in records]
    index = build_index(linearized, **_bm25_params(config))
    text_vecs = embedder.embed([r.text for r in records])
    linear_vecs = embedder.embed([text for _, text in linearized])

    from .dense import VectorStore

    text_store = VectorStore(dimension=embedder.dim)
    linearized_store = VectorStore(dimension=embedder.dim)
    dropped_zero = 0
    for r, tv, lv in zip(records, text_vecs, linear_vecs):
        if float((tv * tv).sum()) > 0.0:
            text_store.add(r.id, tv, r.attrs)
        else:
            dropped_zero += 1
        if float((lv * lv).sum()) > 0.0:
            linearized_store.add(r.id, lv, r.attrs)
    if dropped_zero:
        click.echo(f"warning: {dropped_zero} records embedded to zero vectors", err=True)

    config.index_dir.mkdir(parents=True, exist_ok=True)
    artifacts.save_records(config.records_file, records)
    artifacts.save_bm25(config.bm25_file, index)
    artifacts.save_vector_store(config.text_vectors_file, text_store, embedder.provider_id)
    artifacts.save_vector_store(config.linearized_vectors_file, linearized_store, embedder.provider_id)

    click.echo(f"{len(records)} records, {len(result.skipped)} skipped")
    click.echo(
        "wrote: "
        + ", ".join(
            p.name
            for p in (
                config.records_file,
                config.bm25_file,
                config.text_vectors_file,
                config.linearized_vectors_file,
            )
        )
    )


def _bm25_params(config: ProjectConfig) -> dict:
    params = {}
    if config.bm25_k1 is not None:
        params["k1"] = float(config.bm25_k1)
    if config.bm25_b is not None:
        params["b"] = float(config.bm25_b)
    return params


@main.command()
@click.argument("query")
@click.option("--refine/--no-refine", default=None, help="Override the configured refinement toggle.")
@click.pass_context
def plan(ctx: click.Context, query: str, refine: bool | None) -> None:
    """Show the query plan: filter JSON, validation report, refined query."""
    config = _config(ctx)
    schema = config.load_schema()
    planner = make_planner(config, schema)
    use_refine = config.refine if refine is None else refine
    try:
        query_plan = planner.plan(query, refine=use_refine)
    except Exception as exc:
        _fail(f"planning failed: {exc}")

    if ctx.obj["format"] == "json":
        click.echo(json.dumps(query_plan.to_dict(), indent=2, sort_keys=True))
        return
    click.echo(f"filter: {query_plan.filter.to_json()}")
    report = query_plan.validation
    for col, reason in report.dropped_clauses:
        click.echo(f"dropped: {col} ({reason})")
    for col, raw, matched in report.value_corrections:
        click.echo(f"corrected: {col}: {raw} -> {matched}")
    for warning in report.warnings:
        click.echo(f"warning: {warning}")
    click.echo(f"refined query: {query_plan.refined_query}")


@main.command()
@click.argument("query")
@click.option("--method", type=click.Choice(list(METHODS)), default="hyst", show_default=True)
@click.option("--k", type=click.IntRange(min=1), default=None, help="Results to return.")
@click.option("--refine/--no-refine", default=None, help="Override the configured refinement toggle.")
@click.option("--lambda", "lam", type=click.FloatRange(0.0, 1.0), default=None,
              help="Sparse weight for bm25+dense.")
@click.option("--run-file", type=click.Path(dir_okay=False), default=None,
              help="Append results as TSV run lines.")
@click.option("--query-id", default="q0", show_default=True, help="Query id for the run file.")
@click.pass_context
def search(
    ctx: click.Context,
    query: str,
    method: str,
    k: int | None,
    refine: bool | None,
    lam: float | None,
    run_file: str | None,
    query_id: str,
) -> None:
    """Run one query with the named method and print ranked hits."""
    config = _config(ctx)
    engine = _load_engine(config)
    method_config = _method_config(
        config,
        method,
        k=k if k is not None else config.k,
        lam=lam if lam is not None else config.lam,
        refine=config.refine if refine is None else refine,
    )
    try:
        ranked = engine.run(query, method_config)
    except EvalError as exc:
        _fail(str(exc))
    except Exception as exc:
        _fail(f"search failed: {exc}")

    for event in engine.events:
        if event["type"] == "filter_starvation":
            click.echo(f"filter matched zero records: {json.dumps(event['filter'])}", err=True)
    if ranked.source.endswith(":relaxed"):
        click.echo("results are relaxed: the filter was dropped after starvation", err=True)

    for rank, (doc_id, score) in enumerate(ranked.items, start=1):
        attrs = engine.records[doc_id].attrs if doc_id in engine.records else {}
        attr_str = json.dumps(attrs, sort_keys=True, ensure_ascii=False)
        click.echo(f"{rank}\t{doc_id}\t{score!r}\t{attr_str}")

    if run_file is not None:
        lines = format_run_lines(query_id, ranked, method)
        with open(run_file, "a", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")


@main.command(name="eval")
@click.argument("queries_file", type=click.Path(exists=True, dir_okay=False))
@click.argument("qrels_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--methods", default="all", show_default=True,
              help="Comma-separated method ids, or 'all'.")
@click.option("--k", type=click.IntRange(min=1), default=None, help="Requested depth (floors at 20).")
@click.option("--ablate-refine", is_flag=True,
              help="Run the hybrid method twice: with and without query refinement.")
@click.option("--run-file", type=click.Path(dir_okay=False), default=None,
              help="Write all runs as one TSV file.")
@click.pass_context
def eval_cmd(
    ctx: click.Context,
    queries_file: str,
    qrels_file: str,
    methods: str,
    k: int | None,
    ablate_refine: bool,
    run_file: str | None,
) -> None:
    """Compare methods over a query set against relevance judgments."""
    config = _config(ctx)
    engine = _load_engine(config)
    try:
        queries = load_queries(queries_file)
        qrels = load_qrels(qrels_file)
    except ValueError as exc:
        _fail(str(exc))

    depth = k if k is not None else config.k
    if ablate_refine:
        base = _method_config(config, "hyst", depth, None, refine=False)
        labeled = [
            ("w/o query refinement", base),
            ("full", _method_config(config, "hyst", depth, None, refine=True)),
        ]
    else:
        if methods.strip() == "all":
            names = list(METHODS)
        else:
            names = [m.strip() for m in methods.split(",") if m.strip()]
        unknown = [m for m in names if m not in METHODS]
        if unknown:
            _fail(f"unknown methods: {', '.join(unknown)}")
        labeled = [
            (name, _method_config(config, name, depth, config.lam, refine=config.refine))
            for name in names
        ]

    missing = [qid for qid in qrels.judgments if qid not in queries]
    if missing:
        _fail("qrels reference unknown query ids: " + ", ".join(sorted(missing)))

    try:
        runs = run_all(engine, labeled, queries, jobs=ctx.obj["jobs"])
        report = report_from_runs(runs, labeled, qrels)
    except EvalError as exc:
        _fail(str(exc))

    if run_file is not None:
        lines = []
        for label, _cfg in labeled:
            for qid in queries:
                if qid in runs[label]:
                    lines.extend(format_run_lines(qid, runs[label][qid], label))
        Path(run_file).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")

    if ctx.obj["format"] == "json":
        click.echo(report.to_json())
    else:
        click.echo(report.to_table())


if __name__ == "__main__":
    main(prog_name="hyst")

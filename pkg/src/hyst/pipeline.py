"""End-to-end retrieval methods behind one uniform interface.

The hybrid method plans the query (filter + refined text), embeds the
refined text, and searches the record-text vector store restricted to
filter-satisfying candidates. Every baseline instead works over linearized
records: BM25 over the flattened strings, dense search over their
embeddings, weighted interpolation or RRF of those two, and the purely
semantic "linearized" retrieval. Two vector stores are therefore built: one
over record text for the hybrid method, one over linearized text for the
baselines.

A validated filter that matches zero records yields an empty result (a
recorded starvation event, not an error): hard constraints are enforced,
never silently relaxed. The opt-in relax mode retries with the universal
filter and labels the output as relaxed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Protocol

from .corpus import Record, Schema, linearize
from .dense import EmbeddingProvider, VectorStore, knn
from .filters import FilterExpr, matches_attrs
from .fusion import DEFAULT_RRF_C, RankedList, interpolate, rrf
from .lexical import InvertedIndex, bm25_search, build_index
from .planner import QueryPlan

METHODS = ("hyst", "bm25", "dense", "bm25+dense", "linearized", "rrf")


class Planner(Protocol):
    planner_id: str

    def plan(self, query: str, refine: bool = False) -> QueryPlan: ...


@dataclass(frozen=True)
class MethodConfig:
    """One retrieval method invocation: what to run and with which knobs."""

    method: str
    k: int = 10
    lam: float | None = None
    refine: bool = False
    planner_id: str = "rules"
    embedder_id: str = ""
    rrf_c: int = DEFAULT_RRF_C

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r} (expected one of {', '.join(METHODS)})")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.method == "bm25+dense":
            if self.lam is None:
                object.__setattr__(self, "lam", 0.5)
        elif self.lam is not None:
            raise ValueError(f"lambda only applies to bm25+dense, not {self.method!r}")


@dataclass
class SearchEngine:
    """Immutable indexes plus per-query execution. Queries may run concurrently."""

    schema: Schema
    records: dict[str, Record]
    bm25_index: InvertedIndex
    text_store: VectorStore
    linearized_store: VectorStore
    embedder: EmbeddingProvider
    planner: Planner
    relax: bool = False
    events: list[dict] = field(default_factory=list)

    def run(self, query: str, config: MethodConfig) -> RankedList:
        if config.method == "hyst":
            return self.run_hyst(query, config)
        return self.run_baseline(query, config)

    def run_hyst(self, query: str, config: MethodConfig) -> RankedList:
        """Filter-then-rank retrieval: plan, pre-filter, score by cosine."""
        plan = self.planner.plan(query, refine=config.refine)
        query_vec = self.embedder.embed([plan.refined_query])[0]
        hits = knn(self.text_store, query_vec, config.k, plan.filter)
        if not hits and not plan.filter.is_universal():
            self.events.append(
                {"type": "filter_starvation", "query": query, "filter": plan.filter.to_wire()}
            )
            if self.relax:
                hits = knn(self.text_store, query_vec, config.k, None)
                return RankedList(items=hits, source="hyst:relaxed")
        return RankedList(items=hits, source="hyst")

    def dense_over_text(self, query: str, k: int) -> RankedList:
        """Unfiltered dense search over record text; hyst with a universal
        filter and no refinement reduces to exactly this."""
        query_vec = self.embedder.embed([query])[0]
        return RankedList(items=knn(self.text_store, query_vec, k, None), source="dense-text")

    def run_baseline(self, query: str, config: MethodConfig) -> RankedList:
        method = config.method
        if method == "bm25":
            return RankedList(items=bm25_search(self.bm25_index, query, config.k), source="bm25")
        if method in ("dense", "linearized"):
            query_vec = self.embedder.embed([query])[0]
            hits = knn(self.linearized_store, query_vec, config.k, None)
            return RankedList(items=hits, source=method)
        if method == "bm25+dense":
            sparse = RankedList(
                items=bm25_search(self.bm25_index, query, config.k), source="bm25"
            )
            query_vec = self.embedder.embed([query])[0]
            dense_list = RankedList(
                items=knn(self.linearized_store, query_vec, config.k, None), source="dense"
            )
            fused = interpolate(sparse, dense_list, config.lam, config.k)
            return RankedList(items=fused.items, source="bm25+dense")
        if method == "rrf":
            sparse = RankedList(
                items=bm25_search(self.bm25_index, query, config.k), source="bm25"
            )
            query_vec = self.embedder.embed([query])[0]
            dense_list = RankedList(
                items=knn(self.linearized_store, query_vec, config.k, None), source="dense"
            )
            fused = rrf([sparse, dense_list], c=config.rrf_c, k=config.k)
            return RankedList(items=fused.items, source="rrf")
        raise ValueError(f"unknown method {method!r}")

    def record(self, doc_id: str) -> Record:
        return self.records[doc_id]


def build_engine(
    records: Iterable[Record],
    schema: Schema,
    embedder: EmbeddingProvider,
    planner: Planner,
    k1: float | None = None,
    b: float | None = None,
    relax: bool = False,
) -> SearchEngine:
    """Index a record collection: BM25 + two vector stores, skipping nothing.

    Records whose text (or linearization) hashes to the zero vector cannot
    be stored as unit vectors; they are indexed for BM25 but absent from the
    corresponding vector store, mirroring a vector database that rejects
    zero vectors at upsert.
    """
    from .lexical import DEFAULT_B, DEFAULT_K1

    record_list = list(records)
    by_id = {r.id: r for r in record_list}
    linearized = {r.id: linearize(r, schema) for r in record_list}

    index = build_index(
        [(r.id, linearized[r.id]) for r in record_list],
        k1=DEFAULT_K1 if k1 is None else k1,
        b=DEFAULT_B if b is None else b,
    )

    text_vecs = embedder.embed([r.text for r in record_list])
    linear_vecs = embedder.embed([linearized[r.id] for r in record_list])

    text_store = VectorStore(dimension=embedder.dim)
    linearized_store = VectorStore(dimension=embedder.dim)
    for r, tv, lv in zip(record_list, text_vecs, linear_vecs):
        if float((tv * tv).sum()) > 0.0:
            text_store.add(r.id, tv, r.attrs)
        if float((lv * lv).sum()) > 0.0:
            linearized_store.add(r.id, lv, r.attrs)

    return SearchEngine(
        schema=schema,
        records=by_id,
        bm25_index=index,
        text_store=text_store,
        linearized_store=linearized_store,
        embedder=embedder,
        planner=planner,
        relax=relax,
    )


def verify_constraints(engine: SearchEngine, query: str, config: MethodConfig) -> list[str]:
    """Doc ids returned by the hybrid method that violate the plan's filter.

    Exists for exhaustive hard-constraint audits; a correct engine always
    returns an empty list.
    """
    plan = engine.planner.plan(query, refine=config.refine)
    result = engine.run_hyst(query, config)
    return [
        doc_id
        for doc_id, _ in result.items
        if not matches_attrs(plan.filter, engine.records[doc_id].attrs)
    ]


def format_run_lines(
    query_id: str,
    ranked: RankedList,
    method: str,
) -> list[str]:
    """TSV run lines: query_id, doc_id, rank, score, method."""
    return [
        f"{query_id}\t{doc_id}\t{rank}\t{score!r}\t{method}"
        for rank, (doc_id, score) in enumerate(ranked.items, start=1)
    ]

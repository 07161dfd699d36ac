"""Hybrid retrieval over semi-structured tabular records.

Structured constraints are extracted from natural-language queries, applied
as metadata filters, and the residual preference text is ranked by dense
similarity over the filtered candidates. Lexical (BM25), dense, fusion and
linearized baselines run behind the same method interface, with an IR
evaluation harness on top.
"""

from .corpus import ColumnSpec, Record, Schema, ingest, linearize, load_schema
from .dense import HashedEmbedder, RemoteEmbedder, VectorStore, embed_hashed, knn
from .evaluation import (
    EvalReport,
    Qrels,
    compare,
    mrr,
    precision_at_k,
    recall_at_k,
)
from .filters import FilterExpr, ValidationReport, matches, parse_filter, validate
from .fusion import RankedList, interpolate, rrf
from .lexical import InvertedIndex, bm25_search, build_index
from .pipeline import MethodConfig, SearchEngine, build_engine
from .planner import QueryPlan, RulePlanner, plan_llm, plan_rules, render_prompt

__version__ = "0.1.0"

__all__ = [
    "ColumnSpec",
    "EvalReport",
    "FilterExpr",
    "HashedEmbedder",
    "InvertedIndex",
    "MethodConfig",
    "QueryPlan",
    "Qrels",
    "RankedList",
    "Record",
    "RemoteEmbedder",
    "RulePlanner",
    "Schema",
    "SearchEngine",
    "ValidationReport",
    "VectorStore",
    "bm25_search",
    "build_engine",
    "build_index",
    "compare",
    "embed_hashed",
    "ingest",
    "interpolate",
    "knn",
    "linearize",
    "load_schema",
    "matches",
    "mrr",
    "parse_filter",
    "plan_llm",
    "plan_rules",
    "precision_at_k",
    "recall_at_k",
    "render_prompt",
    "rrf",
    "validate",
]

"""Okapi BM25 over an in-memory inverted index.

Tokenization is deliberately plain (lowercase, split on non-alphanumeric
runs, no stemming, no stopwords) so scores stay transparent and checkable
against a direct transcription of the formula:

    score(d) = sum over query terms t of
        idf(t) * tf(t,d) * (k1+1) / (tf(t,d) + k1*(1 - b + b*len(d)/avg_len))

    idf(t) = ln(1 + (N - df(t) + 0.5) / (df(t) + 0.5))

Query terms are the token multiset: a term repeated in the query contributes
once per occurrence.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import kernels

DEFAULT_K1 = 1.2
DEFAULT_B = 0.75

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class DuplicateDocError(ValueError):
    """Raised when the same doc id is indexed twice."""


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs, dropping empties."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class InvertedIndex:
    """Build-once, read-many BM25 index.

    postings maps term -> list of (doc id, term frequency) sorted by doc id;
    doc_lengths maps doc id -> token count.
    """

    postings: dict[str, list[tuple[str, int]]]
    doc_lengths: dict[str, int]
    avg_doc_length: float
    doc_count: int
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B

    # Internal arrays consumed by the scoring kernels.
    _doc_ids: list[str] = field(default_factory=list, repr=False)
    _doc_pos: dict[str, int] = field(default_factory=dict, repr=False)
    _norm: np.ndarray | None = field(default=None, repr=False)
    _term_arrays: dict[str, tuple[np.ndarray, np.ndarray]] = field(
        default_factory=dict, repr=False
    )

    def idf(self, term: str) -> float:
        df = len(self.postings.get(term, ()))
        return math.log(1.0 + (self.doc_count - df + 0.5) / (df + 0.5))


def build_index(
    docs: list[tuple[str, str]],
    k1: float = DEFAULT_K1,
    b: float = DEFAULT_B,
) -> InvertedIndex:
    """Index (id, text) pairs. Duplicate ids are an error."""
    doc_lengths: dict[str, int] = {}
    term_postings: dict[str, dict[str, int]] = {}
    for doc_id, text in docs:
        if doc_id in doc_lengths:
            raise DuplicateDocError(f"duplicate doc id {doc_id!r}")
        tokens = tokenize(text)
        doc_lengths[doc_id] = len(tokens)
        for term, freq in Counter(tokens).items():
            term_postings.setdefault(term, {})[doc_id] = freq

    postings = {
        term: sorted(by_doc.items())
        for term, by_doc in sorted(term_postings.items())
    }
    doc_count = len(doc_lengths)
    avg = sum(doc_lengths.values()) / doc_count if doc_count else 0.0

    index = InvertedIndex(
        postings=postings,
        doc_lengths=doc_lengths,
        avg_doc_length=avg,
        doc_count=doc_count,
        k1=k1,
        b=b,
    )
    _prepare_arrays(index)
    return index


def _prepare_arrays(index: InvertedIndex) -> None:
    # Docs ordered by ascending id so kernel positions double as the
    # deterministic tie-break rank.
    index._doc_ids = sorted(index.doc_lengths)
    index._doc_pos = {d: i for i, d in enumerate(index._doc_ids)}
    if index.doc_count:
        lengths = np.array([index.doc_lengths[d] for d in index._doc_ids], dtype=np.float64)
        avg = index.avg_doc_length if index.avg_doc_length > 0 else 1.0
        index._norm = index.k1 * (1.0 - index.b + index.b * lengths / avg)
    else:
        index._norm = np.zeros(0, dtype=np.float64)
    index._term_arrays = {}
    for term, plist in index.postings.items():
        d = np.array([index._doc_pos[doc] for doc, _ in plist], dtype=np.int64)
        f = np.array([tf for _, tf in plist], dtype=np.float64)
        index._term_arrays[term] = (d, f)


def bm25_search(index: InvertedIndex, query: str, k: int) -> list[tuple[str, float]]:
    """Top-k documents for the query, scored with Okapi BM25.

    Results are sorted by score descending, ties by ascending doc id;
    documents scoring zero (no query term in common) are excluded.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if index.doc_count == 0:
        return []

    matched = [t for t in tokenize(query) if t in index._term_arrays]
    if not matched:
        return []

    doc_chunks = []
    tf_chunks = []
    indptr = [0]
    idfs = []
    for term in matched:
        d, f = index._term_arrays[term]
        doc_chunks.append(d)
        tf_chunks.append(f)
        indptr.append(indptr[-1] + len(d))
        idfs.append(index.idf(term))

    scores = kernels.bm25_accumulate(
        np.concatenate(doc_chunks),
        np.concatenate(tf_chunks),
        np.array(indptr, dtype=np.int64),
        np.array(idfs, dtype=np.float64),
        index._norm,
        index.k1,
        index.doc_count,
    )
    id_rank = np.arange(index.doc_count, dtype=np.int64)
    top = kernels.topk_indices(scores, id_rank, k, positive_only=True)
    return [(index._doc_ids[i], float(scores[i])) for i in top]

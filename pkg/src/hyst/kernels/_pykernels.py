"""Pure numpy implementations of the scoring kernels."""

from __future__ import annotations

import numpy as np


def bm25_accumulate(
    doc_idx: np.ndarray,
    tf: np.ndarray,
    indptr: np.ndarray,
    idf: np.ndarray,
    norm: np.ndarray,
    k1: float,
    n_docs: int,
) -> np.ndarray:
    """Accumulate per-document BM25 scores over concatenated postings.

    doc_idx/tf hold the postings of every matched query term back to back;
    indptr marks term boundaries; idf is per term; norm is the precomputed
    per-document length normalization k1*(1 - b + b*len/avg_len).
    """
    scores = np.zeros(n_docs, dtype=np.float64)
    for t in range(len(indptr) - 1):
        lo, hi = indptr[t], indptr[t + 1]
        d = doc_idx[lo:hi]
        f = tf[lo:hi]
        scores[d] += idf[t] * f * (k1 + 1.0) / (f + norm[d])
    return scores


def dot_scores(matrix: np.ndarray, cand_idx: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Dot products of the candidate rows of matrix against query."""
    if len(cand_idx) == 0:
        return np.zeros(0, dtype=np.float64)
    return matrix[cand_idx] @ query


def topk_indices(
    scores: np.ndarray,
    id_rank: np.ndarray,
    k: int,
    positive_only: bool = False,
) -> np.ndarray:
    """Positions of the top-k scores, ordered by (score desc, id_rank asc).

    id_rank is the position each entry would take in an ascending sort of
    doc ids, which makes the tie-break deterministic across platforms. With
    positive_only, entries scoring exactly zero are excluded first.
    """
    positions = np.arange(len(scores), dtype=np.int64)
    if positive_only:
        keep = scores > 0.0
        positions = positions[keep]
        scores = scores[keep]
        id_rank = id_rank[keep]
    if len(positions) == 0:
        return positions
    order = np.lexsort((id_rank, -scores))
    return positions[order[:k]]

"""Scoring kernels: compiled extension when available, numpy fallback otherwise.

The two hot loops of the engine live here: BM25 contribution accumulation
over postings lists and the gathered dot-product / top-k selection behind
filtered vector search. Set HYST_KERNELS=python to force the fallback (used
by the backend-comparison benchmark and parity tests).

Both backends implement the same contract:

    bm25_accumulate(doc_idx, tf, indptr, idf, norm, k1, n_docs) -> scores
    dot_scores(matrix, cand_idx, query) -> sims
    topk_indices(scores, id_rank, k, positive_only) -> ordered positions
"""

import os

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("HYST_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        pass

bm25_accumulate = _impl.bm25_accumulate
dot_scores = _impl.dot_scores
topk_indices = _impl.topk_indices

__all__ = ["BACKEND", "bm25_accumulate", "dot_scores", "topk_indices"]

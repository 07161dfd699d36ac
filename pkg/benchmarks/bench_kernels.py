#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the two hot loops on synthetic data shaped like a mid-size corpus:
BM25 accumulation over postings lists and filtered top-k dot products.

    python benchmarks/bench_kernels.py [--docs 100000] [--dim 256] [--repeat 5]
"""

import argparse
import time

import numpy as np

from hyst.kernels import _pykernels

try:
    from hyst.kernels import _ckernels
except ImportError:
    _ckernels = None


def make_bm25_inputs(rng, n_docs, n_terms, df_frac):
    doc_chunks, tf_chunks, indptr = [], [], [0]
    for _ in range(n_terms):
        df = max(1, int(n_docs * rng.uniform(0.2, 1.0) * df_frac))
        docs = np.sort(rng.choice(n_docs, size=df, replace=False)).astype(np.int64)
        doc_chunks.append(docs)
        tf_chunks.append(rng.integers(1, 6, size=df).astype(np.float64))
        indptr.append(indptr[-1] + df)
    return (
        np.concatenate(doc_chunks),
        np.concatenate(tf_chunks),
        np.array(indptr, dtype=np.int64),
        rng.uniform(0.2, 4.0, size=n_terms),
        rng.uniform(0.5, 2.0, size=n_docs),
    )


def time_call(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def fmt(seconds):
    return f"{seconds * 1e3:8.2f} ms"


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--docs", type=int, default=100_000)
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--terms", type=int, default=16, help="query terms for BM25")
    parser.add_argument("--df", type=float, default=0.05, help="max document frequency fraction")
    parser.add_argument("--candidates", type=float, default=0.3, help="filtered candidate fraction")
    parser.add_argument("--k", type=int, default=20)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()

    if _ckernels is None:
        print("compiled kernels not built (pip install -e . --no-build-isolation); "
              "benchmarking the fallback only")

    rng = np.random.default_rng(0)
    rows = []

    # BM25 accumulation + top-k.
    doc_idx, tf, indptr, idf, norm = make_bm25_inputs(rng, args.docs, args.terms, args.df)
    id_rank = np.arange(args.docs, dtype=np.int64)
    postings = len(doc_idx)

    def bm25_with(impl):
        scores = impl.bm25_accumulate(doc_idx, tf, indptr, idf, norm, 1.2, args.docs)
        return impl.topk_indices(scores, id_rank, args.k, True)

    py_time, py_out = time_call(lambda: bm25_with(_pykernels), args.repeat)
    rows.append((f"bm25 score+topk ({postings} postings)", py_time, None))
    if _ckernels is not None:
        cy_time, cy_out = time_call(lambda: bm25_with(_ckernels), args.repeat)
        assert py_out.tolist() == cy_out.tolist(), "backends disagree"
        rows[-1] = (rows[-1][0], py_time, cy_time)

    # Filtered dense search: gather + dot + top-k.
    matrix = np.ascontiguousarray(rng.normal(size=(args.docs, args.dim)))
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    n_cand = int(args.docs * args.candidates)
    cand = np.sort(rng.choice(args.docs, size=n_cand, replace=False)).astype(np.int64)
    query = rng.normal(size=args.dim)
    query /= np.linalg.norm(query)

    def knn_with(impl):
        sims = impl.dot_scores(matrix, cand, query)
        return impl.topk_indices(sims, id_rank[cand], args.k, False)

    py_time, py_out = time_call(lambda: knn_with(_pykernels), args.repeat)
    rows.append((f"filtered knn ({n_cand}x{args.dim})", py_time, None))
    if _ckernels is not None:
        cy_time, cy_out = time_call(lambda: knn_with(_ckernels), args.repeat)
        assert py_out.tolist() == cy_out.tolist(), "backends disagree"
        rows[-1] = (rows[-1][0], py_time, cy_time)

    width = max(len(name) for name, _, _ in rows)
    print(f"{'kernel':<{width}}  {'python':>11}  {'cython':>11}  speedup")
    for name, py_t, cy_t in rows:
        if cy_t is None:
            print(f"{name:<{width}}  {fmt(py_t)}  {'n/a':>11}")
        else:
            print(f"{name:<{width}}  {fmt(py_t)}  {fmt(cy_t)}  {py_t / cy_t:6.2f}x")


if __name__ == "__main__":
    main()

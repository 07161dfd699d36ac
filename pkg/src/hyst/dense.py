"""Embedding providers and an exact-search vector store with pre-filtering.

The store keeps unit-normalized float64 vectors, so cosine similarity is a
plain dot product. Search is exact: at desk scale (<= ~10^5 records) a full
scan over the filtered candidate set is fast, and exactness is what makes
the brute-force equivalence checks airtight. Filtering happens before
scoring, mirroring vector-database semantics; post-filtering a top-k list
could starve results.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .corpus import AttrValue
from .filters import FilterExpr, matches_attrs


class EmbeddingError(RuntimeError):
    """Raised for provider failures (auth, transport exhaustion, bad shapes)."""


class DimensionMismatchError(EmbeddingError):
    """Vector dimension does not match the store or provider declaration."""


class EmbeddingProvider(Protocol):
    """Deterministic text-to-vector interface; all vectors share one dimension."""

    provider_id: str
    dim: int

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]: ...


def embed_hashed(texts: Sequence[str], dim: int, seed: int) -> list[np.ndarray]:
    """Feature-hash word unigrams and bigrams into dim buckets, L2-normalized.

    Fully offline and reproducible across platforms: bucket and sign come
    from a keyed blake2b digest of the token, with the seed as key. An empty
    or punctuation-only text hashes to the all-zero vector, which the store
    rejects at insert.
    """
    if dim < 8:
        raise ValueError(f"dim must be >= 8, got {dim}")
    key = seed.to_bytes(8, "little", signed=True)
    out = []
    for text in texts:
        words = text.lower().split()
        features = words + [f"{a} {b}" for a, b in zip(words, words[1:])]
        vec = np.zeros(dim, dtype=np.float64)
        for feat in features:
            digest = hashlib.blake2b(feat.encode("utf-8"), digest_size=8, key=key).digest()
            h = int.from_bytes(digest, "little")
            bucket = h % dim
            sign = 1.0 if (h >> 63) & 1 else -1.0
            vec[bucket] += sign
        norm = float(np.linalg.norm(vec))
        if norm > 0.0:
            vec /= norm
        out.append(vec)
    return out


class HashedEmbedder:
    """Seeded feature-hashing provider; the offline stand-in for a remote API."""

    def __init__(self, dim: int = 256, seed: int = 0):
        self.dim = dim
        self.seed = seed
        self.provider_id = f"hashed-d{dim}-s{seed}"

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        return embed_hashed(texts, self.dim, self.seed)


class RemoteEmbedder:
    """JSON-over-HTTP embeddings client (OpenAI-style wire format).

    Batches inputs, retries transient failures with capped exponential
    backoff (3 attempts), and reads the credential from an environment
    variable so secrets never land in config files or shell history.
    """

    def __init__(
        self,
        base_url: str,
        model: str,
        credential_env: str = "HYST_API_KEY",
        dim: int | None = None,
        batch_size: int = 128,
        timeout: float = 30.0,
        session=None,
        max_attempts: int = 3,
        backoff: float = 0.5,
    ):
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.credential_env = credential_env
        self.dim = dim
        self.batch_size = batch_size
        self.timeout = timeout
        self.max_attempts = max_attempts
        self.backoff = backoff
        self.provider_id = f"remote-{model}"
        if session is None:
            import requests

            session = requests.Session()
        self._session = session

    def _headers(self) -> dict[str, str]:
        credential = os.environ.get(self.credential_env)
        if not credential:
            raise EmbeddingError(
                f"credential environment variable {self.credential_env} is not set"
            )
        return {"Authorization": f"Bearer {credential}", "Content-Type": "application/json"}

    def _post_batch(self, batch: list[str]) -> list[np.ndarray]:
        url = f"{self.base_url}/embeddings"
        payload = {"model": self.model, "input": list(batch)}
        headers = self._headers()
        last_error: Exception | None = None
        for attempt in range(self.max_attempts):
            try:
                resp = self._session.post(url, json=payload, headers=headers, timeout=self.timeout)
            except Exception as exc:  # connection-level failure: retryable
                last_error = exc
            else:
                if resp.status_code in (401, 403):
                    raise EmbeddingError(f"authentication failed ({resp.status_code})")
                if resp.status_code == 200:
                    return self._parse(resp.json(), len(batch))
                last_error = EmbeddingError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            if attempt + 1 < self.max_attempts:
                time.sleep(min(self.backoff * (2**attempt), 8.0))
        raise EmbeddingError(f"embedding request failed after {self.max_attempts} attempts: {last_error}")

    def _parse(self, body: dict, expected: int) -> list[np.ndarray]:
        data = sorted(body.get("data", []), key=lambda d: d.get("index", 0))
        if len(data) != expected:
            raise EmbeddingError(f"provider returned {len(data)} vectors for {expected} inputs")
        vectors = []
        for item in data:
            vec = np.asarray(item["embedding"], dtype=np.float64)
            if self.dim is None:
                self.dim = int(vec.shape[0])
            elif vec.shape[0] != self.dim:
                raise DimensionMismatchError(
                    f"provider returned {vec.shape[0]}-dim vector, expected {self.dim}"
                )
            vectors.append(vec)
        return vectors

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for start in range(0, len(texts), self.batch_size):
            out.extend(self._post_batch(list(texts[start : start + self.batch_size])))
        return out


class CachedEmbedder:
    """Wraps a provider with a JSON file cache keyed by (provider id, text hash).

    Repeated ingest/eval runs against a paid API become free; the hashed
    provider gains nothing but loses nothing.
    """

    def __init__(self, provider: EmbeddingProvider, cache_path: str | Path):
        self.provider = provider
        self.provider_id = provider.provider_id
        self.cache_path = Path(cache_path)
        self._cache: dict[str, list[float]] = {}
        if self.cache_path.exists():
            self._cache = json.loads(self.cache_path.read_text(encoding="utf-8"))

    @property
    def dim(self) -> int:
        return self.provider.dim

    def _key(self, text: str) -> str:
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return f"{self.provider_id}:{digest}"

    def embed(self, texts: Sequence[str]) -> list[np.ndarray]:
        missing = [t for t in texts if self._key(t) not in self._cache]
        if missing:
            unique_missing = list(dict.fromkeys(missing))
            for text, vec in zip(unique_missing, self.provider.embed(unique_missing)):
                self._cache[self._key(text)] = [float(x) for x in vec]
            self._flush()
        return [np.asarray(self._cache[self._key(t)], dtype=np.float64) for t in texts]

    def _flush(self) -> None:
        self.cache_path.parent.mkdir(parents=True, exist_ok=True)
        tmp = self.cache_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(self._cache, sort_keys=True), encoding="utf-8")
        tmp.replace(self.cache_path)


class VectorStoreError(ValueError):
    """Raised for store misuse: zero vectors, duplicate ids, bad dimensions."""


class VectorStore:
    """Exact cosine-similarity store with metadata pre-filtering.

    Single-writer build phase, then read-many: concurrent knn calls over the
    immutable contents are safe.
    """

    def __init__(self, dimension: int):
        if dimension < 1:
            raise VectorStoreError(f"dimension must be >= 1, got {dimension}")
        self.dimension = dimension
        self._ids: list[str] = []
        self._attrs: list[dict[str, AttrValue]] = []
        self._rows: list[np.ndarray] = []
        self._matrix: np.ndarray | None = None
        self._id_rank: np.ndarray | None = None
        self._pos: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def ids(self) -> list[str]:
        return list(self._ids)

    def add(self, doc_id: str, vector: np.ndarray, attrs: dict[str, AttrValue]) -> None:
        """Insert one entry; the vector is unit-normalized here."""
        if doc_id in self._pos:
            raise VectorStoreError(f"duplicate doc id {doc_id!r}")
        vec = np.asarray(vector, dtype=np.float64)
        if vec.shape != (self.dimension,):
            raise DimensionMismatchError(
                f"vector for {doc_id!r} has shape {vec.shape}, expected ({self.dimension},)"
            )
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise VectorStoreError(f"zero vector rejected for doc id {doc_id!r}")
        self._pos[doc_id] = len(self._ids)
        self._ids.append(doc_id)
        self._attrs.append(attrs)
        self._rows.append(vec / norm)
        self._matrix = None
        self._id_rank = None

    def vector(self, doc_id: str) -> np.ndarray:
        return self._rows[self._pos[doc_id]].copy()

    def _ensure_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if self._matrix is None:
            self._matrix = (
                np.vstack(self._rows)
                if self._rows
                else np.zeros((0, self.dimension), dtype=np.float64)
            )
            order = sorted(range(len(self._ids)), key=lambda i: self._ids[i])
            rank = np.empty(len(order), dtype=np.int64)
            for r, i in enumerate(order):
                rank[i] = r
            self._id_rank = rank
        return self._matrix, self._id_rank


def knn(
    store: VectorStore,
    query_vec: np.ndarray,
    k: int,
    filter: FilterExpr | None = None,
) -> list[tuple[str, float]]:
    """Top-k entries by cosine similarity among filter-satisfying candidates.

    The candidate set is every entry whose attrs satisfy the filter (all
    entries when the filter is absent or universal); similarity is the dot
    product of unit vectors. Results are sorted by similarity descending,
    ties by ascending doc id; returns min(k, |candidates|) items.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    q = np.asarray(query_vec, dtype=np.float64)
    if q.shape != (store.dimension,):
        raise DimensionMismatchError(
            f"query vector has shape {q.shape}, expected ({store.dimension},)"
        )
    qnorm = float(np.linalg.norm(q))
    if qnorm == 0.0:
        raise VectorStoreError("zero query vector")
    q = q / qnorm

    if filter is None or filter.is_universal():
        cand = np.arange(len(store), dtype=np.int64)
    else:
        cand = np.array(
            [i for i, attrs in enumerate(store._attrs) if matches_attrs(filter, attrs)],
            dtype=np.int64,
        )
    if len(cand) == 0:
        return []

    from . import kernels

    matrix, id_rank = store._ensure_arrays()
    sims = kernels.dot_scores(matrix, cand, q)
    top = kernels.topk_indices(sims, id_rank[cand], k, positive_only=False)
    return [(store._ids[cand[i]], float(sims[i])) for i in top]

"""Rank fusion: weighted sparse+dense interpolation and reciprocal rank fusion.

BM25 and cosine scores live on incompatible scales, so interpolation
min-max normalizes each list to [0, 1] first; a document absent from one
list contributes 0 from that side. RRF ignores scores entirely and blends
reciprocal ranks with the conventional constant c = 60.
"""

from __future__ import annotations

from dataclasses import dataclass, field

DEFAULT_RRF_C = 60


@dataclass
class RankedList:
    """An ordered result list: (doc id, score) pairs plus a source label."""

    items: list[tuple[str, float]] = field(default_factory=list)
    source: str = ""

    def __post_init__(self) -> None:
        ids = [d for d, _ in self.items]
        if len(ids) != len(set(ids)):
            raise ValueError(f"ranked list {self.source!r} repeats a doc id")
        scores = [s for _, s in self.items]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError(f"ranked list {self.source!r} scores must be non-increasing")

    @property
    def doc_ids(self) -> list[str]:
        return [d for d, _ in self.items]


def _minmax(items: list[tuple[str, float]]) -> dict[str, float]:
    if not items:
        return {}
    scores = [s for _, s in items]
    lo, hi = min(scores), max(scores)
    if hi == lo:
        # A constant list carries no ordering information; every member is
        # equally "best".
        return {d: 1.0 for d, _ in items}
    return {d: (s - lo) / (hi - lo) for d, s in items}


def interpolate(
    sparse: RankedList,
    dense: RankedList,
    lam: float,
    k: int,
) -> RankedList:
    """Blend two lists: lam * sparse_norm + (1 - lam) * dense_norm, top-k.

    Ties break by ascending doc id. lam outside [0, 1] is an error.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    s_norm = _minmax(sparse.items)
    d_norm = _minmax(dense.items)
    combined = {
        d: lam * s_norm.get(d, 0.0) + (1.0 - lam) * d_norm.get(d, 0.0)
        for d in {*s_norm, *d_norm}
    }
    ranked = sorted(combined.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return RankedList(items=ranked, source=f"interpolate({sparse.source},{dense.source})")


def rrf(lists: list[RankedList], c: int = DEFAULT_RRF_C, k: int = 10) -> RankedList:
    """Reciprocal rank fusion: score(d) = sum of 1/(c + rank(d)), rank from 1."""
    if c < 1:
        raise ValueError(f"c must be >= 1, got {c}")
    if not lists:
        raise ValueError("rrf requires at least one ranked list")
    combined: dict[str, float] = {}
    for ranked in lists:
        for rank, (doc, _) in enumerate(ranked.items, start=1):
            combined[doc] = combined.get(doc, 0.0) + 1.0 / (c + rank)
    ranked_items = sorted(combined.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return RankedList(items=ranked_items, source="rrf")

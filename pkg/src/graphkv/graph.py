"""Sparse token-similarity graph: top-k source nodes with edges to every token."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .kv_model import LayerCache, as_scores


class SimilarityKind(str, enum.Enum):
    """Which vector pair an edge compares: (source side, target side)."""

    KEY_KEY = "key_key"
    QUERY_KEY = "query_key"
    QUERY_QUERY = "query_query"
    KEY_VALUE = "key_value"
    VALUE_VALUE = "value_value"

    @property
    def needs_queries(self) -> bool:
        return self in (SimilarityKind.QUERY_KEY, SimilarityKind.QUERY_QUERY)


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SourceSelection:
    """Number of source nodes, either as a fraction of the layer budget or absolute."""

    ratio: Optional[float] = None
    k: Optional[int] = None

    def __post_init__(self):
        if (self.ratio is None) == (self.k is None):
            raise ValueError("set exactly one of ratio or k")
        if self.ratio is not None and not 0 < self.ratio <= 1:
            raise ValueError("ratio must lie in (0, 1]")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")

    def resolve(self, n: int, budget: int) -> int:
        if self.k is not None:
            k = self.k
        else:
            # tolerance absorbs products like 0.29 * 100 = 28.999999999999996
            k = math.floor(self.ratio * budget + 1e-9)
        return max(1, min(n, k))


@dataclass
class SparseGraph:
    n: int
    source_ids: np.ndarray  # (k,) ascending int64
    edges: np.ndarray  # (k, n) float64; edges[a, source_ids[a]] == 0
    similarity_count: int = 0

    @property
    def k(self) -> int:
        return self.source_ids.shape[0]


def top_indices(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest entries, ties to the lowest index, sorted ascending."""
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:k])


def select_source_nodes(scores, sel: SourceSelection, budget: int) -> np.ndarray:
    s = as_scores(scores)
    if s.shape[0] == 0:
        raise ValueError("cannot select sources from an empty score vector")
    return top_indices(s, sel.resolve(s.shape[0], budget))


def vector_pair(cache: LayerCache, kind: SimilarityKind) -> tuple[np.ndarray, np.ndarray]:
    """(source-side, target-side) per-token matrices for ``kind``, each n x d."""
    n = cache.n
    if kind.needs_queries:
        q = cache.queries
        if q is None:
            raise ConfigurationError(f"{kind.value} similarity requires queries")
        if q.shape[0] < n:
            raise ConfigurationError(
                f"{kind.value} similarity needs one query per token ({q.shape[0]} < {n})"
            )
        q = q[:n]
    if kind is SimilarityKind.KEY_KEY:
        return cache.keys, cache.keys
    if kind is SimilarityKind.QUERY_KEY:
        return q, cache.keys
    if kind is SimilarityKind.QUERY_QUERY:
        return q, q
    if kind is SimilarityKind.KEY_VALUE:
        return cache.keys, cache.values
    return cache.values, cache.values


def _unit_rows(m: np.ndarray) -> np.ndarray:
    m = m.astype(np.float64)
    norms = np.sqrt(np.einsum("ij,ij->i", m, m))
    out = np.zeros_like(m)
    nz = norms > 0
    out[nz] = m[nz] / norms[nz, None]
    return out


def build_sparse_graph(
    cache: LayerCache,
    scores,
    sel: SourceSelection,
    budget: int,
    kind: SimilarityKind = SimilarityKind.KEY_KEY,
) -> SparseGraph:
    """Edges from each source to every other token; never computes the full n x n matrix.

    Non-source targets are processed as contiguous runs between source
    positions, and source-to-source pairs one source at a time, so the number
    of similarities evaluated is exactly ``k * (n - 1)``.
    """
    n = cache.n
    s = as_scores(scores, n)
    src_mat, tgt_mat = vector_pair(cache, kind)
    sources = select_source_nodes(s, sel, budget)
    k = sources.shape[0]

    src_unit = _unit_rows(src_mat[sources])
    tgt_unit = _unit_rows(tgt_mat)
    edges = np.zeros((k, n))
    count = 0

    start = 0
    for stop in list(sources) + [n]:
        if stop > start:
            edges[:, start:stop] = src_unit @ tgt_unit[start:stop].T
            count += k * (stop - start)
        start = stop + 1

    for a in range(k):
        others = np.delete(sources, a)
        if others.shape[0]:
            edges[a, others] = tgt_unit[others] @ src_unit[a]
            count += others.shape[0]

    np.clip(edges, -1.0, 1.0, out=edges)
    return SparseGraph(n=n, source_ids=sources, edges=edges, similarity_count=count)


def neighborhood(g: SparseGraph, source_pos: int, m: int) -> np.ndarray:
    """The ``min(m, n-1)`` tokens most similar to source ``source_pos``, ascending."""
    if m < 1:
        raise ValueError("m must be >= 1")
    src = int(g.source_ids[source_pos])
    row = g.edges[source_pos]
    candidates = np.delete(np.arange(g.n), src)
    order = np.argsort(-row[candidates], kind="stable")
    return np.sort(candidates[order[: min(m, g.n - 1)]])

"""Core numeric types and small kernels shared by the rest of the package.

Matrices are plain 2-D ``numpy.float32`` arrays (rows = tokens). Score vectors
are 1-D ``numpy.float64`` arrays; ``-inf`` is a legal sentinel, NaN never is.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """Coerce ``data`` to a C-contiguous 2-D float32 array with finite entries."""
    m = np.ascontiguousarray(data, dtype=np.float32)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite values")
    return m


def as_scores(data, n: Optional[int] = None) -> np.ndarray:
    """Coerce ``data`` to a float64 score vector, rejecting NaN and +inf."""
    s = np.array(data, dtype=np.float64).reshape(-1)
    if np.any(np.isnan(s)):
        raise ValueError("scores contain NaN")
    if np.any(s == np.inf):
        raise ValueError("scores contain +inf")
    if n is not None and s.shape[0] != n:
        raise ValueError(f"expected {n} scores, got {s.shape[0]}")
    return s


@dataclass(frozen=True)
class LayerCache:
    """One layer's keys and values, plus the queries that produced them if known."""

    keys: np.ndarray
    values: np.ndarray
    queries: Optional[np.ndarray] = None
    layer_index: int = 0

    def __post_init__(self):
        keys = as_matrix(self.keys, "keys")
        values = as_matrix(self.values, "values")
        if keys.shape != values.shape:
            raise ValueError(f"keys {keys.shape} and values {values.shape} differ in shape")
        object.__setattr__(self, "keys", keys)
        object.__setattr__(self, "values", values)
        if self.queries is not None:
            queries = as_matrix(self.queries, "queries")
            if queries.shape[1] != keys.shape[1]:
                raise ValueError("queries and keys differ in feature dimension")
            object.__setattr__(self, "queries", queries)
        if self.layer_index < 0:
            raise ValueError("layer_index must be non-negative")

    @property
    def n(self) -> int:
        return self.keys.shape[0]

    @property
    def d(self) -> int:
        return self.keys.shape[1]

    def prefix(self, length: int) -> "LayerCache":
        """Cache restricted to the first ``length`` tokens.

        Queries are kept whole unless they are aligned one-per-token, in which
        case they are truncated alongside keys and values.
        """
        queries = self.queries
        if queries is not None and queries.shape[0] >= self.n:
            queries = queries[:length]
        return LayerCache(self.keys[:length], self.values[:length], queries, self.layer_index)


def cosine_similarity(u, v) -> float:
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if u.shape != v.shape:
        raise ValueError(f"length mismatch: {u.shape[0]} vs {v.shape[0]}")
    if u.shape[0] == 0:
        raise ValueError("vectors must be non-empty")
    nu = float(np.sqrt(np.dot(u, u)))
    nv = float(np.sqrt(np.dot(v, v)))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    c = float(np.dot(u, v)) / (nu * nv)
    return min(1.0, max(-1.0, c))


def l2_norm_rows(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    return np.sqrt(np.einsum("ij,ij->i", m, m))


def softmax_row(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.shape[0] == 0:
        raise ValueError("softmax of an empty vector")
    e = np.exp(v - v.max())
    return e / e.sum()


def softmax_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise softmax of a 2-D float64 array."""
    e = np.exp(m - m.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)

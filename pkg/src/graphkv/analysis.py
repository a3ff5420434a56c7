"""Diagnostics: pairwise similarity statistics, 2-D PCA, and KV memory accounting."""
from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .kv_model import as_matrix


@dataclass
class SimilarityStats:
    mean: float
    variance: float
    bin_edges: np.ndarray
    counts: np.ndarray

    @property
    def pairs(self) -> int:
        return int(self.counts.sum())


def pairwise_cosine_stats(m, subset, bins: int = 40) -> SimilarityStats:
    """Mean, population variance and histogram of cosines over unordered pairs in ``subset``."""
    idx = np.asarray(subset, dtype=np.int64).reshape(-1)
    if idx.shape[0] < 2:
        raise ValueError("need at least two tokens for pairwise statistics")
    x = as_matrix(m)[idx].astype(np.float64)
    norms = np.linalg.norm(x, axis=1)
    unit = np.divide(x, norms[:, None], out=np.zeros_like(x), where=norms[:, None] > 0)
    iu = np.triu_indices(idx.shape[0], k=1)
    sims = np.clip((unit @ unit.T)[iu], -1.0, 1.0)
    counts, edges = np.histogram(sims, bins=bins, range=(-1.0, 1.0))
    return SimilarityStats(float(sims.mean()), float(sims.var()), edges, counts)


def _power_iteration(cov, start, max_iter=1000, tol=1e-10):
    v = start / np.linalg.norm(start)
    for _ in range(max_iter):
        w = cov @ v
        norm = np.linalg.norm(w)
        if norm == 0:
            return v, 0.0
        w /= norm
        done = np.linalg.norm(w - v) < tol
        v = w
        if done:
            break
    return v, float(v @ cov @ v)


def _start_vector(d: int, basis: list[np.ndarray]) -> np.ndarray:
    # all-ones first; fall back to unit axes if it lies in the span already found
    for cand in [np.ones(d)] + list(np.eye(d)):
        r = cand - sum((cand @ b) * b for b in basis) if basis else cand.copy()
        if np.linalg.norm(r) > 1e-8:
            return r
    raise ValueError("no start vector outside the found subspace")


def pca_2d(m) -> tuple[np.ndarray, np.ndarray]:
    """Project rows onto the top two principal directions.

    Directions come from power iteration with deflation on the sample
    covariance. Each direction is signed so its largest-magnitude component
    is positive. Returns ``(coords (n, 2), explained_variance (2,))``.
    """
    x = as_matrix(m).astype(np.float64)
    n, d = x.shape
    if n < 2 or d < 2:
        raise ValueError("pca_2d needs at least 2 rows and 2 columns")
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / (n - 1)
    if not np.any(cov):
        return np.zeros((n, 2)), np.zeros(2)

    directions, variances = [], []
    deflated = cov.copy()
    for _ in range(2):
        v, lam = _power_iteration(deflated, _start_vector(d, directions))
        if lam <= 0:
            v, lam = np.zeros(d), 0.0
        else:
            v = v if v[np.argmax(np.abs(v))] > 0 else -v
            deflated = deflated - lam * np.outer(v, v)
        directions.append(v)
        variances.append(max(lam, 0.0))
    basis = np.stack(directions, axis=1)
    return xc @ basis, np.array(variances)


@dataclass(frozen=True)
class ModelGeometry:
    layers: int = 32
    kv_heads: int = 8
    head_dim: int = 128
    bytes_per_element: int = 2

    def __post_init__(self):
        for name in ("layers", "kv_heads", "head_dim", "bytes_per_element"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def bytes_per_token(self) -> int:
        return 2 * self.layers * self.kv_heads * self.head_dim * self.bytes_per_element


def kv_memory_gb(geom: ModelGeometry, tokens: int) -> float:
    """KV-cache size in GiB (keys and values, all layers and KV heads)."""
    if tokens < 0:
        raise ValueError("tokens must be >= 0")
    return tokens * geom.bytes_per_token / 2**30


def round_half_up(x: float, places: int = 3) -> str:
    return str(Decimal(repr(x)).quantize(Decimal(1).scaleb(-places), rounding=ROUND_HALF_UP))

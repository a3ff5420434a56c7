"""Seeded clustered-key workloads with ground-truth cluster labels.

Randomness comes from SplitMix64 (Steele, Lea & Flood 2014; the variant in
Vigna's ``splitmix64.c``) so any implementation can reproduce the streams:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    return z ^ (z >> 31)                      (all arithmetic mod 2**64)

Uniforms are ``(x >> 11) * 2**-53`` in [0, 1). Normals use basic Box-Muller on
consecutive uniform pairs ``(u1, u2)``: ``r = sqrt(-2 ln(1 - u1))`` then
``r cos(2 pi u2)``, ``r sin(2 pi u2)``; an odd request discards the sine half.

Draw order for ``gen_clustered_keys``: centers (c*d normals), member noise
(n*d normals, skipped when sigma == 0), values (n*d normals), then per query
one uniform for the cluster pick followed by d normals of noise.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .kv_model import LayerCache

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


def splitmix64_reference(seed: int, count: int) -> list[int]:
    """Scalar pure-Python SplitMix64, used to pin the vectorized stream."""
    state = seed & _MASK
    out = []
    for _ in range(count):
        state = (state + GOLDEN_GAMMA) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        out.append(z ^ (z >> 31))
    return out


class SplitMix64:
    def __init__(self, seed: int):
        self.state = np.uint64(seed & _MASK)

    def next_u64(self, count: int) -> np.ndarray:
        steps = np.arange(1, count + 1, dtype=np.uint64)
        z = self.state + steps * np.uint64(GOLDEN_GAMMA)
        if count:
            self.state = z[-1]
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    def uniform(self, count: int) -> np.ndarray:
        return (self.next_u64(count) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, count: int) -> np.ndarray:
        pairs = (count + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        theta = 2.0 * np.pi * u[:, 1]
        z = np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1).reshape(-1)
        return z[:count]


@dataclass(frozen=True)
class ClusterSpec:
    seed: int = 42
    clusters: int = 5
    per_cluster: int = 20
    dim: int = 64
    sigma: float = 0.05
    query_count: int = 32
    query_focus: Optional[tuple[float, ...]] = None  # None = uniform over clusters

    def __post_init__(self):
        if self.clusters < 1 or self.per_cluster < 1:
            raise ValueError("clusters and per_cluster must be >= 1")
        if self.dim < 2:
            raise ValueError("dim must be >= 2")
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")
        if self.query_count < 0:
            raise ValueError("query_count must be >= 0")
        if self.query_focus is not None:
            focus = tuple(float(x) for x in self.query_focus)
            if len(focus) != self.clusters:
                raise ValueError("query_focus needs one weight per cluster")
            if any(x < 0 for x in focus) or sum(focus) <= 0:
                raise ValueError("query_focus weights must be non-negative with positive sum")
            object.__setattr__(self, "query_focus", focus)

    def to_json(self) -> dict:
        d = asdict(self)
        d["query_focus"] = list(self.query_focus) if self.query_focus is not None else None
        return d


@dataclass
class ClusterWorkload:
    cache: LayerCache
    labels: np.ndarray  # token i belongs to cluster labels[i] == i // per_cluster
    spec: ClusterSpec
    centers: np.ndarray = field(repr=False, default=None)


def _normalize_rows(m: np.ndarray) -> np.ndarray:
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def gen_clustered_keys(spec: ClusterSpec) -> ClusterWorkload:
    """Unit-norm keys grouped in ``clusters`` tight clusters of ``per_cluster`` tokens."""
    rng = SplitMix64(spec.seed)
    c, r, d = spec.clusters, spec.per_cluster, spec.dim
    n = c * r

    centers = _normalize_rows(rng.normal(c * d).reshape(c, d))
    labels = np.repeat(np.arange(c, dtype=np.int64), r)
    keys = centers[labels]
    if spec.sigma > 0:
        keys = _normalize_rows(keys + spec.sigma * rng.normal(n * d).reshape(n, d))
    values = rng.normal(n * d).reshape(n, d)

    weights = np.full(c, 1.0 / c) if spec.query_focus is None else np.asarray(spec.query_focus)
    cdf = np.cumsum(weights / weights.sum())
    queries = np.empty((spec.query_count, d))
    for i in range(spec.query_count):
        pick = min(int(np.searchsorted(cdf, rng.uniform(1)[0], side="right")), c - 1)
        queries[i] = centers[pick] + spec.sigma * rng.normal(d)

    cache = LayerCache(keys.astype(np.float32), values.astype(np.float32),
                       queries.astype(np.float32))
    return ClusterWorkload(cache, labels, spec, centers)


def cluster_coverage(kept, labels) -> int:
    kept = np.asarray(kept, dtype=np.int64).reshape(-1)
    return int(np.unique(np.asarray(labels)[kept]).shape[0])

"""Signal propagation over the sparse graph to refine importance scores."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .graph import SimilarityKind, SourceSelection, SparseGraph, build_sparse_graph, neighborhood, vector_pair
from .kv_model import LayerCache, as_scores

MAX_ROUNDS = 16


class SignalKind(str, enum.Enum):
    DECAY = "decay"
    ENHANCED = "enhanced"
    EVICTED = "evicted"


@dataclass(frozen=True)
class FixedNeighbors:
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")

    def resolve(self, n: int) -> int:
        return self.m


@dataclass(frozen=True)
class AdaptiveNeighbors:
    """Neighborhood size that grows with context length, capped at ``m_max``."""

    m_max: int = 64
    alpha: float = 0.001

    def __post_init__(self):
        if self.m_max < 1:
            raise ValueError("m_max must be >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be > 0")

    def resolve(self, n: int) -> int:
        return max(1, min(self.m_max, math.ceil(self.alpha * n)))


NeighborPolicy = Union[FixedNeighbors, AdaptiveNeighbors]


@dataclass(frozen=True)
class PropagationConfig:
    rounds: int = 1
    neighbors: NeighborPolicy = field(default_factory=AdaptiveNeighbors)
    signal: SignalKind = SignalKind.DECAY
    strength: float = 1.0  # global multiplier on clamped edge weights

    def __post_init__(self):
        if not 0 <= self.rounds <= MAX_ROUNDS:
            raise ValueError(f"rounds must lie in [0, {MAX_ROUNDS}]")
        if self.strength < 0:
            raise ValueError("strength must be >= 0")
        object.__setattr__(self, "signal", SignalKind(self.signal))


def propagate(g: SparseGraph, scores, cfg: PropagationConfig) -> np.ndarray:
    s = as_scores(scores)
    if s.shape[0] != g.n:
        raise ValueError(f"{s.shape[0]} scores for a graph of {g.n} tokens")
    if cfg.rounds == 0 or g.n < 2:
        return s
    if cfg.signal is not SignalKind.EVICTED and not np.all(np.isfinite(s)):
        raise ValueError(f"{cfg.signal.value} propagation requires finite scores")

    m = cfg.neighbors.resolve(g.n)
    hoods = [neighborhood(g, a, m) for a in range(g.k)]

    if cfg.signal is SignalKind.EVICTED:
        for nb in hoods:
            s[nb] = -np.inf
        return s

    sign = -1.0 if cfg.signal is SignalKind.DECAY else 1.0
    factors = [
        1.0 + sign * np.clip(cfg.strength * g.edges[a, nb], 0.0, 1.0)
        for a, nb in enumerate(hoods)
    ]
    for _ in range(cfg.rounds):
        # one multiply per (source, neighbor), sources in ascending order
        for nb, f in zip(hoods, factors):
            s[nb] *= f
    return s


def refine_scores(
    cache: LayerCache,
    scores,
    sel: SourceSelection,
    budget: int,
    kind: SimilarityKind = SimilarityKind.KEY_KEY,
    cfg: PropagationConfig = PropagationConfig(),
) -> np.ndarray:
    """Select sources, build the sparse graph, and propagate."""
    s = as_scores(scores, cache.n)
    if cfg.rounds == 0:
        vector_pair(cache, kind)  # configuration errors surface regardless of T
        return s
    g = build_sparse_graph(cache, s, sel, budget, kind)
    return propagate(g, s, cfg)

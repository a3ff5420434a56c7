"""Budgeted token selection and compressed-cache assembly."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .graph import SimilarityKind, SourceSelection, top_indices
from .kv_model import LayerCache, as_scores
from .propagation import PropagationConfig, refine_scores
from .scorers import (
    ScorerKind,
    WindowConfig,
    score_cumulative_attention,
    score_knorm,
    score_window_attention,
)


class InvariantError(RuntimeError):
    """An eviction result broke one of its own guarantees."""


@dataclass(frozen=True)
class Refinement:
    selection: SourceSelection = field(default_factory=lambda: SourceSelection(ratio=0.3))
    kind: SimilarityKind = SimilarityKind.KEY_KEY
    propagation: PropagationConfig = field(default_factory=PropagationConfig)


@dataclass(frozen=True)
class EvictionPolicy:
    scorer: ScorerKind = ScorerKind.WINDOW_ATTENTION
    window: WindowConfig = field(default_factory=WindowConfig)
    knorm_low_is_important: bool = True
    refinement: Optional[Refinement] = None
    protected_window: int = 0

    def __post_init__(self):
        object.__setattr__(self, "scorer", ScorerKind(self.scorer))
        if self.protected_window < 0:
            raise ValueError("protected_window must be >= 0")

    def baseline(self) -> "EvictionPolicy":
        """The same policy with graph refinement switched off."""
        return EvictionPolicy(
            self.scorer, self.window, self.knorm_low_is_important, None, self.protected_window
        )


@dataclass
class EvictionResult:
    kept_indices: np.ndarray
    keys_sub: np.ndarray
    values_sub: np.ndarray
    refined_scores: np.ndarray
    base_scores: Optional[np.ndarray] = None


def select_topk(scores, k: int) -> np.ndarray:
    s = as_scores(scores)
    if k < 0 or k > s.shape[0]:
        raise ValueError(f"cannot keep {k} of {s.shape[0]} tokens")
    return top_indices(s, k)


def gather(cache: LayerCache, indices) -> tuple[np.ndarray, np.ndarray]:
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.shape[0] and (idx.min() < 0 or idx.max() >= cache.n):
        raise ValueError(f"index out of range for {cache.n} tokens")
    if np.any(np.diff(idx) <= 0):
        raise ValueError("indices must be strictly ascending")
    return cache.keys[idx].copy(), cache.values[idx].copy()


def base_scores(cache: LayerCache, policy: EvictionPolicy) -> np.ndarray:
    if policy.scorer is ScorerKind.KNORM:
        return score_knorm(cache.keys, policy.knorm_low_is_important)
    if cache.queries is None:
        raise ValueError(f"{policy.scorer.value} scoring requires queries")
    if policy.scorer is ScorerKind.WINDOW_ATTENTION:
        return score_window_attention(cache.queries, cache.keys, policy.window)
    return score_cumulative_attention(cache.queries, cache.keys)


def evict(cache: LayerCache, budget: int, policy: EvictionPolicy) -> EvictionResult:
    """Keep ``budget`` tokens: the protected trailing window plus the best-scored rest.

    Graph refinement, when configured, only touches tokens outside the
    protected window; window tokens are neither sources nor decay targets.
    """
    n, w = cache.n, policy.protected_window
    if not 0 <= budget <= n:
        raise ValueError(f"budget {budget} outside [0, {n}]")
    if w > budget:
        raise ValueError(f"protected window {w} exceeds budget {budget}")

    base = as_scores(base_scores(cache, policy), n)
    scores = base.copy()
    head = n - w
    if policy.refinement is not None and head > 0:
        r = policy.refinement
        scores[:head] = refine_scores(
            cache.prefix(head), base[:head], r.selection, budget, r.kind, r.propagation
        )

    kept = np.concatenate([select_topk(scores[:head], budget - w), np.arange(head, n)])
    kept = kept.astype(np.int64)
    if kept.shape[0] != budget or np.any(np.diff(kept) <= 0):
        raise InvariantError(f"kept set {kept.tolist()} violates the budget contract")
    keys_sub, values_sub = gather(cache, kept)
    return EvictionResult(kept, keys_sub, values_sub, scores, base)

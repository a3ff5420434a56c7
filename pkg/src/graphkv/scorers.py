"""Baseline importance scorers and per-layer budget allocators.

These emulate the families GraphKV is plugged into: key-norm ranking,
observation-window attention (SnapKV-like), cumulative attention (H2O-like),
plus uniform and pyramid budget schedules.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .kv_model import as_matrix, l2_norm_rows, softmax_rows


class ScorerKind(str, enum.Enum):
    KNORM = "knorm"
    WINDOW_ATTENTION = "window"
    CUMULATIVE_ATTENTION = "cumulative"


@dataclass(frozen=True)
class WindowConfig:
    window_len: int = 32
    pool_width: int = 1

    def __post_init__(self):
        if self.window_len < 1:
            raise ValueError("window_len must be >= 1")
        if self.pool_width < 1:
            raise ValueError("pool_width must be >= 1")


def score_knorm(keys, low_norm_is_important: bool = True) -> np.ndarray:
    """Score tokens by key L2 norm.

    By default a small key norm means high importance, so the score is the
    negated norm. ``low_norm_is_important=False`` flips the sign.
    """
    norms = l2_norm_rows(as_matrix(keys, "keys"))
    return -norms if low_norm_is_important else norms


def _attention_probs(queries, keys) -> np.ndarray:
    q = as_matrix(queries, "queries").astype(np.float64)
    k = as_matrix(keys, "keys").astype(np.float64)
    if q.shape[1] != k.shape[1]:
        raise ValueError("queries and keys differ in feature dimension")
    if k.shape[0] == 0:
        raise ValueError("no keys to attend to")
    logits = (q @ k.T) / math.sqrt(k.shape[1])
    return softmax_rows(logits)


def max_pool_1d(scores: np.ndarray, width: int) -> np.ndarray:
    """Stride-1 sliding max, same length, window truncated at the edges.

    The window for position ``i`` covers ``[i - width//2, i - width//2 + width)``.
    """
    if width <= 1 or scores.shape[0] == 0:
        return scores.copy()
    left = width // 2
    right = width - 1 - left
    padded = np.concatenate([np.full(left, -np.inf), scores, np.full(right, -np.inf)])
    windows = np.lib.stride_tricks.sliding_window_view(padded, width)
    return windows.max(axis=1)


def score_window_attention(queries, keys, cfg: WindowConfig = WindowConfig()) -> np.ndarray:
    q = as_matrix(queries, "queries")
    if q.shape[0] < cfg.window_len:
        raise ValueError(
            f"window of {cfg.window_len} rows exceeds the {q.shape[0]} available queries"
        )
    probs = _attention_probs(q[q.shape[0] - cfg.window_len:], keys)
    # ascending-row reduction keeps the result independent of BLAS threading
    total = np.zeros(probs.shape[1])
    for row in probs:
        total += row
    return max_pool_1d(total / cfg.window_len, cfg.pool_width)


def score_cumulative_attention(queries, keys) -> np.ndarray:
    q = as_matrix(queries, "queries")
    if q.shape[0] == 0:
        raise ValueError("cumulative attention needs at least one query")
    probs = _attention_probs(q, keys)
    total = np.zeros(probs.shape[1])
    for row in probs:
        total += row
    return total


def _distribute(total: int, weights: list[float]) -> list[int]:
    wsum = math.fsum(weights)
    budgets = [int(math.floor(total * w / wsum)) for w in weights]
    remainder = total - sum(budgets)
    for i in range(remainder):
        budgets[i % len(budgets)] += 1
    return budgets


def allocate_budget_uniform(total: int, num_layers: int) -> list[int]:
    if num_layers < 1:
        raise ValueError("num_layers must be >= 1")
    if total < 0:
        raise ValueError("total must be >= 0")
    base, rem = divmod(total, num_layers)
    return [base + (1 if i < rem else 0) for i in range(num_layers)]


def allocate_budget_pyramid(total: int, num_layers: int, taper: float = 8.0) -> list[int]:
    """Linearly tapering budgets: layer 0 gets ``taper`` times the last layer's weight."""
    if num_layers < 1:
        raise ValueError("num_layers must be >= 1")
    if total < 0:
        raise ValueError("total must be >= 0")
    if not taper > 1:
        raise ValueError("taper must be > 1")
    if num_layers == 1:
        return [total]
    step = (1.0 - 1.0 / taper) / (num_layers - 1)
    weights = [1.0 - layer * step for layer in range(num_layers)]
    return _distribute(total, weights)

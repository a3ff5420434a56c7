"""Dense, deliberately naive reference implementations for tests.

Everything here builds the full n x n similarity matrix and uses plain Python
loops over float64 values. Nothing is shared with the fast path beyond the
config dataclasses.
"""
from __future__ import annotations

import math

import numpy as np

from .graph import ConfigurationError, SimilarityKind, SourceSelection
from .kv_model import LayerCache
from .propagation import PropagationConfig, SignalKind


def _cos(u: list[float], v: list[float]) -> float:
    dot = sum(a * b for a, b in zip(u, v))
    nu = math.sqrt(sum(a * a for a in u))
    nv = math.sqrt(sum(b * b for b in v))
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return max(-1.0, min(1.0, dot / (nu * nv)))


def dense_cross_similarity(a, b) -> np.ndarray:
    rows_a = np.asarray(a, dtype=np.float64).tolist()
    rows_b = np.asarray(b, dtype=np.float64).tolist()
    out = np.zeros((len(rows_a), len(rows_b)))
    for i, u in enumerate(rows_a):
        for j, v in enumerate(rows_b):
            out[i, j] = _cos(u, v)
    return out


def dense_full_similarity(m) -> np.ndarray:
    return dense_cross_similarity(m, m)


def _pair(cache: LayerCache, kind: SimilarityKind):
    n = cache.n
    if kind in (SimilarityKind.QUERY_KEY, SimilarityKind.QUERY_QUERY):
        if cache.queries is None or cache.queries.shape[0] < n:
            raise ConfigurationError(f"{kind.value} needs one query per token")
        q = cache.queries[:n]
        return (q, cache.keys) if kind is SimilarityKind.QUERY_KEY else (q, q)
    return {
        SimilarityKind.KEY_KEY: (cache.keys, cache.keys),
        SimilarityKind.KEY_VALUE: (cache.keys, cache.values),
        SimilarityKind.VALUE_VALUE: (cache.values, cache.values),
    }[kind]


def dense_reference_refine(
    cache: LayerCache,
    scores,
    sel: SourceSelection,
    budget: int,
    kind: SimilarityKind,
    cfg: PropagationConfig,
) -> np.ndarray:
    n = cache.n
    s = [float(x) for x in np.asarray(scores, dtype=np.float64).reshape(-1)]
    if len(s) != n:
        raise ValueError("score length mismatch")
    src_mat, tgt_mat = _pair(cache, kind)
    if cfg.rounds == 0:
        return np.array(s)
    sim = dense_cross_similarity(src_mat, tgt_mat)

    if sel.k is not None:
        k = sel.k
    else:
        k = math.floor(sel.ratio * budget + 1e-9)
    k = max(1, min(n, k))
    ranked = sorted(range(n), key=lambda i: (-s[i], i))
    sources = sorted(ranked[:k])

    m = cfg.neighbors.resolve(n)
    hoods = []
    for i in sources:
        others = sorted((j for j in range(n) if j != i), key=lambda j: (-sim[i][j], j))
        hoods.append(sorted(others[:m]))

    for _ in range(cfg.rounds):
        for i, hood in zip(sources, hoods):
            for j in hood:
                if cfg.signal is SignalKind.EVICTED:
                    s[j] = -math.inf
                    continue
                c = min(1.0, max(0.0, cfg.strength * sim[i][j]))
                if cfg.signal is SignalKind.DECAY:
                    s[j] = s[j] * (1.0 - c)
                else:
                    s[j] = s[j] * (1.0 + c)
    return np.array(s)

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_cache
from graphkv.graph import SimilarityKind, SourceSelection, SparseGraph, build_sparse_graph, neighborhood
from graphkv.oracle import dense_reference_refine
from graphkv.propagation import (
    AdaptiveNeighbors,
    FixedNeighbors,
    PropagationConfig,
    SignalKind,
    propagate,
    refine_scores,
)


def cfg(rounds=1, m=1, signal=SignalKind.DECAY, **kw):
    return PropagationConfig(rounds, FixedNeighbors(m), signal, **kw)


def test_single_decay():
    g = SparseGraph(3, np.array([0]), np.array([[0.0, 1.0, 0.0]]))
    np.testing.assert_array_equal(propagate(g, [1.0, 0.8, 0.2], cfg()), [1.0, 0.0, 0.2])


def test_two_sources_multiply():
    g = SparseGraph(3, np.array([0, 1]), np.array([[0.0, 0.1, 0.5], [0.1, 0.0, 0.5]]))
    out = propagate(g, [1.0, 1.0, 1.0], cfg(m=1))
    assert out[2] == 0.25


def test_signals():
    g = SparseGraph(2, np.array([0]), np.array([[0.0, 0.5]]))
    assert propagate(g, [1.0, 1.0], cfg(signal=SignalKind.ENHANCED))[1] == 1.5
    assert propagate(g, [1.0, 1.0], cfg(signal=SignalKind.EVICTED))[1] == -np.inf
    assert propagate(g, [1.0, 1.0], cfg(signal=SignalKind.DECAY))[1] == 0.5


def test_negative_edges_clamped():
    g = SparseGraph(2, np.array([0]), np.array([[0.0, -0.7]]))
    for signal in (SignalKind.DECAY, SignalKind.ENHANCED):
        assert propagate(g, [1.0, 0.3], cfg(signal=signal))[1] == 0.3


def test_strength_multiplier():
    g = SparseGraph(2, np.array([0]), np.array([[0.0, 0.4]]))
    assert propagate(g, [1.0, 1.0], cfg(strength=0.5))[1] == pytest.approx(0.8)
    assert propagate(g, [1.0, 1.0], cfg(strength=5.0))[1] == 0.0


def test_t0_identity_and_input_untouched():
    rng = np.random.default_rng(0)
    cache = random_cache(rng, 10, 4)
    s = rng.random(10)
    g = build_sparse_graph(cache, s, SourceSelection(k=3), 10)
    before = s.copy()
    out = propagate(g, s, cfg(rounds=0))
    assert out.tobytes() == s.tobytes()
    propagate(g, s, cfg(rounds=2, m=4))
    assert s.tobytes() == before.tobytes()


def test_length_mismatch():
    g = SparseGraph(3, np.array([0]), np.zeros((1, 3)))
    with pytest.raises(ValueError):
        propagate(g, [1.0, 2.0], cfg())


def test_adaptive_m():
    assert AdaptiveNeighbors().resolve(100) == 1
    assert AdaptiveNeighbors().resolve(20_000) == 20
    assert AdaptiveNeighbors().resolve(1_000_000) == 64
    assert AdaptiveNeighbors(5, 0.5).resolve(3) == 2


def test_config_validation():
    with pytest.raises(ValueError):
        PropagationConfig(rounds=17)
    with pytest.raises(ValueError):
        FixedNeighbors(0)


def test_refine_three_token(three_token_cache):
    out = refine_scores(three_token_cache, [1.0, 0.8, 0.2], SourceSelection(k=1), 3,
                        SimilarityKind.KEY_KEY, cfg())
    np.testing.assert_array_equal(out, [1.0, 0.0, 0.2])
    same = refine_scores(three_token_cache, [1.0, 0.8, 0.2], SourceSelection(k=1), 3,
                         SimilarityKind.KEY_KEY, cfg(rounds=0))
    np.testing.assert_array_equal(same, [1.0, 0.8, 0.2])


def test_refine_matches_oracle_seed7():
    rng = np.random.default_rng(7)
    cache = random_cache(rng, 64, 16)
    s = rng.random(64)
    c = cfg(rounds=2, m=8)
    fast = refine_scores(cache, s, SourceSelection(ratio=0.3), 20, SimilarityKind.KEY_KEY, c)
    slow = dense_reference_refine(cache, s, SourceSelection(ratio=0.3), 20, SimilarityKind.KEY_KEY, c)
    assert np.max(np.abs(fast - slow)) <= 1e-6
    assert not np.array_equal(fast, s)


def _instance(seed, n=24, k=4, m=5):
    rng = np.random.default_rng(seed)
    cache = random_cache(rng, n, 5)
    s = rng.random(n)
    g = build_sparse_graph(cache, s, SourceSelection(k=k), n)
    return g, s, m


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**20), st.integers(1, 8), st.integers(1, 10))
def test_decay_bounds_and_untouched(seed, k, m):
    g, s, _ = _instance(seed, k=k)
    out = propagate(g, s, cfg(rounds=2, m=m))
    assert np.all(out >= 0) and np.all(out <= s)
    touched = set()
    for a in range(g.k):
        touched.update(neighborhood(g, a, m).tolist())
    for j in set(range(g.n)) - touched:
        assert out[j] == s[j]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**20), st.sampled_from([SignalKind.DECAY, SignalKind.ENHANCED]))
def test_power_law_rounds(seed, signal):
    g, s, m = _instance(seed)
    three = propagate(g, s, cfg(rounds=3, m=m, signal=signal))
    once = s
    for _ in range(3):
        once = propagate(g, once, cfg(rounds=1, m=m, signal=signal))
    assert three.tobytes() == once.tobytes()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**20))
def test_evicted_marks_exactly_neighborhoods(seed):
    g, s, m = _instance(seed)
    out = propagate(g, s, cfg(rounds=1, m=m, signal=SignalKind.EVICTED))
    hood = set()
    for a in range(g.k):
        hood.update(neighborhood(g, a, m).tolist())
    for j in range(g.n):
        assert (out[j] == -np.inf) == (j in hood)
        if j not in hood:
            assert out[j] == s[j]

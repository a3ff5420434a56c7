import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_cache
from graphkv.eviction import EvictionPolicy, Refinement, evict, gather, select_topk
from graphkv.graph import SimilarityKind, SourceSelection
from graphkv.kv_model import LayerCache
from graphkv.oracle import dense_reference_refine
from graphkv.propagation import FixedNeighbors, PropagationConfig, SignalKind
from graphkv.scorers import ScorerKind, WindowConfig


def test_select_topk():
    np.testing.assert_array_equal(select_topk([3, 1, 2], 2), [0, 2])
    np.testing.assert_array_equal(select_topk([1, 1, 1], 2), [0, 1])
    assert select_topk([5, 4], 0).tolist() == []
    np.testing.assert_array_equal(select_topk([-np.inf, 1, -np.inf], 2), [0, 1])
    with pytest.raises(ValueError):
        select_topk([1, 2], 3)


def test_gather():
    rng = np.random.default_rng(11)
    cache = random_cache(rng, 8, 3)
    k, v = gather(cache, range(8))
    assert k.tobytes() == cache.keys.tobytes() and v.tobytes() == cache.values.tobytes()
    k, v = gather(cache, [])
    assert k.shape == (0, 3) and v.shape == (0, 3)
    k, v = gather(cache, [2, 5])
    assert k[0].tobytes() == cache.keys[2].tobytes() and k[1].tobytes() == cache.keys[5].tobytes()
    assert v[1].tobytes() == cache.values[5].tobytes()
    with pytest.raises(ValueError):
        gather(cache, [8])


def _cumulative(refinement=None, window=0):
    return EvictionPolicy(ScorerKind.CUMULATIVE_ATTENTION, refinement=refinement, protected_window=window)


def test_full_budget_noop():
    cache = random_cache(np.random.default_rng(2), 4, 3)
    r = evict(cache, 4, _cumulative())
    np.testing.assert_array_equal(r.kept_indices, [0, 1, 2, 3])
    assert r.keys_sub.tobytes() == cache.keys.tobytes()


def test_three_token_worked_example(monkeypatch):
    keys = np.array([[1, 0], [1, 0], [0, 1]], dtype=np.float32)
    cache = LayerCache(keys, keys)
    scores = np.array([1.0, 0.8, 0.2])
    refinement = Refinement(SourceSelection(k=1), SimilarityKind.KEY_KEY,
                            PropagationConfig(1, FixedNeighbors(1), SignalKind.DECAY))
    monkeypatch.setattr("graphkv.eviction.base_scores", lambda c, p: scores)
    graph = evict(cache, 2, EvictionPolicy(ScorerKind.KNORM, refinement=refinement))
    base = evict(cache, 2, EvictionPolicy(ScorerKind.KNORM))
    np.testing.assert_array_equal(graph.refined_scores, [1.0, 0.0, 0.2])
    np.testing.assert_array_equal(graph.kept_indices, [0, 2])
    np.testing.assert_array_equal(base.kept_indices, [0, 1])
    oracle = dense_reference_refine(cache, scores, refinement.selection, 2, refinement.kind,
                                    refinement.propagation)
    np.testing.assert_array_equal(np.sort(np.argsort(-oracle, kind="stable")[:2]), [0, 2])


def test_window_always_kept_and_untouched():
    rng = np.random.default_rng(9)
    cache = random_cache(rng, 30, 4)
    refinement = Refinement(SourceSelection(k=3), propagation=PropagationConfig(2, FixedNeighbors(30)))
    r = evict(cache, 10, _cumulative(refinement, window=4))
    assert set(range(26, 30)) <= set(r.kept_indices.tolist())
    np.testing.assert_array_equal(r.refined_scores[26:], r.base_scores[26:])
    assert np.any(r.refined_scores[:26] != r.base_scores[:26])


def test_budget_errors():
    cache = random_cache(np.random.default_rng(0), 5, 2)
    with pytest.raises(ValueError):
        evict(cache, 6, _cumulative())
    with pytest.raises(ValueError):
        evict(cache, 2, _cumulative(window=3))


def test_knorm_needs_no_queries_but_attention_does():
    keys = np.random.default_rng(0).standard_normal((5, 3))
    cache = LayerCache(keys, keys)
    assert evict(cache, 2, EvictionPolicy(ScorerKind.KNORM)).kept_indices.shape == (2,)
    with pytest.raises(ValueError):
        evict(cache, 2, _cumulative())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**20), st.integers(2, 30), st.data())
def test_budget_contract(seed, n, data):
    rng = np.random.default_rng(seed)
    cache = random_cache(rng, n, 4)
    budget = data.draw(st.integers(0, n))
    window = data.draw(st.integers(0, budget))
    signal = data.draw(st.sampled_from(list(SignalKind)))
    refinement = Refinement(SourceSelection(ratio=0.5), propagation=PropagationConfig(1, FixedNeighbors(3), signal))
    r = evict(cache, budget, _cumulative(refinement, window))
    assert r.kept_indices.shape[0] == budget
    assert np.all(np.diff(r.kept_indices) > 0)
    assert set(range(n - window, n)) <= set(r.kept_indices.tolist())
    for row, idx in enumerate(r.kept_indices):
        assert r.keys_sub[row].tobytes() == cache.keys[idx].tobytes()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**20), st.floats(0.1, 10), st.floats(-5, 5))
def test_affine_invariance_of_baseline(seed, a, b):
    rng = np.random.default_rng(seed)
    s = rng.random(20)
    np.testing.assert_array_equal(select_topk(s, 7), select_topk(a * s + b, 7))


def test_t0_equals_baseline():
    rng = np.random.default_rng(4)
    cache = random_cache(rng, 40, 6)
    policy = EvictionPolicy(ScorerKind.WINDOW_ATTENTION, WindowConfig(8),
                            refinement=Refinement(propagation=PropagationConfig(0)), protected_window=3)
    np.testing.assert_array_equal(evict(cache, 12, policy).kept_indices,
                                  evict(cache, 12, policy.baseline()).kept_indices)

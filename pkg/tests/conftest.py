import numpy as np
import pytest

from graphkv.kv_model import LayerCache

_ACCEPTANCE = []


@pytest.fixture
def report():
    """Record one acceptance line; printed in the terminal summary."""

    def _report(name, passed, detail=""):
        _ACCEPTANCE.append((name, bool(passed), detail))
        return passed

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name}  {detail}")


def random_cache(rng, n, d, aligned_queries=True):
    keys = rng.standard_normal((n, d)).astype(np.float32)
    values = rng.standard_normal((n, d)).astype(np.float32)
    queries = rng.standard_normal((n if aligned_queries else 4, d)).astype(np.float32)
    return LayerCache(keys, values, queries)


@pytest.fixture
def three_token_cache():
    keys = np.array([[1, 0], [1, 0], [0, 1]], dtype=np.float32)
    return LayerCache(keys, keys.copy())

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from poppath import _kernels_py, kernels

try:
    from poppath import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def flatten(trajs):
    flat = np.array([p for t in trajs for p in t], dtype=np.int64)
    offsets = np.zeros(len(trajs) + 1, dtype=np.int64)
    offsets[1:] = np.cumsum([len(t) for t in trajs])
    return flat, offsets


trajs_st = st.lists(st.lists(st.integers(0, 7), min_size=1, max_size=10), min_size=1, max_size=15)


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


def test_precedence_small():
    flat, offsets = flatten([[0, 2, 1], [1, 0]])
    m = _kernels_py.precedence_matrix(flat, offsets, 3)
    expect = np.zeros((3, 3), dtype=np.uint8)
    for a, b in [(0, 2), (0, 1), (2, 1), (1, 0)]:
        expect[a, b] = 1
    assert (m == expect).all()


@needs_ext
@settings(max_examples=200, deadline=None)
@given(trajs_st, st.integers(0, 7), st.integers(0, 7))
def test_compiled_matches_python(trajs, s, d):
    flat, offsets = flatten(trajs)
    assert compiled.find_windows(flat, offsets, s, d) == _kernels_py.find_windows(flat, offsets, s, d)
    assert (compiled.precedence_matrix(flat, offsets, 8) == _kernels_py.precedence_matrix(flat, offsets, 8)).all()
    seg_c, poi_c = compiled.pair_counts(flat, offsets, 8)
    seg_p, poi_p = _kernels_py.pair_counts(flat, offsets, 8)
    assert (seg_c == seg_p).all() and (poi_c == poi_p).all()


@settings(max_examples=200, deadline=None)
@given(trajs_st)
def test_precedence_brute_force(trajs):
    flat, offsets = flatten(trajs)
    m = kernels.precedence_matrix(flat, offsets, 8)
    for a in range(8):
        for b in range(8):
            want = a != b and any(a in t and b in t[t.index(a) + 1:] for t in trajs)
            assert bool(m[a, b]) == want

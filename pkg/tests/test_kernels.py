"""The compiled loop kernels and their numpy twins must agree exactly."""
from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pathoed import _accel, kernels


@pytest.fixture(params=[True, False], ids=["loop", "numpy"])
def backend(request, monkeypatch):
    monkeypatch.setattr(_accel, "USE_NUMBA", request.param)
    return request.param


pts = arrays(np.float64, st.tuples(st.integers(1, 30), st.just(2)),
             elements=st.floats(-0.2, 1.2, allow_nan=False))


@given(pts, st.integers(2, 9))
def test_locate_backends_agree(points, n_side):
    a = kernels._locate_loop(np.ascontiguousarray(points), n_side)
    b = kernels._locate_numpy(points, n_side)
    for u, v in zip(a[:3], b[:3]):
        np.testing.assert_array_equal(u, v)
    assert a[3] == b[3]


@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(0, 1)), st.integers(0, 12))
def test_bernstein_backends_agree(s, degree):
    a = kernels._bernstein_loop(s, degree)
    b = kernels._bernstein_numpy(s, degree)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-15)


@given(arrays(np.float64, st.integers(1, 20), elements=st.floats(0, 1)),
       arrays(np.float64, st.tuples(st.integers(1, 8), st.just(2)), elements=st.floats(-2, 2)))
def test_casteljau_backends_agree(s, ctrl):
    a = kernels._casteljau_loop(s, ctrl)
    b = kernels._casteljau_numpy(s, ctrl)
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-14)


def test_bernstein_matches_binomial_formula(backend):
    s = np.linspace(0, 1, 11)
    B = kernels.bernstein(s, 6)
    ref = np.array([[comb(6, j) * u ** j * (1 - u) ** (6 - j) for j in range(7)] for u in s])
    np.testing.assert_allclose(B, ref, atol=1e-15)
    np.testing.assert_allclose(B.sum(axis=1), 1.0, atol=1e-15)


def test_locate_counts_clamped(backend):
    nodes, w, g, clamped = kernels.locate_p1(np.array([[0.5, 0.5], [1.2, 0.3], [-0.1, -0.1]]), 4)
    assert clamped == 2
    np.testing.assert_allclose(w.sum(axis=1), 1.0)


def test_casteljau_endpoints(backend):
    ctrl = np.array([[0.1, 0.2], [0.9, 0.4], [0.3, 0.8]])
    r = kernels.de_casteljau(np.array([0.0, 1.0]), ctrl)
    np.testing.assert_allclose(r, ctrl[[0, -1]], atol=1e-15)


def test_env_flag_documented():
    assert isinstance(_accel.USE_NUMBA, bool)
    assert _accel.USE_NUMBA == _accel.HAVE_NUMBA

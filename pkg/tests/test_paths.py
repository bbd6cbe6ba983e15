import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import central_fd
from oracle import bezier_point, fourier_point
from pathoed.paths import (BezierPath, FourierPath, accel_penalty, box_constraint_bounds,
                           disk_constraint_radius, eval_path, hull_box_bounds, path_jacobian,
                           spectral_norm_Tf)

W = (0.2, 0.4)


def test_bezier_endpoints():
    path = BezierPath(4, W)
    xi = np.random.default_rng(0).uniform(size=10)
    ctrl = path.control_points(xi)
    np.testing.assert_allclose(eval_path(path, [0.2, 0.4], xi), ctrl[[0, -1]], atol=1e-15)


def test_degree_one_midpoint():
    path = BezierPath(1, W)
    xi = np.array([0.1, 0.2, 0.5, 0.9])
    np.testing.assert_allclose(eval_path(path, [0.3], xi)[0], [0.3, 0.55])


def test_fourier_zero_design():
    path = FourierPath(3, (0.25, 1.0), center=(0.4, 0.6))
    np.testing.assert_allclose(eval_path(path, np.linspace(0.25, 1, 9), np.zeros(12)), [[0.4, 0.6]] * 9)


@given(st.integers(1, 7), st.sampled_from(["free", "fixed", "closed"]), st.integers(0, 1000))
def test_bezier_matches_binomial_oracle_and_affine_form(degree, mode, seed):
    if mode != "free" and degree < 2:
        degree = 2
    path = BezierPath(degree, W, mode, (0.1, 0.2), (0.9, 0.7))
    rng = np.random.default_rng(seed)
    xi = rng.uniform(size=path.n_design)
    t = rng.uniform(*W, size=6)
    ref = np.array([bezier_point(path.control_points(xi), (s - W[0]) / 0.2) for s in t])
    np.testing.assert_allclose(eval_path(path, t, xi), ref, atol=1e-13)
    affine = path.offset(t) + path.basis(t) @ xi
    np.testing.assert_allclose(affine, ref, atol=1e-13)


def test_fourier_matches_oracle():
    path = FourierPath(3, (0.25, 1.0))
    xi = np.random.default_rng(1).normal(scale=0.05, size=12)
    t = np.linspace(0.25, 1.0, 13)
    ref = np.array([fourier_point((0.5, 0.5), 3, 0.75, xi, s) for s in t])
    np.testing.assert_allclose(eval_path(path, t, xi), ref, atol=1e-14)


def test_window_enforced():
    path = BezierPath(2, W)
    with pytest.raises(ValueError):
        eval_path(path, [0.5], np.zeros(6))
    r = eval_path(path, [0.5], np.arange(6.0), clamp=True)
    np.testing.assert_allclose(r, eval_path(path, [0.4], np.arange(6.0)))


@pytest.mark.parametrize("path", [BezierPath(5, W, "fixed", (0.8, 0.2), (0.2, 0.8)),
                                  BezierPath(5, W, "closed", (0.8, 0.2)),
                                  FourierPath(3, W)], ids=["fixed", "closed", "fourier"])
def test_jacobian_finite_difference(path):
    rng = np.random.default_rng(2)
    xi = rng.uniform(0.1, 0.9, path.n_design) * (0.1 if path.family == "fourier" else 1)
    t = rng.uniform(*W, size=5)
    J = path_jacobian(path, t, xi)
    for k in range(5):
        for c in range(2):
            fd = central_fd(lambda x: eval_path(path, t[k:k + 1], x)[0, c], xi, 1e-5)
            np.testing.assert_allclose(J[k, c], fd, rtol=1e-7, atol=1e-9)


def test_fourier_jacobian_independent_of_design():
    path = FourierPath(2, W)
    t = np.linspace(*W, 5)
    np.testing.assert_array_equal(path_jacobian(path, t, np.zeros(8)), path_jacobian(path, t, np.ones(8)))


def test_pinned_points_not_in_design():
    path = BezierPath(5, W, "fixed", (0.8, 0.2), (0.2, 0.8))
    assert path.n_design == 8
    assert BezierPath(5, W, "closed", (0.8, 0.2)).n_design == 8
    assert BezierPath(5, W).n_design == 12
    np.testing.assert_array_equal(path.basis(np.array([0.2]))[0], 0)  # all weight on p_0


@pytest.mark.parametrize("nf,expected", [(1, 1.0), (3, np.sqrt(3)), (4, 2.0), (5, np.sqrt(5)), (10, np.sqrt(10))])
def test_spectral_norm(nf, expected):
    path = FourierPath(nf, (0.25, 1.0))
    assert spectral_norm_Tf(path) == pytest.approx(expected, abs=1e-15)
    t = np.random.default_rng(nf).uniform(0.25, 1.0, 10)
    np.testing.assert_allclose(spectral_norm_Tf(path, t, numeric=True), expected, atol=1e-12)


def test_disk_radius():
    assert disk_constraint_radius(FourierPath(1, W), 0.3) == pytest.approx(0.3)
    with pytest.raises(ValueError):
        disk_constraint_radius(FourierPath(1, W), -1)


@pytest.mark.parametrize("nf", [1, 3, 5, 10])
def test_disk_containment(nf):
    path = FourierPath(nf, (0.25, 1.0))
    R = 0.45
    bound = disk_constraint_radius(path, R)
    rng = np.random.default_rng(nf)
    t = np.linspace(0.25, 1.0, 10_000)
    for _ in range(5):
        xi = rng.standard_normal(path.n_design)
        xi *= bound / np.linalg.norm(xi)
        assert np.linalg.norm(eval_path(path, t, xi) - 0.5, axis=1).max() <= R + 1e-10
    xi = np.zeros(path.n_design)
    xi[0] = bound
    dist = np.linalg.norm(eval_path(path, t, xi) - 0.5, axis=1).max()
    assert dist == pytest.approx(R / np.sqrt(nf), rel=1e-6)


def test_box_bounds():
    lo, hi = box_constraint_bounds(FourierPath(1, W), (0.4, 0.4))
    np.testing.assert_allclose(hi, 0.2)
    np.testing.assert_allclose(lo, -0.2)
    _, hi = box_constraint_bounds(FourierPath(2, W), (0.4, 0.2))
    np.testing.assert_allclose(hi, [0.1, 0.1, 0.05, 0.05] * 2)
    with pytest.raises(ValueError):
        box_constraint_bounds(FourierPath(1, W), (0.6, 0.4))


def test_box_containment():
    path = FourierPath(3, (0.25, 1.0))
    lo, hi = box_constraint_bounds(path, (0.4, 0.3))
    t = np.linspace(0.25, 1.0, 10_000)
    rng = np.random.default_rng(0)
    for _ in range(10):
        xi = np.where(rng.uniform(size=12) < 0.5, lo, hi)
        r = eval_path(path, t, xi)
        assert np.all(np.abs(r[:, 0] - 0.5) <= 0.4 + 1e-12)
        assert np.all(np.abs(r[:, 1] - 0.5) <= 0.3 + 1e-12)


def test_hull_box_containment():
    path = BezierPath(6, W, "fixed", (0.8, 0.2), (0.2, 0.8))
    lo, hi = hull_box_bounds(path)
    rng = np.random.default_rng(0)
    t = np.linspace(*W, 2000)
    for _ in range(20):
        r = eval_path(path, t, rng.uniform(lo, hi))
        assert r.min() >= 0 and r.max() <= 1


def test_penalty_zero_design():
    for path in (FourierPath(2, W), BezierPath(3, W)):
        v, g = accel_penalty(path, np.zeros(path.n_design), 1.0)
        assert v == 0 and not g.any()


def test_penalty_fourier_single_mode_formula():
    path = FourierPath(1, (0.25, 1.0))
    gamma = 3e-7
    xi = np.array([0.1, 0, 0, 0])
    w1 = 2 * np.pi / 0.75
    v, _ = accel_penalty(path, xi, gamma)
    assert v == pytest.approx(gamma * (0.75 / 4) * w1 ** 4 * 0.01, rel=1e-14)


@pytest.mark.parametrize("nf", [1, 3, 5, 10])
def test_penalty_fourier_matches_quadrature(nf):
    path = FourierPath(nf, (0.25, 1.0))
    xi = np.random.default_rng(nf).normal(scale=0.05, size=path.n_design)
    t = np.linspace(0.25, 1.0, 10_000)
    c0, D = path.second_derivative(t)
    acc = np.sum((c0 + D @ xi) ** 2, axis=1)
    quad = 0.5 * np.trapezoid(acc, t) if hasattr(np, "trapezoid") else 0.5 * np.trapz(acc, t)
    v, _ = accel_penalty(path, xi, 1.0)
    assert v == pytest.approx(quad, rel=1e-6)


@pytest.mark.parametrize("path", [FourierPath(2, W), BezierPath(4, W, "fixed", (0.8, 0.2), (0.2, 0.8))],
                         ids=["fourier", "bezier"])
def test_penalty_gradient(path):
    xi = np.random.default_rng(3).uniform(0, 0.3, path.n_design)
    _, g = accel_penalty(path, xi, 2.0)
    fd = central_fd(lambda x: accel_penalty(path, x, 2.0)[0], xi, 1e-6)
    np.testing.assert_allclose(g, fd, rtol=1e-6)


def test_bezier_second_derivative_fd():
    path = BezierPath(4, W, "fixed", (0.8, 0.2), (0.2, 0.8))
    xi = np.random.default_rng(4).uniform(size=6)
    t = np.array([0.27, 0.33])
    c0, D = path.second_derivative(t)
    h = 1e-4
    fd = (eval_path(path, t + h, xi) - 2 * eval_path(path, t, xi) + eval_path(path, t - h, xi)) / h ** 2
    np.testing.assert_allclose(c0 + D @ xi, fd, rtol=1e-5)


def test_invalid_paths():
    with pytest.raises(ValueError):
        BezierPath(3, W, "fixed", (0, 0))
    with pytest.raises(ValueError):
        BezierPath(0, W)
    with pytest.raises(ValueError):
        FourierPath(0, W)
    with pytest.raises(ValueError):
        BezierPath(3, W).control_points(np.zeros(3))
    with pytest.raises(ValueError):
        accel_penalty(FourierPath(1, W), np.zeros(4), -1.0)

import numpy as np
import pytest

from helpers import central_fd, interior_margin, make_problem
from oracle import logistic_weight, point_basis
from pathoed.linops import st_inner
from pathoed.mesh import build_mesh
from pathoed.observation import (ObscuredRegion, ObservationSchedule, adjoint_observe, build_phi,
                                 filter_matrix, mollified_observe, observe, observe_derivative,
                                 rbf_grad, rbf_weight)
from pathoed.paths import BezierPath, FourierPath, eval_path


@pytest.fixture(scope="module")
def small():
    # n_side=4, n_t=8, three measurements
    return make_problem(n_side=4, n_t=8, window=(0.25, 1.0), stride=2)


def test_schedule_counts_reference_windows():
    times = np.arange(1, 401) / 400
    assert ObservationSchedule.from_window(times, (0.2, 0.4), 2).n_y == 40
    times = 2 * np.arange(1, 401) / 400
    assert ObservationSchedule.from_window(times, (0.25, 1.0), 3).n_y == 50


def test_schedule_validation():
    with pytest.raises(ValueError):
        ObservationSchedule(np.array([3, 2]), 5)
    with pytest.raises(ValueError):
        ObservationSchedule(np.array([5]), 5)
    s = ObservationSchedule(np.array([1, 4]), 6).extended([2, 4])
    np.testing.assert_array_equal(s.indices, [1, 2, 4])


def test_phi_constant_path_at_node():
    mesh = build_mesh(5)
    path = BezierPath(1, (0.0, 1.0))
    node = mesh.nodes[12]
    xi = np.concatenate([node, node])
    phi = build_phi(mesh, path, xi, np.linspace(0.1, 1.0, 10))
    P = phi.tosparse().toarray()
    np.testing.assert_allclose(P[12], 1.0)
    assert np.abs(P).sum() == pytest.approx(10.0)


def test_phi_columns_partition_of_unity(small):
    xi = np.random.default_rng(0).uniform(size=small.path.n_design)
    phi = build_phi(small.mesh, small.path, xi, small.model.times)
    P = phi.tosparse().toarray()
    np.testing.assert_allclose(P[:, phi.active].sum(axis=0), 1.0, atol=1e-14)
    assert not P[:, ~phi.active].any()
    for c in np.flatnonzero(phi.active):
        np.testing.assert_allclose(P[:, c], point_basis(4, phi.positions[c]), atol=1e-12)


def test_phi_derivative_fd():
    p = make_problem(n_side=5, n_t=20, window=(0.25, 0.75))
    rng = np.random.default_rng(1)
    t = p.model.times
    for _ in range(50):
        xi = rng.uniform(0.1, 0.9, p.path.n_design)
        act = (t >= 0.25) & (t <= 0.75)
        if interior_margin(5, eval_path(p.path, t[act], xi)) > 1e-3:
            break
    phi = build_phi(p.mesh, p.path, xi, t, derivatives=True)
    D =np.stack([phi.derivative(j).toarray() for j in range(p.path.n_design)], axis=-1)
    for j in range(p.path.n_design):
        e = np.zeros_like(xi)
        e[j] = 1e-7
        fd = (build_phi(p.mesh, p.path, xi + e, t).tosparse().toarray()
              - build_phi(p.mesh, p.path, xi - e, t).tosparse().toarray()) / 2e-7
        np.testing.assert_allclose(D[..., j], fd, rtol=1e-6, atol=1e-6 * np.abs(fd).max())


def test_observe_trivial(small):
    xi = np.random.default_rng(2).uniform(size=small.path.n_design)
    phi = build_phi(small.mesh, small.path, xi, small.model.times)
    assert not observe(phi, small.schedule, np.zeros((16, 8))).any()
    U = np.tile(np.arange(8.0), (16, 1))
    np.testing.assert_allclose(observe(phi, small.schedule, U), small.schedule.indices, atol=1e-13)


def test_observe_linear_field(small):
    xi = np.random.default_rng(3).uniform(size=small.path.n_design)
    phi = build_phi(small.mesh, small.path, xi, small.model.times)
    U = np.zeros((16, 8))
    l = small.schedule.indices[1]
    U[:, l] = small.mesh.nodes.sum(axis=1)
    d = observe(phi, small.schedule, U)
    r = phi.positions[l]
    assert d[1] == pytest.approx(r[0] + r[1], abs=1e-13)
    assert d[0] == 0 and d[2] == 0


def test_observe_derivative_linear_field(small):
    xi = np.random.default_rng(4).uniform(0.1, 0.9, size=small.path.n_design)
    phi = build_phi(small.mesh, small.path, xi, small.model.times, derivatives=True)
    U = np.tile(small.mesh.nodes[:, :1] * 2.0, (1, 8))  # u = 2 x1
    e = observe_derivative(phi, small.schedule, U)
    t = small.model.times[small.schedule.indices]
    J = small.path.basis(t)
    np.testing.assert_allclose(e, 2.0 * J[:, 0, :], atol=1e-12)


def test_adjoint_observe_identity(small):
    rng = np.random.default_rng(5)
    model = small.model
    xi = rng.uniform(size=small.path.n_design)
    phi = build_phi(small.mesh, small.path, xi, model.times)
    assert not adjoint_observe(phi, small.schedule, np.zeros(3), small.prior.solve_mass, model.w).any()
    for _ in range(20):
        U = rng.standard_normal((16, 8))
        y = rng.standard_normal(3)
        lhs = observe(phi, small.schedule, U) @ y
        rhs = st_inner(U, adjoint_observe(phi, small.schedule, y, small.prior.solve_mass, model.w),
                       model.M, model.w)
        assert lhs == pytest.approx(rhs, rel=1e-11)


def test_adjoint_observe_unit_vector(small):
    model = small.model
    xi = np.random.default_rng(6).uniform(size=small.path.n_design)
    phi = build_phi(small.mesh, small.path, xi, model.times)
    V = adjoint_observe(phi, small.schedule, np.array([0.0, 1.0, 0.0]), small.prior.solve_mass, model.w)
    l = small.schedule.indices[1]
    assert np.flatnonzero(np.abs(V).sum(axis=0)).tolist() == [l]
    ref = np.linalg.solve(model.M.toarray(), point_basis(4, phi.positions[l])) / model.w[l]
    np.testing.assert_allclose(V[:, l], ref, rtol=1e-12)


def _smooth_problem():
    mesh = build_mesh(81)
    times = np.linspace(0.0, 1.0, 401)
    f = lambda x, t: np.exp(-((x[:, 0] - 0.45) ** 2 + (x[:, 1] - 0.55) ** 2) / 0.08) * (1 + 0.5 * np.sin(3 * t))
    U = np.stack([f(mesh.nodes, t) for t in times], axis=1)
    path = FourierPath(1, (0.3, 0.7))
    xi = np.array([0.1, 0.05, -0.05, 0.1])
    return mesh, times, U, path, xi


def test_mollified_converges_monotonically():
    mesh, times, U, path, xi = _smooth_problem()
    tk = np.array([0.4, 0.5, 0.6])
    phi = build_phi(mesh, path, xi, times)
    cols = [int(np.argmin(np.abs(times - s))) for s in tk]
    point = np.array([phi.weights[c] @ U[phi.nodes[c], c] for c in cols])
    errs = []
    for level in range(5):
        eps = 0.08 / 2 ** level
        m = mollified_observe(mesh, U, times, path, xi, eps, eps / 2, tk)
        errs.append(np.abs(m - point).max())
    assert all(b < a for a, b in zip(errs, errs[1:])), errs


def test_mollified_constant_and_linear():
    mesh = build_mesh(9)
    times = np.linspace(0, 1, 21)
    path = BezierPath(2, (0.2, 0.8))
    xi = np.array([0.3, 0.3, 0.5, 0.7, 0.7, 0.4])
    U = np.full((81, 21), 3.2)
    np.testing.assert_allclose(mollified_observe(mesh, U, times, path, xi, 0.05, 0.05, [0.5]), 3.2)
    V = np.random.default_rng(0).standard_normal((81, 21))
    a = mollified_observe(mesh, 2 * U + V, times, path, xi, 0.1, 0.1, [0.4, 0.6])
    b = 2 * mollified_observe(mesh, U, times, path, xi, 0.1, 0.1, [0.4, 0.6]) + \
        mollified_observe(mesh, V, times, path, xi, 0.1, 0.1, [0.4, 0.6])
    np.testing.assert_allclose(a, b, rtol=1e-12)
    with pytest.raises(ValueError):
        mollified_observe(mesh, U, times, path, xi, 0.0, 0.1, [0.5])


REGION = ObscuredRegion((0.5, 0.5), 0.16, 0.01)


def test_rbf_values():
    assert rbf_weight(REGION, [0.66, 0.5])[0] == pytest.approx(0.5)
    assert rbf_weight(REGION, [0.5, 0.5])[0] > 0.999
    assert rbf_weight(REGION, [0.82, 0.5])[0] < 0.001
    x = np.array([[0.3, 0.45], [0.6, 0.7]])
    ref = [logistic_weight(REGION.center, 0.16, 0.01, p) for p in x]
    np.testing.assert_allclose(rbf_weight(REGION, x), ref, rtol=1e-14)
    far = rbf_weight(ObscuredRegion((0.5, 0.5), 0.1, 1e-3), [[50.0, 50.0]])
    assert np.isfinite(far).all() and far[0] == 0.0


def test_rbf_grad_fd():
    region = ObscuredRegion((0.5, 0.5), 0.16, 0.05)
    rng = np.random.default_rng(7)
    for x in rng.uniform(0.2, 0.8, size=(10, 2)):
        g = rbf_grad(region, x)[0]
        fd = central_fd(lambda z: rbf_weight(region, z)[0], x, 1e-6)
        np.testing.assert_allclose(g, fd, rtol=1e-7, atol=1e-10)
    assert not rbf_grad(region, [0.5, 0.5]).any()


def test_filter_far_and_through_center():
    region = ObscuredRegion((0.5, 0.5), 0.1, 1e-3)
    p = make_problem(n_side=4, n_t=20, window=(0.25, 0.75), degree=1)
    far = np.array([0.05, 0.05, 0.1, 0.95])
    w, _ = filter_matrix(region, p.path, far, p.model.times, p.schedule)
    assert np.all(w < 1e-6)
    through = np.array([0.2, 0.2, 0.8, 0.8])
    w, _ = filter_matrix(region, p.path, through, p.model.times, p.schedule)
    assert w.max() > 0.999


def test_filter_derivative_fd():
    region = ObscuredRegion((0.5, 0.5), 0.2, 0.05)
    p = make_problem(n_side=4, n_t=20, window=(0.25, 0.75), degree=3)
    xi = np.random.default_rng(8).uniform(0.2, 0.8, p.path.n_design)
    _, dp = filter_matrix(region, p.path, xi, p.model.times, p.schedule)
    for j in range(p.path.n_design):
        e = np.zeros_like(xi)
        e[j] = 1e-6
        fd = (filter_matrix(region, p.path, xi + e, p.model.times, p.schedule)[0]
              - filter_matrix(region, p.path, xi - e, p.model.times, p.schedule)[0]) / 2e-6
        np.testing.assert_allclose(dp[:, j], fd, rtol=1e-6, atol=1e-9)

"""Pointwise observation of snapshots along a sensor path, its adjoint and
design derivative, the obscured-region filter and a mollified validator."""
from dataclasses import dataclass

import numpy as np

from .paths import eval_path, path_jacobian

_GRID_TOL = 1e-9


@dataclass(frozen=True)
class ObservationSchedule:
    """Measurement columns of the snapshot matrix.

    ``indices`` are 0-based snapshot columns (column ``c`` holds the state at
    ``t_{c+1}``), strictly increasing.
    """

    indices: np.ndarray
    n_t: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        if len(idx) and (idx[0] < 0 or idx[-1] >= self.n_t or np.any(np.diff(idx) <= 0)):
            raise ValueError("measurement indices must be strictly increasing within the grid")
        object.__setattr__(self, "indices", idx)

    @property
    def n_y(self):
        return len(self.indices)

    @classmethod
    def from_window(cls, times, window, stride=1):
        """Every ``stride``-th grid time in the half-open window ``[t_a, t_b)``,
        starting at the first grid time not before ``t_a``."""
        times = np.asarray(times, dtype=float)
        if stride < 1:
            raise ValueError("stride must be >= 1")
        dt = times[1] - times[0] if len(times) > 1 else 1.0
        ta, tb = window
        inside = np.flatnonzero((times >= ta - _GRID_TOL * dt) & (times < tb - _GRID_TOL * dt))
        return cls(inside[::stride], len(times))

    def extended(self, extra):
        """Schedule with the additional columns ``extra`` merged in."""
        return ObservationSchedule(np.union1d(self.indices, extra), self.n_t)


@dataclass
class PhiMatrix:
    """Sparse ``n_x x n_t`` point-evaluation matrix stored column-wise.

    Column ``c`` is nonzero only on ``nodes[c]`` with values ``weights[c]``;
    columns outside the inversion window are zero. ``dweights[c, a, j]`` is
    the derivative of ``weights[c, a]`` with respect to ``xi_j``.
    """

    n_x: int
    nodes: np.ndarray
    weights: np.ndarray
    positions: np.ndarray
    active: np.ndarray
    dweights: np.ndarray = None
    clamped: int = 0

    @property
    def n_t(self):
        return len(self.nodes)

    def tosparse(self):
        import scipy.sparse as sp
        cols = np.repeat(np.arange(self.n_t), 3)
        return sp.csc_matrix((self.weights.ravel(), (self.nodes.ravel(), cols)),
                             shape=(self.n_x, self.n_t))

    def derivative(self, j):
        import scipy.sparse as sp
        cols = np.repeat(np.arange(self.n_t), 3)
        return sp.csc_matrix((self.dweights[:, :, j].ravel(), (self.nodes.ravel(), cols)),
                             shape=(self.n_x, self.n_t))


def build_phi(mesh, path, xi, times, derivatives=False):
    """Point-evaluation matrix of ``path`` on the snapshot time grid."""
    times = np.asarray(times, dtype=float)
    ta, tb = path.window
    active = (times >= ta - 1e-12) & (times <= tb + 1e-12)
    n_t = len(times)
    nodes = np.zeros((n_t, 3), dtype=np.int64)
    weights = np.zeros((n_t, 3))
    positions = np.full((n_t, 2), np.nan)
    dweights = np.zeros((n_t, 3, path.n_design)) if derivatives else None
    clamped = 0
    if active.any():
        t = times[active]
        r = eval_path(path, t, xi)
        nd, wt, gr, clamped = mesh.locate(r)
        nodes[active], weights[active], positions[active] = nd, wt, r
        if derivatives:
            J = path_jacobian(path, t, xi)
            dweights[active] = np.einsum("kad,kdj->kaj", gr, J)
    return PhiMatrix(mesh.n_nodes, nodes, weights, positions, active, dweights, clamped)


def observe(phi, schedule, U):
    """``(B U)_k = phi_{l_k}^T u_{l_k}``; ``U`` may carry trailing batch axes."""
    idx = schedule.indices
    vals = U[phi.nodes[idx], idx[:, None]]
    w = phi.weights[idx]
    return np.einsum("ka,ka...->k...", w, vals)


def observe_derivative(phi, schedule, U):
    """``e[k, j] = (d phi_{l_k} / d xi_j)^T u_{l_k}``."""
    idx = schedule.indices
    vals = U[phi.nodes[idx], idx[:, None]]
    return np.einsum("kaj,ka->kj", phi.dweights[idx], vals)


def observation_loads(phi, schedule):
    """Dense ``n_x x n_y`` matrix whose column ``k`` is ``phi_{l_k}``."""
    idx = schedule.indices
    L = np.zeros((phi.n_x, len(idx)))
    for a in range(3):
        np.add.at(L, (phi.nodes[idx, a], np.arange(len(idx))), phi.weights[idx, a])
    return L


def adjoint_observe(phi, schedule, y, mass_solve, w):
    """``B^* y``: snapshot whose column ``l_k`` is ``M^-1 phi_{l_k} y_k / w_{l_k}``.

    ``mass_solve`` applies ``M^-1`` to a block of vectors.
    """
    y = np.asarray(y, dtype=float)
    idx = schedule.indices
    V = np.zeros((phi.n_x, schedule.n_t))
    if len(idx) == 0:
        return V
    cols = mass_solve(observation_loads(phi, schedule) * (y / np.asarray(w)[idx]))
    V[:, idx] = cols.reshape(phi.n_x, len(idx))
    return V


def mollified_observe(mesh, U, times, path, xi, eps_x, eps_t, measure_times):
    """Space-time Gaussian average of the discrete field about each sensor
    position.

    Spatial integrals use the lumped mass, time integrals the trapezoid rule
    on ``times``; each mollifier is renormalized to unit discrete mass. The
    path is evaluated at times clamped to its inversion window.
    """
    if eps_x <= 0 or eps_t <= 0:
        raise ValueError("mollifier widths must be positive")
    times = np.asarray(times, dtype=float)
    measure_times = np.atleast_1d(np.asarray(measure_times, dtype=float))
    lumped = mesh.lumped_mass()
    qt = np.zeros(len(times))
    dts = np.diff(times)
    qt[:-1] += 0.5 * dts
    qt[1:] += 0.5 * dts
    rt = eval_path(path, times, xi, clamp=True)
    d2 = np.sum((mesh.nodes[:, None, :] - rt[None, :, :]) ** 2, axis=2)
    out = np.empty(len(measure_times))
    for k, tk in enumerate(measure_times):
        tau = np.exp(-0.5 * ((times - tk) / eps_t) ** 2) * qt
        kern = np.exp(-0.5 * d2 / eps_x ** 2) * lumped[:, None] * tau[None, :]
        out[k] = np.sum(kern * U) / np.sum(kern)
    return out


@dataclass(frozen=True)
class ObscuredRegion:
    """Logistic radial weight ``p(x) = 1 / (1 + exp((|x - x_D| - R_D) / beta))``."""

    center: tuple
    radius: float
    beta: float

    def __post_init__(self):
        if self.radius <= 0 or self.beta <= 0:
            raise ValueError("obscured region needs positive radius and beta")


def _logistic(z):
    # numerically safe 1 / (1 + exp(z)) and its derivative
    z = np.asarray(z, dtype=float)
    e = np.exp(-np.abs(z))
    p = np.where(z > 0, e / (1.0 + e), 1.0 / (1.0 + e))
    dp = -e / (1.0 + e) ** 2
    return p, dp


def rbf_weight(region, x):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    dist = np.linalg.norm(x - np.asarray(region.center), axis=1)
    p, _ = _logistic((dist - region.radius) / region.beta)
    return p


def rbf_grad(region, x):
    """Gradient of :func:`rbf_weight`; zero at the center by symmetry."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    diff = x - np.asarray(region.center)
    dist = np.linalg.norm(diff, axis=1)
    _, dp = _logistic((dist - region.radius) / region.beta)
    safe = np.where(dist > 0, dist, 1.0)
    g = (dp / region.beta / safe)[:, None] * diff
    g[dist == 0] = 0.0
    return g


def filter_matrix(region, path, xi, times, schedule):
    """Filter weights ``p_k`` at the measurement points and ``dp[k, j]``."""
    t = np.asarray(times, dtype=float)[schedule.indices]
    if len(t) == 0:
        return np.zeros(0), np.zeros((0, path.n_design))
    r = eval_path(path, t, xi)
    J = path_jacobian(path, t, xi)
    return rbf_weight(region, r), np.einsum("kd,kdj->kj", rbf_grad(region, r), J)

"""Low-rank Gaussian posterior for a path design, the goal-oriented
c-optimal criterion with its adjoint gradient, and posterior diagnostics."""
from dataclasses import dataclass, field

import numpy as np

from .linops import lanczos_m
from .observation import (ObservationSchedule, build_phi, filter_matrix, observation_loads,
                          observe, observe_derivative)
from .paths import accel_penalty

HESSIAN_MODES = ("assembled", "tabulated", "matrix-free")


@dataclass
class ProblemSetup:
    """Everything that stays fixed while the design ``xi`` varies.

    ``region`` switches on the obscured-region filter. ``rank`` and
    ``lanczos_iter`` default to ``n_y`` and ``n_y + 10``. ``hessian`` picks
    how the parameter-to-observable map is applied, see
    :class:`DesignOperators`.
    """

    prior: object
    model: object
    path: object
    schedule: ObservationSchedule
    sigma2: float
    region: object = None
    gamma: float = 0.0
    rank: int = None
    lanczos_iter: int = None
    hessian: str = "assembled"
    lanczos_seed: int = 0
    lanczos_tol: float = 1e-8
    _table: np.ndarray = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.sigma2 <= 0:
            raise ValueError("noise variance must be positive")
        if self.hessian not in HESSIAN_MODES:
            raise ValueError(f"hessian must be one of {HESSIAN_MODES}")
        if self.rank is not None and self.rank > self.schedule.n_y:
            raise ValueError("rank cannot exceed the number of measurements")
        if self.schedule.n_t != self.model.n_t:
            raise ValueError("schedule and forward model use different time grids")

    @property
    def mesh(self):
        return self.model.mesh

    def response_table(self):
        """Point-load adjoint responses for the schedule, built on first use."""
        if self._table is None:
            self._table = self.model.point_response_table(self.schedule.indices)
        return self._table

    @property
    def M(self):
        return self.model.M

    @property
    def n_y(self):
        return self.schedule.n_y

    @property
    def r(self):
        return self.n_y if self.rank is None else self.rank

    @property
    def k(self):
        k = self.r + 10 if self.lanczos_iter is None else self.lanczos_iter
        return min(max(k, self.r), self.mesh.n_nodes)


class GoalFunctional:
    """Space-time average ``Z(m) = <<V, S m>>_M`` with ``V = v_x v_t^T``.

    ``v_x`` indicates the nodes in the closed box ``box = ((x0, x1), (y0, y1))``
    and ``v_t`` the grid times in the closed interval ``window``.
    """

    def __init__(self, model, box, window):
        self.model = model
        (x0, x1), (y0, y1) = box
        nodes = model.mesh.nodes
        tol = 1e-12
        self.v_x = ((nodes[:, 0] >= x0 - tol) & (nodes[:, 0] <= x1 + tol)
                    & (nodes[:, 1] >= y0 - tol) & (nodes[:, 1] <= y1 + tol)).astype(float)
        self.v_t = ((model.times >= window[0] - tol) & (model.times <= window[1] + tol)).astype(float)
        self.box, self.window = box, window
        self.c = self._adjoint()

    @property
    def V(self):
        return np.outer(self.v_x, self.v_t)

    def _adjoint(self):
        model = self.model
        active = np.flatnonzero(self.v_t)
        if len(active) == 0 or not self.v_x.any():
            return np.zeros(model.n_x)
        Mv = model.M @ self.v_x

        def loads(ell):
            return model.w[ell - 1] * Mv if self.v_t[ell - 1] else None

        return model.adjoint_sweep(loads, active[-1] + 1)

    def __call__(self, m):
        return float(self.c @ (self.model.M @ m))


def data_weights(setup, xi, mode):
    """Diagonal noise weighting ``W`` and its design derivative.

    ``mode`` is ``"soft"`` (``W = 1 - p``, used for design), ``"hard"``
    (measurements with ``p_k > 1/2`` dropped, used for inversion) or
    ``"none"``. Without an obscured region all modes give ``W = 1``.
    """
    n_y = setup.n_y
    N = setup.path.n_design
    if setup.region is None or mode == "none":
        return np.ones(n_y), np.zeros((n_y, N))
    p, dp = filter_matrix(setup.region, setup.path, xi, setup.model.times, setup.schedule)
    if mode == "soft":
        return 1.0 - p, -dp
    if mode == "hard":
        return (p <= 0.5).astype(float), np.zeros((n_y, N))
    raise ValueError(f"unknown weighting mode {mode!r}")


class DesignOperators:
    """Parameter-to-observable map ``F = B S`` at one design.

    ``"assembled"`` forms ``F`` as an ``n_y x n_x`` matrix with one blocked
    adjoint sweep; ``"tabulated"`` gathers its rows from
    :meth:`ProblemSetup.response_table` without any PDE solve; in
    ``"matrix-free"`` mode each application costs a forward or adjoint PDE
    solve.
    """

    def __init__(self, setup, xi, weighting="soft", derivatives=False):
        self.setup = setup
        self.xi = np.asarray(xi, dtype=float)
        model = setup.model
        self.phi = build_phi(setup.mesh, setup.path, self.xi, model.times, derivatives=derivatives)
        self.W, self.dW = data_weights(setup, self.xi, weighting)
        idx = setup.schedule.indices
        self._loads = observation_loads(self.phi, setup.schedule)
        self._last = idx[-1] + 1 if len(idx) else 0
        self._col = {int(c) + 1: k for k, c in enumerate(idx)}
        self.F = None
        self._Lt = None
        self._rows = None
        if not len(idx):
            return
        if setup.hessian == "tabulated":
            E = setup.response_table()
            # (n_y, 3, n_x): rows of F contributed by each active node
            self._rows = E[np.arange(len(idx))[:, None], self.phi.nodes[idx]]
            self.F = np.einsum("ka,kan->kn", self.phi.weights[idx], self._rows)
        elif setup.hessian == "assembled":
            R = self._sweep(np.eye(len(idx)))
            self.F = np.asarray((setup.M @ R).T)
        if self.F is not None:
            self._Lt = setup.prior.solve_operator(np.ascontiguousarray(self.F.T))

    def data_and_derivative(self, m):
        """``d = F m`` and ``e[k, j] = (dF/dxi_j m)_k``."""
        idx = self.setup.schedule.indices
        if self._rows is not None:
            Em = self._rows @ m
            return (np.einsum("ka,ka->k", self.phi.weights[idx], Em),
                    np.einsum("kaj,ka->kj", self.phi.dweights[idx], Em))
        U = self.setup.model.solve_forward(m, n_steps=self._last)
        return observe(self.phi, self.setup.schedule, U), observe_derivative(self.phi, self.setup.schedule, U)

    def _sweep(self, Y):
        """``S^* B^* Y`` for a block ``Y`` of data vectors (columns)."""
        model = self.setup.model
        L = self._loads

        def loads(ell):
            k = self._col.get(ell)
            if k is None:
                return None
            return np.outer(L[:, k], Y[k]) if Y.ndim == 2 else L[:, k] * Y[k]

        out = model.adjoint_sweep(loads, self._last)
        if out is None:
            return np.zeros((model.n_x,) + Y.shape[1:])
        return out

    def forward(self, m):
        """``F m``."""
        if self.F is not None:
            return self.F @ m
        if self._last == 0:
            return np.zeros(0)
        U = self.setup.model.solve_forward(m, n_steps=self._last)
        return observe(self.phi, self.setup.schedule, U)

    def adjoint(self, y):
        """``F^# y = M^-1 F^T y``, the adjoint in the M inner product."""
        if self.F is not None:
            return self.setup.prior.solve_mass(self.F.T @ y)
        return self._sweep(np.asarray(y, dtype=float))

    def hessian_pp(self, x):
        """Prior-preconditioned misfit Hessian ``Gpr^1/2 H_mis Gpr^1/2 x``."""
        s = self.setup
        if self._last == 0:
            return np.zeros_like(x)
        if self._Lt is not None:
            return self._Lt @ (self.W * (self._Lt.T @ (s.M @ x))) / s.sigma2
        z = s.prior.apply_sqrt(x)
        return s.prior.apply_sqrt(self.adjoint(self.W * self.forward(z))) / s.sigma2

    def misfit_hessian(self, x):
        """``H_mis x = sigma^-2 F^# W F x``."""
        return self.adjoint(self.W * self.forward(x)) / self.setup.sigma2


def misfit_hessian_apply(setup, xi, x, filtered=True):
    """``sigma^-2 S^* B^* (I - P) B S x`` (or without the filter)."""
    ops = DesignOperators(setup, xi, weighting="soft" if filtered else "none")
    return ops.misfit_hessian(np.asarray(x, dtype=float))


@dataclass
class LowRankPosterior:
    """``Gpo,r = Gpr - sum_i lambda_i / (lambda_i + 1) vt_i vt_i^*`` with
    ``vt_i = Gpr^1/2 v_i``."""

    prior: object
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    transformed: np.ndarray
    converged: np.ndarray
    xi: np.ndarray = None
    operators: object = field(default=None, repr=False)

    @property
    def rank(self):
        return len(self.eigenvalues)

    @property
    def downdate(self):
        """``lambda / (lambda + 1)`` with non-converged pairs excluded."""
        lam = self.eigenvalues
        return np.where(self.converged, lam / (lam + 1.0), 0.0)


def build_low_rank(setup, xi, weighting="soft", derivatives=False):
    ops = DesignOperators(setup, xi, weighting=weighting, derivatives=derivatives)
    prior = setup.prior
    n = setup.mesh.n_nodes
    if setup.n_y == 0 or setup.r == 0 or not ops.W.any():
        empty = np.zeros((n, 0))
        return LowRankPosterior(prior, np.zeros(0), empty, empty, np.zeros(0, bool), ops.xi, ops)
    res = lanczos_m(ops.hessian_pp, setup.M, setup.r, setup.k,
                    seed=setup.lanczos_seed, tol=setup.lanczos_tol)
    vt = np.column_stack([prior.apply_sqrt(v) for v in res.eigenvectors.T])
    return LowRankPosterior(prior, res.eigenvalues, res.eigenvectors, vt, res.converged, ops.xi, ops)


def apply_gamma_po_r(post, m):
    """``Gpo,r m``, evaluated as ``Gpr^1/2 (x - sum_i lambda_i/(lambda_i+1) <x, v_i>_M v_i)``
    with ``x = Gpr^1/2 m``.

    This equals the downdate formula in ``vt_i`` but the subtraction happens
    between vectors rather than between large quadratic forms, which keeps
    small posterior variances accurate when some ``lambda_i`` are huge.
    """
    m = np.asarray(m, dtype=float)
    x = post.prior.apply_sqrt(m)
    if post.rank:
        V = post.eigenvectors
        x = x - V @ (post.downdate * (V.T @ (post.prior.M @ x)))
    return post.prior.apply_sqrt(x)


def goal_variance(post, c):
    """``(<Gpo,r c, c>_M, Gpo,r c)``.

    With ``x = Gpr^1/2 c`` split into its part ``x_perp`` outside the
    eigenvector span and coefficients ``alpha`` inside it, the variance is
    ``||x_perp||_M^2 + sum_i alpha_i^2 / (lambda_i + 1)``; no large terms cancel.
    """
    prior = post.prior
    M = prior.M
    x = prior.apply_sqrt(c)
    if not post.rank:
        return float(x @ (M @ x)), prior.apply_sqrt(x)
    V = post.eigenvectors
    alpha = V.T @ (M @ x)
    x_perp = x - V @ alpha
    s = np.where(post.converged, 1.0 / (post.eigenvalues + 1.0), 1.0)
    psi = float(x_perp @ (M @ x_perp) + np.sum(s * alpha ** 2))
    return psi, prior.apply_sqrt(x_perp + V @ (s * alpha))


@dataclass
class CriterionResult:
    value: float
    gradient: np.ndarray
    psi: float
    penalty: float
    posterior: LowRankPosterior = field(repr=False)


def evaluate_criterion(setup, xi, goal, gradient=True):
    """Goal variance ``Psi = <Gpo,r c, c>_M`` plus the acceleration penalty.

    The gradient uses one forward solve of ``Gpo,r c`` in addition to the
    work needed to build the posterior.
    """
    xi = np.asarray(xi, dtype=float)
    post = build_low_rank(setup, xi, weighting="soft", derivatives=gradient)
    psi, ct = goal_variance(post, goal.c)
    pen, dpen = accel_penalty(setup.path, xi, setup.gamma)
    if not gradient:
        return CriterionResult(psi + pen, None, psi, pen, post)
    grad = np.array(dpen, dtype=float)
    ops = post.operators
    if setup.n_y and ops.W.any():
        d, e = ops.data_and_derivative(ct)
        # dPsi = -<dH ct, ct>_M with H = sigma^-2 F^# W F
        grad -= (2.0 * (ops.W * d) @ e + (d ** 2) @ ops.dW) / setup.sigma2
    return CriterionResult(psi + pen, grad, psi, pen, post)


def criterion_and_gradient(setup, xi, goal):
    res = evaluate_criterion(setup, xi, goal)
    return res.value, res.gradient


def criterion(setup, xi, goal, include_penalty=False):
    """``Psi(xi)`` without the gradient work."""
    res = evaluate_criterion(setup, xi, goal, gradient=False)
    return res.value if include_penalty else res.psi


def compute_map(setup, xi, post, y):
    """``Gpo,r (sigma^-2 F^# W y + Gpr^-1 m_pr)``.

    ``post`` must have been built at ``xi`` with the weighting that should
    apply to ``y`` (``"hard"`` drops obscured measurements).
    """
    ops = post.operators
    if ops is None or not np.array_equal(ops.xi, np.asarray(xi, dtype=float)):
        raise ValueError("posterior was built at a different design")
    prior = setup.prior
    rhs = prior.apply_inv(prior.mean)
    if setup.n_y:
        rhs = rhs + ops.adjoint(ops.W * np.asarray(y, dtype=float)) / setup.sigma2
    return apply_gamma_po_r(post, rhs)


def posterior_sample(post, mean, seed=None, rng=None):
    """Draw from ``N(mean, Gpo,r)``."""
    rng = np.random.default_rng(seed) if rng is None else rng
    prior = post.prior
    g = prior.white_noise(rng)
    if post.rank:
        s = np.where(post.converged, 1.0 / np.sqrt(post.eigenvalues + 1.0), 1.0)
        g = g + post.eigenvectors @ ((s - 1.0) * (post.eigenvectors.T @ (prior.M @ g)))
    return mean + prior.apply_sqrt(g)


def variance_field(post):
    """Nodal variances ``diag(Gpo,r M^-1)`` of the coefficient vector."""
    var = post.prior.nodal_variance()
    if post.rank:
        var = var - (post.transformed ** 2) @ post.downdate
    return var


def goal_density(cov_apply, M, c, mean):
    """Mean, variance and coefficient of variation of ``<c, m>_M`` when
    ``m ~ N(mean, C)`` and ``cov_apply`` applies ``C``.

    The CV is ``inf`` when the mean vanishes.
    """
    mu = float(c @ (M @ mean))
    var = float(cov_apply(c) @ (M @ c))
    var = max(var, 0.0)
    cv = np.sqrt(var) / abs(mu) if mu != 0 else np.inf
    return mu, var, cv


def gaussian_density(mu, var, n=401, width=6.0):
    """Samples ``(z, pdf)`` of the normal density over ``mu +- width * sd``."""
    sd = np.sqrt(var)
    z = np.linspace(mu - width * sd, mu + width * sd, n)
    pdf = np.exp(-0.5 * ((z - mu) / sd) ** 2) / (sd * np.sqrt(2.0 * np.pi))
    return z, pdf


def design_objective(setup, goal, log_scale=True):
    """``xi -> (f, grad)`` for the optimizer.

    With ``log_scale`` the objective is ``log(Psi + R)``: it has the same
    minimizers but is invariant to the overall magnitude of ``Psi``, so
    absolute gradient tolerances mean the same thing for every problem.
    """
    def f_and_grad(xi):
        value, grad = criterion_and_gradient(setup, xi, goal)
        if log_scale:
            if value <= 0:
                return np.nan, grad
            return np.log(value), grad / value
        return value, grad
    return f_and_grad

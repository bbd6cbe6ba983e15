"""Implicit-Euler solution operator for the advection-diffusion source model
and its adjoint in the mass-weighted space-time inner product."""
import numpy as np
import scipy.sparse as sp

from .linops import Factorization

SQRT_HALF = np.sqrt(0.5)


def constant_diagonal_velocity(x):
    x = np.atleast_2d(x)
    return np.tile([SQRT_HALF, -SQRT_HALF], (len(x), 1))


def recirculating_velocity(x):
    x = np.atleast_2d(x)
    x1, x2 = x[:, 0], x[:, 1]
    return np.column_stack([
        2.0 * (2.0 * x2 - 1.0) * (1.0 - (2.0 * x1 - 1.0) ** 2),
        -2.0 * (2.0 * x1 - 1.0) * (1.0 - (2.0 * x2 - 1.0) ** 2),
    ])


def zero_velocity(x):
    return np.zeros((len(np.atleast_2d(x)), 2))


def oscillating_amplitude(t):
    return -0.25 * np.cos(4.0 * np.pi * np.asarray(t)) + 0.75


def decaying_amplitude(t):
    return 1.05 / 2.0 * (1.0 - 2.0 / np.pi * np.arctan(8.0 * np.asarray(t) - 6.0))


def constant_amplitude(t):
    return np.ones_like(np.asarray(t, dtype=float))


VELOCITY_PRESETS = {
    "constant-diagonal": constant_diagonal_velocity,
    "recirculating": recirculating_velocity,
    "zero": zero_velocity,
}

AMPLITUDE_PRESETS = {
    "oscillating": oscillating_amplitude,
    "decaying": decaying_amplitude,
    "constant": constant_amplitude,
}

_EXPR_NAMESPACE = {name: getattr(np, name) for name in (
    "sin", "cos", "tan", "arctan", "exp", "log", "sqrt", "abs", "pi", "tanh")}


def _compile(expr):
    code = compile(expr, "<expression>", "eval")
    for name in code.co_names:
        if name not in _EXPR_NAMESPACE and name not in ("x1", "x2", "t"):
            raise ValueError(f"name {name!r} not allowed in expression {expr!r}")
    return code


def velocity_from_spec(spec):
    """Preset name, callable, or a pair of expressions in ``x1, x2``."""
    if callable(spec):
        return spec
    if isinstance(spec, str):
        try:
            return VELOCITY_PRESETS[spec]
        except KeyError:
            raise ValueError(f"unknown velocity preset {spec!r}") from None
    c1, c2 = (_compile(e) for e in spec)

    def velocity(x):
        x = np.atleast_2d(x)
        ns = dict(_EXPR_NAMESPACE, x1=x[:, 0], x2=x[:, 1])
        v1 = eval(c1, {"__builtins__": {}}, ns)
        v2 = eval(c2, {"__builtins__": {}}, ns)
        return np.column_stack([np.broadcast_to(v1, len(x)), np.broadcast_to(v2, len(x))])

    return velocity


def amplitude_from_spec(spec):
    """Preset name, callable, or an expression in ``t``."""
    if callable(spec):
        return spec
    if spec in AMPLITUDE_PRESETS:
        return AMPLITUDE_PRESETS[spec]
    code = _compile(spec)

    def amplitude(t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(eval(code, {"__builtins__": {}}, dict(_EXPR_NAMESPACE, t=t)), t.shape)

    return amplitude


class ForwardModel:
    """``A u_{l+1} = M u_l + a_{l+1} dt M m`` on a uniform grid of ``n_t``
    steps over ``[0, T]`` with ``u_0 = 0``.

    Snapshots are the ``n_t`` states ``u_1 .. u_{n_t}`` at ``t_l = l * dt``;
    quadrature weights are ``w_l = dt``. Nodes on ``dirichlet_edges`` are
    eliminated symmetrically (zero rows and columns, unit diagonal).
    """

    def __init__(self, mesh, alpha, velocity="zero", amplitude="constant",
                 T=1.0, n_t=100, dirichlet_edges=(), M=None):
        if n_t < 1 or T <= 0:
            raise ValueError("need n_t >= 1 and T > 0")
        self.mesh = mesh
        self.alpha = float(alpha)
        self.velocity = velocity_from_spec(velocity)
        self.amplitude = amplitude_from_spec(amplitude)
        self.T = float(T)
        self.n_t = int(n_t)
        self.dt = self.T / self.n_t
        self.times = self.dt * np.arange(1, self.n_t + 1)
        self.a = np.asarray(self.amplitude(self.times), dtype=float).reshape(self.n_t)
        self.w = np.full(self.n_t, self.dt)

        self.M = mesh.mass() if M is None else M
        A = self.M + self.dt * (self.alpha * mesh.stiffness() + mesh.advection(self.velocity))
        self.dirichlet = mesh.boundary_nodes(dirichlet_edges)
        keep = np.ones(mesh.n_nodes)
        keep[self.dirichlet] = 0.0
        self._keep = keep
        R = sp.diags(keep)
        A = R @ A @ R + sp.diags(1.0 - keep)
        self.A = A.tocsc()
        self._A = Factorization(self.A)

    @property
    def n_x(self):
        return self.mesh.n_nodes

    def _restrict(self, b):
        if b.ndim == 1:
            return b * self._keep
        return b * self._keep[:, None]

    def step(self, u_prev, m, ell):
        """One implicit-Euler step to time index ``ell`` (1-based)."""
        rhs = self.M @ (u_prev + self.a[ell - 1] * self.dt * m)
        return self._A.solve(self._restrict(rhs))

    def solve_forward(self, m, n_steps=None):
        """Snapshot matrix ``[u_1 .. u_n]`` (``n = n_steps`` or ``n_t``).

        ``m`` may be a vector or an ``(n_x, p)`` block; a block returns an
        array of shape ``(n_x, n, p)``.
        """
        m = np.asarray(m, dtype=float)
        n = self.n_t if n_steps is None else int(n_steps)
        U = np.zeros((self.n_x, n) + m.shape[1:])
        Mm = self.M @ m
        u = np.zeros_like(m)
        for ell in range(1, n + 1):
            rhs = self.M @ u + self.a[ell - 1] * self.dt * Mm
            u = self._A.solve(self._restrict(rhs))
            U[:, ell - 1] = u
        return U

    def adjoint_sweep(self, loads, last):
        """Backward recursion shared by all adjoint applications.

        ``loads(ell)`` returns the M-weighted load ``w_l M v_l`` (vector or
        block) for time index ``ell`` or ``None`` when it vanishes; ``last`` is
        the largest index with a nonzero load. Returns
        ``dt * sum_l a_l q_l`` with ``q_l = A^-T R (w_l M v_l + M q_{l+1})``.
        """
        q = None
        acc = None
        for ell in range(last, 0, -1):
            b = loads(ell)
            if q is not None:
                b = self.M @ q if b is None else b + self.M @ q
            if b is None:
                continue
            q = self._A.solve_transpose(self._restrict(b))
            acc = self.a[ell - 1] * q if acc is None else acc + self.a[ell - 1] * q
        if acc is None:
            return None
        return self.dt * acc

    def apply_adjoint(self, V):
        """``S^* V`` such that ``<<S m, V>>_M = <m, S^* V>_M``."""
        V = np.asarray(V, dtype=float)
        if V.shape[:2] != (self.n_x, self.n_t):
            raise ValueError(f"expected snapshot of shape {(self.n_x, self.n_t)}, got {V.shape}")
        nz = np.flatnonzero(np.any(V.reshape(self.n_x, self.n_t, -1) != 0.0, axis=(0, 2)))
        if len(nz) == 0:
            return np.zeros((self.n_x,) + V.shape[2:])
        out = self.adjoint_sweep(lambda ell: self.w[ell - 1] * (self.M @ V[:, ell - 1]), nz[-1] + 1)
        return out

    def point_response_table(self, indices):
        """Adjoint responses of unit point loads, tabulated per measurement column.

        Returns ``E`` of shape ``(len(indices), n_x, n_x)`` with
        ``E[k, i] = M S^* B_{k,i}^*`` where ``B_{k,i}`` reads node ``i`` of
        snapshot column ``indices[k]``. Row ``k`` of the parameter-to-observable
        matrix for any point-evaluation vector ``phi`` is then ``phi @ E[k]``.
        The model is time invariant, so one sweep with ``n_x`` right-hand
        sides serves every column: with ``G_j = (A^-T R M)^j A^-T R`` the
        response at lag ``j`` is shared and only the amplitude weights differ.
        """
        idx = np.asarray(indices, dtype=np.int64) + 1
        n = self.n_x
        H = np.zeros((len(idx), n, n))
        if len(idx) == 0:
            return H
        G = self._A.solve_transpose(np.diag(self._keep))
        for j in range(int(idx.max())):
            live = np.flatnonzero(idx - j >= 1)
            for k in live:
                H[k] += (self.dt * self.a[idx[k] - j - 1]) * G
            if j + 1 < idx.max():
                G = self._A.solve_transpose(self._restrict(np.asarray(self.M @ G)))
        # E[k] = (M H_k)^T, rows indexed by the loaded node
        for k in range(len(idx)):
            H[k] = np.asarray(self.M @ H[k]).T
        return H

    def dense_step_adjoint(self):
        """Dense ``A^-T R M`` for small verification problems."""
        Ainv_T = np.linalg.inv(self.A.toarray()).T
        return Ainv_T @ np.diag(self._keep) @ self.M.toarray()

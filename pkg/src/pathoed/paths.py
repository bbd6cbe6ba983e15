"""Sensor path families that are affine in their design vector.

Both families satisfy ``r(t; xi) = r0(t) + T(t) xi`` on the inversion window
``T_y = [t_a, t_b]``. A path object stores only the structure (degree, pinned
points, center, window); the design vector ``xi`` is passed explicitly.
"""
from dataclasses import dataclass

import numpy as np

from .kernels import bernstein, de_casteljau

_WINDOW_TOL = 1e-12


def _check_window(path, t, clamp):
    t = np.atleast_1d(np.asarray(t, dtype=float))
    ta, tb = path.window
    if clamp:
        return np.clip(t, ta, tb)
    if np.any(t < ta - _WINDOW_TOL) or np.any(t > tb + _WINDOW_TOL):
        raise ValueError(f"time outside inversion window [{ta}, {tb}]")
    return np.clip(t, ta, tb)


@dataclass(frozen=True, eq=False)
class BezierPath:
    """Degree ``degree`` Bezier curve traversed once over ``window``.

    ``mode`` is ``"free"`` (all control points are design variables),
    ``"fixed"`` (``start`` and ``end`` pinned) or ``"closed"`` (first and
    last control point both equal to ``start``). The design vector holds the
    free control points interleaved as ``[x_0, y_0, x_1, y_1, ...]``.
    """

    degree: int
    window: tuple
    mode: str = "free"
    start: tuple = None
    end: tuple = None

    family = "bezier"

    def __post_init__(self):
        if self.degree < 1:
            raise ValueError("Bezier degree must be >= 1")
        if self.window[1] <= self.window[0]:
            raise ValueError("empty inversion window")
        if self.mode not in ("free", "fixed", "closed"):
            raise ValueError(f"unknown Bezier mode {self.mode!r}")
        if self.mode == "fixed" and (self.start is None or self.end is None):
            raise ValueError("fixed mode needs start and end points")
        if self.mode == "closed" and self.start is None:
            raise ValueError("closed mode needs a start point")
        if self.mode != "free" and self.degree < 2:
            raise ValueError("pinned Bezier paths need degree >= 2")

    @property
    def free_slice(self):
        if self.mode == "free":
            return slice(0, self.degree + 1)
        return slice(1, self.degree)

    @property
    def n_design(self):
        s = self.free_slice
        return 2 * (s.stop - s.start)

    @property
    def duration(self):
        return self.window[1] - self.window[0]

    def pinned_points(self):
        if self.mode == "fixed":
            return np.asarray(self.start, float), np.asarray(self.end, float)
        if self.mode == "closed":
            p = np.asarray(self.start, float)
            return p, p
        return None

    def control_points(self, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.n_design,):
            raise ValueError(f"design vector must have length {self.n_design}, got {xi.shape}")
        inner = xi.reshape(-1, 2)
        pins = self.pinned_points()
        if pins is None:
            return inner.copy()
        return np.vstack([pins[0], inner, pins[1]])

    def design_from_control_points(self, ctrl):
        ctrl = np.asarray(ctrl, dtype=float).reshape(self.degree + 1, 2)
        return ctrl[self.free_slice].ravel().copy()

    def local_time(self, t):
        return (t - self.window[0]) / self.duration

    def offset(self, t):
        """``r0(t)``: contribution of the pinned control points."""
        s = self.local_time(t)
        pins = self.pinned_points()
        if pins is None:
            return np.zeros((len(s), 2))
        B = bernstein(s, self.degree)
        return B[:, :1] * pins[0] + B[:, -1:] * pins[1]

    def basis(self, t):
        """``T(t)`` with shape ``(len(t), 2, n_design)``."""
        B = bernstein(self.local_time(t), self.degree)[:, self.free_slice]
        T = np.zeros((len(t), 2, self.n_design))
        T[:, 0, 0::2] = B
        T[:, 1, 1::2] = B
        return T

    def evaluate(self, t, xi):
        return de_casteljau(self.local_time(t), self.control_points(xi))

    def second_derivative(self, t, xi=None):
        """``d^2 r / dt^2`` as an affine map: returns ``(c0, D)`` with
        ``r''(t) = c0 + D xi`` (shapes ``(n, 2)`` and ``(n, 2, N)``)."""
        n = self.degree
        s = self.local_time(t)
        scale = n * (n - 1) / self.duration ** 2
        if n < 2:
            return np.zeros((len(s), 2)), np.zeros((len(s), 2, self.n_design))
        B = bernstein(s, n - 2)
        # second difference operator: r'' = scale * sum_j B_{j,n-2} (p_j - 2p_{j+1} + p_{j+2})
        W = np.zeros((len(s), n + 1))
        W[:, : n - 1] += B
        W[:, 1:n] -= 2.0 * B
        W[:, 2:] += B
        W *= scale
        c0 = np.zeros((len(s), 2))
        pins = self.pinned_points()
        if pins is not None:
            c0 = W[:, :1] * pins[0] + W[:, -1:] * pins[1]
        Wf = W[:, self.free_slice]
        D = np.zeros((len(s), 2, self.n_design))
        D[:, 0, 0::2] = Wf
        D[:, 1, 1::2] = Wf
        return c0, D


@dataclass(frozen=True, eq=False)
class FourierPath:
    """``xbar + sum_j [a_j cos(w_j t) + b_j sin(w_j t), c_j cos(w_j t) + d_j sin(w_j t)]``
    with ``w_j = 2 pi j / |T_y|`` and ``xi = [a_1 b_1 c_1 d_1 a_2 ...]``."""

    modes: int
    window: tuple
    center: tuple = (0.5, 0.5)

    family = "fourier"

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError("need at least one Fourier mode")
        if self.window[1] <= self.window[0]:
            raise ValueError("empty inversion window")

    @property
    def n_design(self):
        return 4 * self.modes

    @property
    def duration(self):
        return self.window[1] - self.window[0]

    @property
    def omega(self):
        return 2.0 * np.pi * np.arange(1, self.modes + 1) / self.duration

    def offset(self, t):
        return np.broadcast_to(np.asarray(self.center, float), (len(t), 2)).copy()

    def basis(self, t):
        wt = np.outer(t, self.omega)
        c, s = np.cos(wt), np.sin(wt)
        T = np.zeros((len(t), 2, self.n_design))
        T[:, 0, 0::4] = c
        T[:, 0, 1::4] = s
        T[:, 1, 2::4] = c
        T[:, 1, 3::4] = s
        return T

    def evaluate(self, t, xi):
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (self.n_design,):
            raise ValueError(f"design vector must have length {self.n_design}, got {xi.shape}")
        return self.offset(t) + self.basis(t) @ xi

    def second_derivative(self, t, xi=None):
        D = -self.basis(t) * np.repeat(self.omega ** 2, 4)[None, None, :]
        return np.zeros((len(t), 2)), D


def eval_path(path, t, xi, clamp=False):
    """Sensor positions ``r(t; xi)``, shape ``(len(t), 2)``.

    Times outside the inversion window raise ``ValueError`` unless ``clamp``
    is set, in which case they are moved to the nearest window endpoint.
    """
    return path.evaluate(_check_window(path, t, clamp), xi)


def path_jacobian(path, t, xi=None, clamp=False):
    """``dr/dxi`` at each time, shape ``(len(t), 2, N)``.

    Both families are affine, so the result does not depend on ``xi``.
    """
    return path.basis(_check_window(path, t, clamp))


def spectral_norm_Tf(path, t=None, numeric=False):
    """``||T_f(t)||_2``, which equals ``sqrt(N_f)`` for every ``t``.

    With ``numeric=True`` the largest singular value of the assembled matrix
    at each ``t`` is returned instead.
    """
    if not numeric:
        return float(np.sqrt(path.modes))
    T = path.basis(np.atleast_1d(np.asarray(t, dtype=float)))
    return np.linalg.norm(T, ord=2, axis=(1, 2))


def disk_constraint_radius(path, radius):
    """Bound on ``||xi||_2`` that keeps the path within ``radius`` of the center."""
    if radius <= 0:
        raise ValueError("disk radius must be positive")
    return radius / spectral_norm_Tf(path)


def box_constraint_bounds(path, half_widths):
    """Per-coordinate bounds ``(lower, upper)`` on ``xi`` confining the path
    to ``[xbar - x~, xbar + x~]``."""
    hw = np.asarray(half_widths, dtype=float).reshape(2)
    c = np.asarray(path.center, dtype=float)
    if np.any(hw <= 0):
        raise ValueError("box half-widths must be positive")
    if np.any(c - hw < -_WINDOW_TOL) or np.any(c + hw > 1.0 + _WINDOW_TOL):
        raise ValueError("box around the path center leaves the unit square")
    per_mode = np.array([hw[0], hw[0], hw[1], hw[1]]) / (2.0 * path.modes)
    upper = np.tile(per_mode, path.modes)
    return -upper, upper


def hull_box_bounds(path, lower=0.0, upper=1.0):
    """Bounds keeping every free Bezier control point in ``[lower, upper]^2``;
    by the convex hull property the whole curve then stays in the box."""
    n = path.n_design
    return np.full(n, float(lower)), np.full(n, float(upper))


def accel_penalty(path, xi, gamma, n_quad=401):
    """``gamma/2 * int_{T_y} ||r''(t)||^2 dt`` and its gradient in ``xi``.

    Fourier paths use the exact expression; Bezier paths use the composite
    trapezoid rule on ``n_quad`` equispaced times.
    """
    if gamma < 0:
        raise ValueError("penalty weight must be non-negative")
    xi = np.asarray(xi, dtype=float)
    if gamma == 0:
        return 0.0, np.zeros_like(xi)
    if isinstance(path, FourierPath):
        w4 = np.repeat(path.omega ** 4, 4)
        coef = gamma * path.duration / 4.0
        return float(coef * np.sum(w4 * xi ** 2)), 2.0 * coef * w4 * xi
    t = np.linspace(path.window[0], path.window[1], n_quad)
    c0, D = path.second_derivative(t)
    acc = c0 + D @ xi
    q = np.full(n_quad, t[1] - t[0])
    q[[0, -1]] *= 0.5
    value = 0.5 * gamma * np.sum(q * np.sum(acc ** 2, axis=1))
    grad = gamma * np.einsum("t,tc,tcn->n", q, acc, D)
    return float(value), grad

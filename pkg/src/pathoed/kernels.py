"""Per-design inner loops: P1 point location on the structured mesh and
Bernstein / de Casteljau evaluation.

Every kernel has a compiled loop version (``_*_loop``) and a numpy version
(``_*_numpy``); the public function picks one according to
:data:`pathoed._accel.USE_NUMBA`. Both must return identical results, which
``tests/test_kernels.py`` checks.
"""
import numpy as np

from . import _accel
from ._accel import njit


# ---------------------------------------------------------------------------
# P1 point location
# ---------------------------------------------------------------------------

@njit(cache=True)
def _locate_loop(points, n_side):
    n = points.shape[0]
    h = 1.0 / (n_side - 1)
    nodes = np.empty((n, 3), dtype=np.int64)
    weights = np.empty((n, 3))
    grads = np.empty((n, 3, 2))
    clamped = 0
    for p in range(n):
        x = points[p, 0]
        y = points[p, 1]
        if x < 0.0 or x > 1.0 or y < 0.0 or y > 1.0:
            clamped += 1
            x = min(max(x, 0.0), 1.0)
            y = min(max(y, 0.0), 1.0)
        i = min(int(np.floor(x / h)), n_side - 2)
        j = min(int(np.floor(y / h)), n_side - 2)
        s = x / h - i
        t = y / h - j
        n00 = j * n_side + i
        n10 = n00 + 1
        n11 = n00 + n_side + 1
        n01 = n00 + n_side
        if t <= s:
            nodes[p, 0] = n00
            nodes[p, 1] = n10
            nodes[p, 2] = n11
            weights[p, 0] = 1.0 - s
            weights[p, 1] = s - t
            weights[p, 2] = t
            grads[p, 0, 0] = -1.0 / h
            grads[p, 0, 1] = 0.0
            grads[p, 1, 0] = 1.0 / h
            grads[p, 1, 1] = -1.0 / h
            grads[p, 2, 0] = 0.0
            grads[p, 2, 1] = 1.0 / h
        else:
            nodes[p, 0] = n00
            nodes[p, 1] = n11
            nodes[p, 2] = n01
            weights[p, 0] = 1.0 - t
            weights[p, 1] = s
            weights[p, 2] = t - s
            grads[p, 0, 0] = 0.0
            grads[p, 0, 1] = -1.0 / h
            grads[p, 1, 0] = 1.0 / h
            grads[p, 1, 1] = 0.0
            grads[p, 2, 0] = -1.0 / h
            grads[p, 2, 1] = 1.0 / h
    return nodes, weights, grads, clamped


def _locate_numpy(points, n_side):
    h = 1.0 / (n_side - 1)
    outside = np.any((points < 0.0) | (points > 1.0), axis=1)
    pts = np.clip(points, 0.0, 1.0)
    i = np.minimum(np.floor(pts[:, 0] / h).astype(np.int64), n_side - 2)
    j = np.minimum(np.floor(pts[:, 1] / h).astype(np.int64), n_side - 2)
    s = pts[:, 0] / h - i
    t = pts[:, 1] / h - j
    n00 = j * n_side + i
    lower = t <= s
    n = len(points)

    nodes = np.empty((n, 3), dtype=np.int64)
    nodes[:, 0] = n00
    nodes[:, 1] = np.where(lower, n00 + 1, n00 + n_side + 1)
    nodes[:, 2] = np.where(lower, n00 + n_side + 1, n00 + n_side)

    weights = np.empty((n, 3))
    weights[:, 0] = np.where(lower, 1.0 - s, 1.0 - t)
    weights[:, 1] = np.where(lower, s - t, s)
    weights[:, 2] = np.where(lower, t, t - s)

    g_lower = np.array([[-1.0, 0.0], [1.0, -1.0], [0.0, 1.0]]) / h
    g_upper = np.array([[0.0, -1.0], [1.0, 0.0], [-1.0, 1.0]]) / h
    grads = np.where(lower[:, None, None], g_lower, g_upper)
    return nodes, weights, grads, int(outside.sum())


def locate_p1(points, n_side):
    """Containing triangle, barycentric weights and their gradients.

    Parameters
    ----------
    points : (n, 2) array
        Query points; coordinates outside ``[0, 1]`` are clamped.
    n_side : int
        Nodes per edge of the structured mesh.

    Returns
    -------
    nodes : (n, 3) int array
    weights : (n, 3) array
        Values of the three active basis functions.
    grads : (n, 3, 2) array
        Their (constant) gradients on the containing triangle.
    clamped : int
        Number of points that had to be clamped into the unit square.
    """
    points = np.ascontiguousarray(points, dtype=float).reshape(-1, 2)
    if _accel.USE_NUMBA:
        nodes, weights, grads, clamped = _locate_loop(points, int(n_side))
        return nodes, weights, grads, int(clamped)
    return _locate_numpy(points, int(n_side))


# ---------------------------------------------------------------------------
# Bernstein polynomials
# ---------------------------------------------------------------------------

@njit(cache=True)
def _bernstein_loop(s, degree):
    n = s.shape[0]
    out = np.zeros((n, degree + 1))
    for p in range(n):
        u = s[p]
        out[p, 0] = 1.0
        # raise the degree one step at a time (triangular scheme)
        for d in range(1, degree + 1):
            prev = 0.0
            for j in range(d + 1):
                cur = out[p, j] if j < d else 0.0
                out[p, j] = (1.0 - u) * cur + u * prev
                prev = cur
    return out


def _bernstein_numpy(s, degree):
    out = np.zeros((len(s), degree + 1))
    out[:, 0] = 1.0
    u = s[:, None]
    for d in range(1, degree + 1):
        shifted = np.zeros_like(out[:, : d + 1])
        shifted[:, 1:] = out[:, :d]
        out[:, : d + 1] = (1.0 - u) * out[:, : d + 1] + u * shifted
    return out


def bernstein(s, degree):
    """Bernstein basis ``B_{j,degree}(s)``, shape ``(len(s), degree + 1)``."""
    s = np.ascontiguousarray(s, dtype=float).reshape(-1)
    if degree < 0:
        return np.zeros((len(s), 0))
    if _accel.USE_NUMBA:
        return _bernstein_loop(s, int(degree))
    return _bernstein_numpy(s, int(degree))


@njit(cache=True)
def _casteljau_loop(s, ctrl):
    n = s.shape[0]
    m = ctrl.shape[0]
    dim = ctrl.shape[1]
    out = np.empty((n, dim))
    work = np.empty((m, dim))
    for p in range(n):
        u = s[p]
        for a in range(m):
            for c in range(dim):
                work[a, c] = ctrl[a, c]
        for level in range(1, m):
            for a in range(m - level):
                for c in range(dim):
                    work[a, c] = (1.0 - u) * work[a, c] + u * work[a + 1, c]
        for c in range(dim):
            out[p, c] = work[0, c]
    return out


def _casteljau_numpy(s, ctrl):
    work = np.broadcast_to(ctrl, (len(s),) + ctrl.shape).copy()
    u = s[:, None, None]
    for level in range(1, ctrl.shape[0]):
        work = (1.0 - u) * work[:, :-1] + u * work[:, 1:]
    return work[:, 0]


def de_casteljau(s, ctrl):
    """Evaluate the Bezier curve with control points ``ctrl`` at ``s``."""
    s = np.ascontiguousarray(s, dtype=float).reshape(-1)
    ctrl = np.ascontiguousarray(ctrl, dtype=float)
    if _accel.USE_NUMBA:
        return _casteljau_loop(s, ctrl)
    return _casteljau_numpy(s, ctrl)

"""Mass-weighted inner products, reusable sparse factorizations and an
M-orthogonal Lanczos eigensolver."""
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


def m_inner(x, y, M):
    """``<x, y>_M = y^T M x``."""
    return float(np.dot(y, M @ x))


def m_norm(x, M):
    return np.sqrt(max(m_inner(x, x, M), 0.0))


def st_inner(U, V, M, w, form="hadamard"):
    """Weighted space-time inner product of two snapshot matrices.

    ``form`` selects between the three equivalent expressions:
    ``"sum"`` (sum of weighted column inner products), ``"hadamard"``
    (``1^T (U * MV) w``) and ``"trace"`` (``tr(U^T M V W)``).
    """
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    w = np.asarray(w, dtype=float)
    if U.ndim != 2 or U.shape != V.shape:
        raise ValueError(f"snapshot shapes differ: {U.shape} vs {V.shape}")
    if M.shape != (U.shape[0], U.shape[0]) or w.shape != (U.shape[1],):
        raise ValueError("mass matrix or weights do not conform to the snapshots")
    if form == "hadamard":
        return float(np.ones(U.shape[0]) @ (U * (M @ V)) @ w)
    if form == "trace":
        return float(np.trace(U.T @ (M @ V) @ np.diag(w)))
    if form == "sum":
        return float(sum(w[l] * (V[:, l] @ (M @ U[:, l])) for l in range(U.shape[1])))
    raise ValueError(f"unknown form {form!r}")


class Factorization:
    """Sparse LU computed once; solves with the matrix or its transpose."""

    def __init__(self, A):
        self.shape = A.shape
        self._lu = spla.splu(sp.csc_matrix(A))

    def solve(self, b):
        return self._lu.solve(np.asarray(b, dtype=float))

    def solve_transpose(self, b):
        return self._lu.solve(np.asarray(b, dtype=float), trans="T")


@dataclass
class LanczosResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    converged: np.ndarray
    residuals: np.ndarray
    iterations: int


def lanczos_m(apply, M, rank, max_iter, seed=0, tol=1e-8):
    """Leading eigenpairs of an operator that is self-adjoint and positive
    semidefinite in the ``M`` inner product.

    Full reorthogonalization is used throughout. When the Krylov space becomes
    invariant before ``max_iter`` steps the iteration restarts from a fresh
    random vector orthogonal to the current basis, so operators of low rank are
    handled exactly.

    Returns eigenvalues in decreasing order (clipped at zero), M-orthonormal
    eigenvectors as columns, and per-pair convergence flags based on the Ritz
    residual estimate ``|beta_k s_k|`` against ``tol * lambda_1``.
    """
    n = M.shape[0]
    k = min(int(max_iter), n)
    if rank > k:
        raise ValueError(f"need max_iter >= rank, got rank={rank}, max_iter={max_iter}")
    rng = np.random.default_rng(seed)

    Q = np.zeros((n, k + 1))
    MQ = np.zeros((n, k + 1))
    alpha = np.zeros(k)
    beta = np.zeros(k)

    def orthogonalize(v, upto):
        for _ in range(2):
            v = v - Q[:, :upto] @ (MQ[:, :upto].T @ v)
        return v

    def fresh(upto):
        v = orthogonalize(rng.standard_normal(n), upto)
        return v / m_norm(v, M)

    q = fresh(0)
    Q[:, 0], MQ[:, 0] = q, M @ q
    scale = 0.0
    for j in range(k):
        w = apply(Q[:, j])
        alpha[j] = float(MQ[:, j] @ w)
        w = orthogonalize(w, j + 1)
        b = m_norm(w, M)
        scale = max(scale, abs(alpha[j]), b)
        if j + 1 == k:
            beta[j] = b
            break
        if b <= 1e-12 * max(scale, np.finfo(float).tiny):
            # invariant subspace: restart, leaving T block diagonal
            beta[j] = 0.0
            q = fresh(j + 1)
        else:
            beta[j] = b
            q = w / b
        Q[:, j + 1], MQ[:, j + 1] = q, M @ q

    theta, S = sla.eigh_tridiagonal(alpha, beta[: k - 1])
    order = np.argsort(theta)[::-1][:rank]
    theta, S = theta[order], S[:, order]
    vecs = Q[:, :k] @ S
    resid = np.abs(beta[k - 1] * S[-1, :])

    lam1 = max(theta[0], 0.0) if len(theta) else 0.0
    lam = np.where(theta < 1e-12 * lam1, 0.0, theta)
    converged = resid <= tol * lam1 if lam1 > 0 else np.ones(len(lam), dtype=bool)
    # M-normalize once more to remove rounding drift
    norms = np.sqrt(np.einsum("ij,ij->j", vecs, M @ vecs))
    vecs = vecs / norms
    return LanczosResult(lam, vecs, converged, resid, k)

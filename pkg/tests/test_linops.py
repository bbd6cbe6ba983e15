import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from pathoed.linops import Factorization, lanczos_m, m_inner, m_norm, st_inner
from pathoed.mesh import build_mesh


def triple_sum(U, V, M, w):
    total = 0.0
    for l in range(U.shape[1]):
        for i in range(U.shape[0]):
            for j in range(U.shape[0]):
                total += w[l] * U[i, l] * M[i, j] * V[j, l]
    return total


def test_st_inner_trivial():
    M = sp.identity(2, format="csr")
    assert st_inner(np.zeros((2, 2)), np.zeros((2, 2)), M, np.ones(2)) == 0.0
    for form in ("sum", "hadamard", "trace"):
        assert st_inner(np.eye(2), np.eye(2), M, np.ones(2), form) == pytest.approx(2.0)


@given(st.integers(0, 2 ** 32 - 1))
def test_st_inner_three_forms_agree(seed):
    rng = np.random.default_rng(seed)
    M = build_mesh(4).mass()
    U, V = rng.standard_normal((2, 16, 5))
    w = rng.uniform(0.1, 1, 5)
    ref = triple_sum(U, V, M.toarray(), w)
    for form in ("sum", "hadamard", "trace"):
        assert st_inner(U, V, M, w, form) == pytest.approx(ref, rel=1e-12, abs=1e-14)


def test_st_inner_bad_input():
    M = sp.identity(3, format="csr")
    with pytest.raises(ValueError):
        st_inner(np.zeros((3, 2)), np.zeros((3, 3)), M, np.ones(2))
    with pytest.raises(ValueError):
        st_inner(np.zeros((3, 2)), np.zeros((3, 2)), M, np.ones(2), form="nope")


def test_m_inner_norm():
    M = build_mesh(3).mass()
    x = np.arange(9.0)
    assert m_inner(x, x, M) == pytest.approx(m_norm(x, M) ** 2)


def test_factorization_transpose():
    rng = np.random.default_rng(0)
    A = sp.csc_matrix(rng.standard_normal((6, 6)) + 6 * np.eye(6))
    F = Factorization(A)
    b = rng.standard_normal(6)
    np.testing.assert_allclose(A @ F.solve(b), b, atol=1e-12)
    np.testing.assert_allclose(A.T @ F.solve_transpose(b), b, atol=1e-12)


def test_lanczos_identity():
    M = build_mesh(4).mass()
    res = lanczos_m(lambda x: x, M, 5, 10)
    np.testing.assert_allclose(res.eigenvalues, 1.0, atol=1e-10)


def test_lanczos_rank_one():
    M = build_mesh(5).mass()
    u = np.random.default_rng(3).standard_normal(25)
    u *= 2.0 / m_norm(u, M)
    res = lanczos_m(lambda x: u * m_inner(x, u, M), M, 4, 12)
    assert res.eigenvalues[0] == pytest.approx(4.0, rel=1e-12)
    assert np.all(np.abs(res.eigenvalues[1:]) < 1e-10)
    np.testing.assert_allclose(abs(m_inner(res.eigenvectors[:, 0], u, M)), 2.0, rtol=1e-10)


def test_lanczos_matches_generalized_eigensolve():
    mesh = build_mesh(5)
    M = mesh.mass()
    Md = M.toarray()
    rng = np.random.default_rng(5)
    B = rng.standard_normal((25, 6))
    # x -> M^-1 A x is self-adjoint in M; its spectrum solves A x = lambda M x
    A = B @ B.T
    res = lanczos_m(lambda x: np.linalg.solve(Md, A @ x), M, 6, 16)
    ref = np.sort(sla.eigh(A, Md, eigvals_only=True))[::-1][:6]
    np.testing.assert_allclose(res.eigenvalues, ref, rtol=1e-8)
    V = res.eigenvectors
    np.testing.assert_allclose(V.T @ Md @ V, np.eye(6), atol=1e-10)
    assert np.all(res.eigenvalues >= 0) and res.converged.all()


def test_lanczos_rejects_small_budget():
    M = build_mesh(3).mass()
    with pytest.raises(ValueError):
        lanczos_m(lambda x: x, M, 5, 3)

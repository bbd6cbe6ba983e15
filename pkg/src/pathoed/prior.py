"""Gaussian prior whose covariance is the squared inverse of ``-a1*Laplace + a2``."""
import numpy as np

from .linops import Factorization


class EllipticPrior:
    """Discretized prior ``N(m_pr, Gamma_pr)`` with ``Gamma_pr = K^-1 M K^-1 M``.

    ``K = a1 * K_s + a2 * M`` uses natural (homogeneous Neumann) boundary
    conditions. The square root ``K^-1 M`` is self-adjoint in the M inner
    product.
    """

    def __init__(self, mesh, a1, a2, mean=None, M=None):
        if a1 <= 0 or a2 <= 0:
            raise ValueError("prior coefficients a1, a2 must be positive")
        self.mesh = mesh
        self.a1 = float(a1)
        self.a2 = float(a2)
        self.M = mesh.mass() if M is None else M
        self.K = (self.a1 * mesh.stiffness() + self.a2 * self.M).tocsc()
        self._K = Factorization(self.K)
        self._M = Factorization(self.M)
        self._G = mesh.mass_factor()
        self._nodal_variance = None
        n = mesh.n_nodes
        if mean is None:
            self.mean = np.zeros(n)
        else:
            self.mean = np.broadcast_to(np.asarray(mean, dtype=float), (n,)).copy()

    @property
    def n(self):
        return self.mesh.n_nodes

    def solve_operator(self, x):
        """``K^-1 x``."""
        return self._K.solve(x)

    def apply_sqrt(self, x):
        """``K^-1 M x``."""
        return self._K.solve(self.M @ x)

    def apply_gamma_pr(self, x):
        return self.apply_sqrt(self.apply_sqrt(x))

    def apply_inv(self, x):
        """``M^-1 K M^-1 K x``."""
        return self._M.solve(self.K @ self._M.solve(self.K @ x))

    def solve_mass(self, x):
        return self._M.solve(x)

    def white_noise(self, rng, size=None):
        """Draws ``g`` with covariance ``M^-1`` (white in the M inner product)."""
        shape = (self._G.shape[1],) if size is None else (self._G.shape[1], size)
        return self._M.solve(self._G @ rng.standard_normal(shape))

    def sample(self, seed=None, rng=None, add_mean=True):
        """``m_pr + K^-1 L z`` with ``L L^T = M`` and ``z`` standard normal."""
        rng = np.random.default_rng(seed) if rng is None else rng
        z = rng.standard_normal(self._G.shape[1])
        m = self._K.solve(self._G @ z)
        return m + self.mean if add_mean else m

    def sample_from_noise(self, z, add_mean=True):
        m = self._K.solve(self._G @ z)
        return m + self.mean if add_mean else m

    def nodal_variance(self, block=256):
        """Diagonal of ``K^-1 M K^-1`` (variance of each nodal coefficient)."""
        if self._nodal_variance is not None:
            return self._nodal_variance.copy()
        n = self.n
        out = np.empty(n)
        for start in range(0, n, block):
            stop = min(start + block, n)
            E = np.zeros((n, stop - start))
            E[np.arange(start, stop), np.arange(stop - start)] = 1.0
            X = self._K.solve(E)
            out[start:stop] = np.einsum("ij,ij->j", X, self.M @ X)
        self._nodal_variance = out
        return out.copy()

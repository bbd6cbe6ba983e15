"""P1 finite elements on a structured triangulation of the unit square."""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .kernels import locate_p1

EDGES = ("left", "right", "bottom", "top")


class SparseVector(NamedTuple):
    """Nonzero entries of a length-``size`` vector."""

    indices: np.ndarray
    values: np.ndarray
    size: int

    def toarray(self):
        out = np.zeros(self.size)
        np.add.at(out, self.indices, self.values)
        return out


@dataclass(frozen=True, eq=False)
class StructuredMesh:
    """Uniform grid with ``n_side`` nodes per edge, each cell cut along the
    lower-left to upper-right diagonal.

    Node ``(i, j)`` (column ``i``, row ``j``) has global index ``j * n_side + i``.
    """

    n_side: int
    nodes: np.ndarray
    triangles: np.ndarray

    @property
    def n_nodes(self):
        return self.n_side ** 2

    @property
    def h(self):
        return 1.0 / (self.n_side - 1)

    @property
    def element_area(self):
        return 0.5 * self.h ** 2

    def boundary_nodes(self, edges):
        """Indices of the nodes lying on the named edges of the square."""
        mask = np.zeros(self.n_nodes, dtype=bool)
        x, y = self.nodes[:, 0], self.nodes[:, 1]
        tol = 1e-12
        for edge in edges:
            if edge == "left":
                mask |= x < tol
            elif edge == "right":
                mask |= x > 1.0 - tol
            elif edge == "bottom":
                mask |= y < tol
            elif edge == "top":
                mask |= y > 1.0 - tol
            else:
                raise ValueError(f"unknown edge {edge!r}; expected one of {EDGES}")
        return np.flatnonzero(mask)

    def centroids(self):
        return self.nodes[self.triangles].mean(axis=1)

    def element_gradients(self):
        """Gradients of the three local basis functions, shape ``(n_tri, 3, 2)``."""
        p = self.nodes[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        # rows of the inverse Jacobian transpose give grad(lambda_1), grad(lambda_2)
        g1 = np.stack([d2[:, 1], -d2[:, 0]], axis=1) / det[:, None]
        g2 = np.stack([-d1[:, 1], d1[:, 0]], axis=1) / det[:, None]
        return np.stack([-g1 - g2, g1, g2], axis=1)

    def _assemble(self, local):
        rows = np.repeat(self.triangles, 3, axis=1).ravel()
        cols = np.tile(self.triangles, (1, 3)).ravel()
        n = self.n_nodes
        return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(n, n))

    def mass(self):
        """``M_ij = int phi_i phi_j``."""
        ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
        local = np.broadcast_to(self.element_area * ref, (len(self.triangles), 3, 3))
        return self._assemble(local)

    def lumped_mass(self):
        return np.asarray(self.mass().sum(axis=1)).ravel()

    def stiffness(self):
        """``K_ij = int grad phi_i . grad phi_j``."""
        g = self.element_gradients()
        local = self.element_area * np.einsum("tad,tbd->tab", g, g)
        return self._assemble(local)

    def advection(self, velocity):
        """``N_ij = int (v . grad phi_j) phi_i`` with the velocity taken at
        triangle centroids (one-point rule)."""
        c = self.centroids()
        v = np.asarray(velocity(c), dtype=float).reshape(len(c), 2)
        g = self.element_gradients()
        vg = np.einsum("td,tbd->tb", v, g)
        local = (self.element_area / 3.0) * np.broadcast_to(vg[:, None, :], (len(c), 3, 3))
        return self._assemble(local)

    def mass_factor(self):
        """Sparse ``G`` with ``G @ G.T == M`` built from element-wise
        Cholesky factors; shape ``(n_nodes, 3 * n_tri)``."""
        ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
        chol = np.linalg.cholesky(self.element_area * ref)
        n_tri = len(self.triangles)
        rows = np.repeat(self.triangles, 3, axis=1).ravel()
        cols = (3 * np.arange(n_tri)[:, None, None] + np.arange(3)[None, None, :])
        cols = np.broadcast_to(cols, (n_tri, 3, 3)).ravel()
        vals = np.broadcast_to(chol, (n_tri, 3, 3)).ravel()
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_nodes, 3 * n_tri))

    def locate(self, points):
        """Vectorized basis evaluation, see :func:`pathoed.kernels.locate_p1`."""
        return locate_p1(points, self.n_side)

    def eval_basis(self, x):
        nodes, weights, _, _ = self.locate(np.asarray(x, dtype=float).reshape(1, 2))
        return SparseVector(nodes[0], weights[0], self.n_nodes)

    def eval_basis_grad(self, x):
        nodes, _, grads, _ = self.locate(np.asarray(x, dtype=float).reshape(1, 2))
        return (SparseVector(nodes[0], grads[0, :, 0], self.n_nodes),
                SparseVector(nodes[0], grads[0, :, 1], self.n_nodes))

    def interpolate(self, func):
        """Nodal interpolant of ``func(points) -> values``."""
        return np.asarray(func(self.nodes), dtype=float).reshape(self.n_nodes)


def build_mesh(n_side):
    """Structured P1 mesh of the unit square with ``n_side**2`` nodes."""
    if int(n_side) != n_side or n_side < 2:
        raise ValueError(f"n_side must be an integer >= 2, got {n_side!r}")
    n_side = int(n_side)
    g = np.linspace(0.0, 1.0, n_side)
    xx, yy = np.meshgrid(g, g)
    nodes = np.column_stack([xx.ravel(), yy.ravel()])

    i, j = np.meshgrid(np.arange(n_side - 1), np.arange(n_side - 1))
    n00 = (j * n_side + i).ravel()
    n10, n01, n11 = n00 + 1, n00 + n_side, n00 + n_side + 1
    lower = np.column_stack([n00, n10, n11])
    upper = np.column_stack([n00, n11, n01])
    triangles = np.empty((2 * len(n00), 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper
    return StructuredMesh(n_side, nodes, triangles)

"""L2-orthonormal polynomial bases on cells and faces.

Bases start from scaled monomials ``((x - x_X)/h_X)^alpha`` in graded
lexicographic order and are orthonormalized with the inverse Cholesky factor
of the quadrature Gram matrix. Face bases live in the 2D frame coordinates of
the face, so tangential vector fields carry two frame components per scalar
mode. All mass matrices downstream are identities by construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
from scipy.linalg import cholesky, solve_triangular

from .mesh import PolyMesh
from .quadrature import QuadRule, cell_rule, face_rule

__all__ = [
    "ScalarBasis",
    "VectorBasis",
    "TangentBasis",
    "cell_scalar_basis",
    "cell_vector_basis",
    "face_scalar_basis",
    "face_tangent_basis",
    "graded_exponents",
    "poly_dim",
    "project",
]


def poly_dim(dim: int, degree: int) -> int:
    """Dimension of polynomials of total degree <= degree in `dim` variables."""
    if degree < 0:
        return 0
    return comb(degree + dim, dim)


def graded_exponents(dim: int, degree: int) -> np.ndarray:
    """Multi-indices of total degree <= degree, graded lexicographic order."""
    out = []
    for total in range(degree + 1):
        def rec(prefix, remaining, slots):
            if slots == 1:
                out.append(prefix + (remaining,))
                return
            for e in range(remaining, -1, -1):
                rec(prefix + (e,), remaining - e, slots - 1)
        rec((), total, dim)
    return np.array(out, dtype=int).reshape(len(out), dim)


def _vandermonde(exponents: np.ndarray, local: np.ndarray) -> np.ndarray:
    # local: (n, dim) -> (n, nmono)
    n, dim = local.shape
    V = np.ones((n, len(exponents)))
    for d in range(dim):
        emax = int(exponents[:, d].max(initial=0))
        powers = np.ones((n, emax + 1))
        for e in range(1, emax + 1):
            powers[:, e] = powers[:, e - 1] * local[:, d]
        V *= powers[:, exponents[:, d]]
    return V


def _vandermonde_grad(exponents: np.ndarray, local: np.ndarray) -> np.ndarray:
    # (n, nmono, dim), derivatives with respect to the local coordinates
    n, dim = local.shape
    G = np.empty((n, len(exponents), dim))
    for d in range(dim):
        shifted = exponents.copy()
        shifted[:, d] = np.maximum(shifted[:, d] - 1, 0)
        G[:, :, d] = exponents[:, d] * _vandermonde(shifted, local)
    return G


@dataclass(frozen=True)
class ScalarBasis:
    """Orthonormal scalar basis on one cell (dim 3) or one face (dim 2)."""

    center: np.ndarray
    scale: float
    degree: int
    exponents: np.ndarray
    coeffs: np.ndarray  # (nmono, n) columns are basis functions; upper triangular
    frame: np.ndarray | None = None  # (2, 3) rows tau1, tau2 for faces

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    def local_coords(self, points: np.ndarray) -> np.ndarray:
        rel = np.atleast_2d(points) - self.center
        if self.frame is not None:
            rel = rel @ self.frame.T
        return rel / self.scale

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Basis values at 3D points, shape (npts, n)."""
        return _vandermonde(self.exponents, self.local_coords(points)) @ self.coeffs

    def grad(self, points: np.ndarray) -> np.ndarray:
        """Gradients as 3D vectors, shape (npts, n, 3); tangential for faces."""
        G = _vandermonde_grad(self.exponents, self.local_coords(points))
        G = np.einsum("nmd,mj->njd", G, self.coeffs) / self.scale
        if self.frame is None:
            return G
        return np.einsum("njd,dk->njk", G, self.frame)

    def frame_grad(self, points: np.ndarray) -> np.ndarray:
        """Face-only: gradients in frame coordinates, shape (npts, n, 2)."""
        if self.frame is None:
            raise ValueError("frame_grad is defined for face bases only")
        G = _vandermonde_grad(self.exponents, self.local_coords(points))
        return np.einsum("nmd,mj->njd", G, self.coeffs) / self.scale


@dataclass(frozen=True)
class VectorBasis:
    """Cell vector basis: one block per Cartesian component of the scalar basis."""

    scalar: ScalarBasis

    @property
    def n(self) -> int:
        return 3 * self.scalar.n

    def eval(self, points: np.ndarray) -> np.ndarray:
        """(npts, 3*n_scalar, 3); block k holds the scalar basis times e_k."""
        S = self.scalar.eval(points)
        npts, ns = S.shape
        V = np.zeros((npts, 3 * ns, 3))
        for k in range(3):
            V[:, k * ns:(k + 1) * ns, k] = S
        return V

    def divergence(self, points: np.ndarray) -> np.ndarray:
        """(npts, 3*n_scalar)."""
        G = self.scalar.grad(points)
        npts, ns, _ = G.shape
        D = np.empty((npts, 3 * ns))
        for k in range(3):
            D[:, k * ns:(k + 1) * ns] = G[:, :, k]
        return D

    def curl(self, points: np.ndarray) -> np.ndarray:
        """(npts, 3*n_scalar, 3)."""
        G = self.scalar.grad(points)
        npts, ns, _ = G.shape
        C = np.zeros((npts, 3 * ns, 3))
        # curl(s e_k) = grad(s) x e_k
        for k in range(3):
            block = slice(k * ns, (k + 1) * ns)
            ek = np.zeros(3)
            ek[k] = 1.0
            C[:, block, :] = np.cross(G, ek[None, None, :])
        return C


@dataclass(frozen=True)
class TangentBasis:
    """Face tangential vector basis: two frame-component blocks per scalar basis."""

    scalar: ScalarBasis

    @property
    def n(self) -> int:
        return 2 * self.scalar.n

    def eval_frame(self, points: np.ndarray) -> np.ndarray:
        """(npts, 2*n_scalar, 2) in (tau1, tau2) coordinates."""
        S = self.scalar.eval(points)
        npts, ns = S.shape
        V = np.zeros((npts, 2 * ns, 2))
        V[:, :ns, 0] = S
        V[:, ns:, 1] = S
        return V

    def eval(self, points: np.ndarray) -> np.ndarray:
        """(npts, 2*n_scalar, 3) as physical tangent vectors."""
        F = self.eval_frame(points)
        return np.einsum("njd,dk->njk", F, self.scalar.frame)


def cell_scalar_basis(mesh: PolyMesh, cell_id: int, degree: int,
                      rule: QuadRule | None = None) -> ScalarBasis:
    T = mesh.cells[cell_id]
    if rule is None:
        rule = cell_rule(mesh, cell_id, 2 * degree)
    return _orthonormalize(T.x_T, T.h_T, degree, 3, None, rule)


def face_scalar_basis(mesh: PolyMesh, face_id: int, degree: int,
                      rule: QuadRule | None = None) -> ScalarBasis:
    F = mesh.faces[face_id]
    if rule is None:
        rule = face_rule(mesh, face_id, 2 * degree)
    frame = np.stack([F.tau1, F.tau2])
    return _orthonormalize(F.x_F, F.h_F, degree, 2, frame, rule)


def cell_vector_basis(mesh: PolyMesh, cell_id: int, degree: int,
                      rule: QuadRule | None = None) -> VectorBasis:
    return VectorBasis(cell_scalar_basis(mesh, cell_id, degree, rule))


def face_tangent_basis(mesh: PolyMesh, face_id: int, degree: int,
                       rule: QuadRule | None = None) -> TangentBasis:
    return TangentBasis(face_scalar_basis(mesh, face_id, degree, rule))


def _orthonormalize(center, scale, degree, dim, frame, rule: QuadRule) -> ScalarBasis:
    exponents = graded_exponents(dim, degree)
    raw = ScalarBasis(center=np.asarray(center, dtype=float), scale=float(scale),
                      degree=degree, exponents=exponents,
                      coeffs=np.eye(len(exponents)), frame=frame)
    V = _vandermonde(exponents, raw.local_coords(rule.points))
    G = V.T @ (rule.weights[:, None] * V)
    L = cholesky(G, lower=True)
    C = solve_triangular(L, np.eye(len(exponents)), lower=True).T
    return ScalarBasis(center=raw.center, scale=raw.scale, degree=degree,
                       exponents=exponents, coeffs=C, frame=frame)


def project(basis: ScalarBasis | VectorBasis | TangentBasis, rule: QuadRule,
            values: np.ndarray) -> np.ndarray:
    """L2 projection coefficients of sampled values onto an orthonormal basis.

    Scalar bases take values (npts,); vector bases take (npts, 3) physical
    samples; tangent bases take (npts, 2) frame-coordinate samples.
    """
    w = rule.weights
    if isinstance(basis, ScalarBasis):
        return basis.eval(rule.points).T @ (w * values)
    if isinstance(basis, VectorBasis):
        B = basis.eval(rule.points)
        return np.einsum("njk,n,nk->j", B, w, values)
    B = basis.eval_frame(rule.points)
    return np.einsum("njk,n,nk->j", B, w, values)

"""Positive-weight quadrature on polyhedral cells and polygonal faces.

Cells are integrated by pyramid decomposition about the star point: each face
is fanned into triangles about its frame origin and every triangle spans a
sub-tetrahedron with apex ``x_T``. Faces are integrated over the same fan.
The reference simplex rules are conical products of Gauss-Jacobi lines, so
weights are positive at every exactness degree.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .mesh import MeshError, PolyMesh

__all__ = ["QuadRule", "cell_rule", "face_rule", "reference_tet_rule", "reference_triangle_rule"]

DEGENERATE_TRI_RTOL = 1e-14  # fan triangle area threshold, relative to h_F^2


@dataclass(frozen=True)
class QuadRule:
    """Nodes (n, 3), positive weights (n,), and the guaranteed exactness degree."""

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        if np.any(self.weights <= 0.0):
            raise ValueError("quadrature weights must be positive")

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values: np.ndarray) -> float | np.ndarray:
        """Integrate sampled values; leading axis must match the node count."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def _gauss_01(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = roots_legendre(n)
    return (x + 1.0) / 2.0, w / 2.0

def _jacobi_01(n: int, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    # Weight (1 - u)^alpha on [0, 1].
    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def reference_tet_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Conical-product rule on the unit tetrahedron, exact to `degree`."""
    n = max(1, (degree + 2) // 2)
    u, wu = _jacobi_01(n, 2)
    v, wv = _jacobi_01(n, 1)
    w, ww = _gauss_01(n)
    U, V, W = np.meshgrid(u, v, w, indexing="ij")
    x = U
    y = V * (1.0 - U)
    z = W * (1.0 - U) * (1.0 - V)
    pts = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)
    wts = (wu[:, None, None] * wv[None, :, None] * ww[None, None, :]).ravel()
    return pts, wts


@lru_cache(maxsize=None)
def reference_triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Conical-product rule on the unit triangle, exact to `degree`."""
    n = max(1, (degree + 2) // 2)
    u, wu = _jacobi_01(n, 1)
    v, wv = _gauss_01(n)
    U, V = np.meshgrid(u, v, indexing="ij")
    x = U
    y = V * (1.0 - U)
    pts = np.stack([x.ravel(), y.ravel()], axis=1)
    wts = (wu[:, None] * wv[None, :]).ravel()
    return pts, wts


def _face_triangles(mesh: PolyMesh, face_id: int, cell_id: int | None = None) -> np.ndarray:
    """Fan triangles (x_F, v_i, v_{i+1}) as an (nt, 3, 3) array.

    With ``cell_id`` given, the loop is traversed outward from that cell so
    the sub-tetrahedra about its star point come out positively oriented.
    """
    F = mesh.faces[face_id]
    loop = F.coords
    if cell_id is not None and mesh.epsilon(cell_id, face_id) < 0.0:
        loop = loop[::-1]
    tri = np.empty((len(loop), 3, 3))
    tri[:, 0] = F.x_F
    tri[:, 1] = loop
    tri[:, 2] = np.roll(loop, -1, axis=0)
    return tri


def face_rule(mesh: PolyMesh, face_id: int, degree: int) -> QuadRule:
    """Quadrature over a face polygon; nodes are 3D points on the face plane."""
    F = mesh.faces[face_id]
    ref_pts, ref_wts = reference_triangle_rule(degree)
    tris = _face_triangles(mesh, face_id)
    pts, wts = [], []
    for t, (a, b, c) in enumerate(tris):
        area = 0.5 * np.linalg.norm(np.cross(b - a, c - a))
        if area <= DEGENERATE_TRI_RTOL * F.h_F**2:
            raise MeshError(
                f"face {face_id} fan triangle {t} is degenerate (area {area:.3e})"
            )
        pts.append(a + ref_pts[:, :1] * (b - a) + ref_pts[:, 1:] * (c - a))
        wts.append(2.0 * area * ref_wts)
    return QuadRule(points=np.vstack(pts), weights=np.concatenate(wts), degree=degree)


def cell_rule(mesh: PolyMesh, cell_id: int, degree: int) -> QuadRule:
    """Quadrature over a cell by sub-tetrahedra with apex at the star point."""
    T = mesh.cells[cell_id]
    ref_pts, ref_wts = reference_tet_rule(degree)
    pts, wts = [], []
    for face_id in T.face_ids:
        tris = _face_triangles(mesh, face_id, cell_id=cell_id)
        for t, (xf, a, b) in enumerate(tris):
            e1, e2, e3 = xf - T.x_T, a - T.x_T, b - T.x_T
            det = float(np.cross(e1, e2) @ e3)
            if det <= 0.0:
                raise MeshError(
                    f"cell {cell_id} sub-pyramid over face {face_id} triangle {t} "
                    f"has non-positive volume {det / 6.0:.3e}"
                )
            pts.append(T.x_T + ref_pts @ np.stack([e1, e2, e3]))
            wts.append(det * ref_wts)
    return QuadRule(points=np.vstack(pts), weights=np.concatenate(wts), degree=degree)

"""Direct splittings of vector polynomials and inverses of curl and div.

On a cell, vector polynomials of degree l split two ways: into gradients of
scalar polynomials plus a cross-product complement, and into curls of vector
polynomials plus a radial complement. On a face, tangential polynomials split
into rotated surface gradients plus an in-plane radial complement. The
differential operators restrict to isomorphisms from the complements onto
lower-degree targets; their assembled inverses carry mesh-size-scaled norm
bounds used by commutation and stability estimates.

Subspaces are stored as orthonormal coefficient columns with respect to the
orthonormal cell or face bases, so operator norms are plain singular values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import PolyMesh
from .polybasis import (
    ScalarBasis,
    TangentBasis,
    VectorBasis,
    cell_scalar_basis,
    cell_vector_basis,
    face_scalar_basis,
    face_tangent_basis,
    poly_dim,
)
from .quadrature import QuadRule, cell_rule, face_rule

__all__ = [
    "CellSplit",
    "FaceSplit",
    "OperatorInverse",
    "cell_split",
    "curl_inverse",
    "div_inverse",
    "dim_face_rotations",
    "dim_face_rotation_complement",
    "dim_gradients",
    "dim_gradient_complement",
    "dim_rotations",
    "dim_rotation_complement",
    "face_rotation_complement",
    "face_split",
]

SVD_RTOL = 1e-10  # relative singular-value threshold for rank decisions
DIV_INVERSE_FACTOR = 2.0 / 3.0  # norm bound factor, times h_T, for star-shaped cells


def dim_gradients(degree: int) -> int:
    return poly_dim(3, degree + 1) - 1


def dim_gradient_complement(degree: int) -> int:
    return 3 * poly_dim(3, degree) - dim_gradients(degree)


def dim_rotations(degree: int) -> int:
    return 3 * poly_dim(3, degree) - dim_rotation_complement(degree)


def dim_rotation_complement(degree: int) -> int:
    return poly_dim(3, degree - 1)


def dim_face_rotations(degree: int) -> int:
    return poly_dim(2, degree + 1) - 1


def dim_face_rotation_complement(degree: int) -> int:
    return poly_dim(2, degree - 1)


def _orthonormal_image(coeff_cols: np.ndarray, rtol: float = SVD_RTOL) -> np.ndarray:
    """Orthonormal basis of the column span, rank-revealed by SVD."""
    rows, cols = coeff_cols.shape
    if cols == 0:
        return np.zeros((rows, 0))
    U, s, _ = np.linalg.svd(coeff_cols, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((rows, 0))
    rank = int(np.sum(s > rtol * s[0]))
    return U[:, :rank]


def _pair_vec(rule: QuadRule, test: np.ndarray, trial: np.ndarray) -> np.ndarray:
    # test (n, a, k), trial (n, b, k) -> (a, b) quadrature L2 pairing
    return np.einsum("nak,n,nbk->ab", test, rule.weights, trial, optimize=True)


def _pair_scal(rule: QuadRule, test: np.ndarray, trial: np.ndarray) -> np.ndarray:
    return np.einsum("na,n,nb->ab", test, rule.weights, trial, optimize=True)


def _split_condition(a: np.ndarray, b: np.ndarray) -> float:
    s = np.linalg.svd(np.hstack([a, b]), compute_uv=False)
    if s.size == 0:
        return 1.0
    smin = s.min()
    return float("inf") if smin == 0.0 else float(s.max() / smin)


@dataclass(frozen=True)
class CellSplit:
    """Both direct splittings of degree-l vector polynomials on one cell."""

    cell_id: int
    degree: int
    basis: VectorBasis
    rule: QuadRule
    gradients: np.ndarray            # Grad of degree l+1 scalars
    gradient_complement: np.ndarray  # degree l-1 vectors crossed with (x - x_T)
    rotations: np.ndarray            # Curl of degree l+1 vectors
    rotation_complement: np.ndarray  # degree l-1 scalars times (x - x_T)
    gradient_split_cond: float
    rotation_split_cond: float


def cell_split(mesh: PolyMesh, cell_id: int, degree: int,
               rule: QuadRule | None = None) -> CellSplit:
    T = mesh.cells[cell_id]
    if rule is None:
        rule = cell_rule(mesh, cell_id, 2 * (degree + 1))
    pts, rel = rule.points, rule.points - T.x_T

    vec = cell_vector_basis(mesh, cell_id, degree, rule)
    B = vec.eval(pts)

    up = cell_scalar_basis(mesh, cell_id, degree + 1, rule)
    grads = _orthonormal_image(_pair_vec(rule, B, up.grad(pts)))

    down_vec = cell_vector_basis(mesh, cell_id, degree - 1, rule)
    crossed = np.cross(down_vec.eval(pts), rel[:, None, :])
    grad_comp = _orthonormal_image(_pair_vec(rule, B, crossed))

    up_vec = cell_vector_basis(mesh, cell_id, degree + 1, rule)
    rots = _orthonormal_image(_pair_vec(rule, B, up_vec.curl(pts)))

    down = cell_scalar_basis(mesh, cell_id, degree - 1, rule)
    radial = down.eval(pts)[:, :, None] * rel[:, None, :]
    rot_comp = _orthonormal_image(_pair_vec(rule, B, radial))

    return CellSplit(
        cell_id=cell_id, degree=degree, basis=vec, rule=rule,
        gradients=grads, gradient_complement=grad_comp,
        rotations=rots, rotation_complement=rot_comp,
        gradient_split_cond=_split_condition(grads, grad_comp),
        rotation_split_cond=_split_condition(rots, rot_comp),
    )


@dataclass(frozen=True)
class FaceSplit:
    """Splitting of degree-l tangential polynomials on one face."""

    face_id: int
    degree: int
    basis: TangentBasis
    rule: QuadRule
    rotations: np.ndarray            # rotated surface gradients of degree l+1 scalars
    rotation_complement: np.ndarray  # degree l-1 scalars times the in-plane position
    split_cond: float


def face_rotation_complement(basis: TangentBasis, rule: QuadRule,
                             comp_degree: int, mesh: PolyMesh,
                             face_id: int) -> np.ndarray:
    """Coefficient columns of degree `comp_degree - 1` scalars times (xi - xi_F)."""
    down = face_scalar_basis(mesh, face_id, comp_degree - 1, rule)
    xi = basis.scalar.local_coords(rule.points) * basis.scalar.scale
    radial = down.eval(rule.points)[:, :, None] * xi[:, None, :]
    frame_vals = basis.eval_frame(rule.points)
    return _orthonormal_image(_pair_vec(rule, frame_vals, radial))


def face_split(mesh: PolyMesh, face_id: int, degree: int,
               rule: QuadRule | None = None) -> FaceSplit:
    if rule is None:
        rule = face_rule(mesh, face_id, 2 * (degree + 1))
    pts = rule.points

    tangent = face_tangent_basis(mesh, face_id, degree, rule)
    frame_vals = tangent.eval_frame(pts)

    up = face_scalar_basis(mesh, face_id, degree + 1, rule)
    fg = up.frame_grad(pts)
    # in-plane rotation of the surface gradient: (d1, d2) -> (d2, -d1)
    rot = np.stack([fg[:, :, 1], -fg[:, :, 0]], axis=2)
    rots = _orthonormal_image(_pair_vec(rule, frame_vals, rot))

    comp = face_rotation_complement(tangent, rule, degree, mesh, face_id)

    return FaceSplit(face_id=face_id, degree=degree, basis=tangent, rule=rule,
                     rotations=rots, rotation_complement=comp,
                     split_cond=_split_condition(rots, comp))


@dataclass(frozen=True)
class OperatorInverse:
    """Inverse of a differential operator restricted to a complement subspace.

    `solve` maps target coefficients to source-basis coefficients; its largest
    singular value is the operator norm of the inverse. `image_defect` is the
    L2 mismatch between the operator image and the target span and must be at
    quadrature accuracy for the restriction to be the advertised isomorphism.
    """

    forward: np.ndarray
    solve: np.ndarray
    norm: float
    bound: float
    image_defect: float


def div_inverse(mesh: PolyMesh, cell_id: int, degree: int,
                split: CellSplit | None = None) -> OperatorInverse:
    """Inverse of divergence from the radial complement onto degree l-1 scalars."""
    T = mesh.cells[cell_id]
    bound = DIV_INVERSE_FACTOR * T.h_T
    if degree == 0:
        z = np.zeros((0, 0))
        return OperatorInverse(forward=z, solve=np.zeros((3, 0)), norm=0.0,
                               bound=bound, image_defect=0.0)
    if split is None:
        split = cell_split(mesh, cell_id, degree)
    rule, pts = split.rule, split.rule.points
    target = cell_scalar_basis(mesh, cell_id, degree - 1, rule)
    div_samples = split.basis.divergence(pts) @ split.rotation_complement
    fwd = _pair_scal(rule, target.eval(pts), div_samples)
    defect = div_samples - target.eval(pts) @ fwd
    image_defect = float(np.sqrt(max(np.einsum("na,n,na->", defect, rule.weights, defect), 0.0)))
    solve = split.rotation_complement @ np.linalg.inv(fwd)
    norm = float(np.linalg.svd(solve, compute_uv=False)[0])
    return OperatorInverse(forward=fwd, solve=solve, norm=norm, bound=bound,
                           image_defect=image_defect)


def curl_inverse(mesh: PolyMesh, cell_id: int, degree: int,
                 split: CellSplit | None = None) -> OperatorInverse:
    """Inverse of curl from the crossed complement onto degree l-1 rotations."""
    T = mesh.cells[cell_id]
    if degree == 0:
        z = np.zeros((0, 0))
        return OperatorInverse(forward=z, solve=np.zeros((3, 0)), norm=0.0,
                               bound=T.h_T, image_defect=0.0)
    if split is None:
        split = cell_split(mesh, cell_id, degree)
    rule, pts = split.rule, split.rule.points
    down_split = cell_split(mesh, cell_id, degree - 1, rule)
    curl_samples = np.einsum(
        "njk,ja->nak", split.basis.curl(pts), split.gradient_complement, optimize=True
    )
    down_vals = down_split.basis.eval(pts)
    in_down = _pair_vec(rule, down_vals, curl_samples)  # coeffs in the degree l-1 basis
    fwd = down_split.rotations.T @ in_down
    resid = in_down - down_split.rotations @ fwd
    image_defect = float(np.linalg.norm(resid))
    solve = split.gradient_complement @ np.linalg.inv(fwd)
    norm = float(np.linalg.svd(solve, compute_uv=False)[0])
    return OperatorInverse(forward=fwd, solve=solve, norm=norm, bound=T.h_T,
                           image_defect=image_defect)

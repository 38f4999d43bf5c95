"""Local lifts of hybrid unknowns into cell polynomial fields.

Two lifts per cell: a curl lift, defined by pairing against curls of a
target vector space with the tangential face unknowns supplying the
integration-by-parts boundary terms, and a div lift, defined by pairing
the eta-weighted cell field against gradients with the normal-trace
unknowns on the boundary. Composed with the reduction of a smooth field,
the div lift reproduces the projected divergence of the weighted field;
the curl lift reproduces the projected curl whenever the tangential face
space is full enough to hold the target test traces.

The module also provides the global boundedness constants of the lifts
against the hybrid seminorms (a quotient eigenvalue problem, solved in
`spectral`) and a discrete adjoint identity whose remainder is computable
and refines away, which is the quantitative form of the lifts' adjoint
consistency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hybridspace import HybridLayout, HybridVector, LocalForms
from .polybasis import ScalarBasis, VectorBasis, cell_scalar_basis
from .quadrature import cell_rule, face_rule
from .spectral import accumulate_blocks, assemble_global_forms, pencil_max

__all__ = [
    "ReconstructionOperator",
    "adjoint_consistency",
    "boundedness_constants",
    "build_cell_lifts",
    "build_curl_lift",
    "build_div_lift",
    "curl_commutation_defect",
    "defining_residual",
    "div_commutation_defect",
]


@dataclass(frozen=True)
class ReconstructionOperator:
    """Linear map from one cell's local DOF block to target coefficients.

    `local_idx` lists the full-layout DOFs the lift reads (cell block, then
    the face blocks in cell-face order); `matrix` maps them to coefficients
    in the orthonormal target basis, so coefficient norms are L2 norms.
    """

    kind: str  # "curl" or "div"
    cell_id: int
    degree: int
    matrix: np.ndarray
    local_idx: np.ndarray
    vec_basis: VectorBasis | None = None
    scal_basis: ScalarBasis | None = None

    def coefficients(self, vec: HybridVector | np.ndarray) -> np.ndarray:
        full = vec.expand() if isinstance(vec, HybridVector) else np.asarray(vec)
        return self.matrix @ full[self.local_idx]

    def evaluate(self, vec: HybridVector | np.ndarray,
                 points: np.ndarray) -> np.ndarray:
        c = self.coefficients(vec)
        if self.kind == "curl":
            return np.einsum("nak,a->nk", self.vec_basis.eval(points), c)
        return self.scal_basis.eval(points) @ c


def _check_target_degree(layout: HybridLayout, degree: int) -> None:
    if degree < 0:
        raise ValueError("target degree must be nonnegative")
    if 2 * degree > layout.quad_degree:
        raise ValueError(
            f"target degree {degree} needs quadrature degree >= {2 * degree}; "
            f"rebuild the layout with quad_degree={2 * degree}")


def build_curl_lift(layout: HybridLayout, cell_id: int, m: int,
                    target: VectorBasis | None = None) -> ReconstructionOperator:
    """Curl lift onto degree-m cell vector polynomials.

    Row a of the matrix realizes (cell field, curl of target_a) over the
    cell minus the orientation-signed pairings of the tangential face
    unknowns with the tangential trace of target_a over each face.
    """
    _check_target_degree(layout, m)
    mesh = layout.mesh
    co = layout.cells[cell_id]
    T = mesh.cells[cell_id]
    if target is None:
        target = VectorBasis(cell_scalar_basis(mesh, cell_id, m, co.rule))
    pts = co.rule.points
    blocks = [np.einsum("nak,n,nbk->ab", target.curl(pts), co.rule.weights,
                        co.vec.eval(pts), optimize=True)]
    idx = [np.arange(layout.cell_off[cell_id],
                     layout.cell_off[cell_id] + layout.cell_dim)]
    for f in T.face_ids:
        fo = layout.faces[f]
        F = mesh.faces[f]
        eps = mesh.epsilon(cell_id, f)
        fpts = fo.rule.points
        Vq = target.eval(fpts)
        tang = np.stack([Vq @ F.tau1, Vq @ F.tau2], axis=2)
        P = np.einsum("nak,n,nbk->ab", tang, fo.rule.weights,
                      fo.tangent.eval_frame(fpts), optimize=True)
        blocks.append(-eps * (P @ fo.q_cols))
        idx.append(np.arange(layout.tau_off[f],
                             layout.tau_off[f] + layout.tau_dims[f]))
    return ReconstructionOperator(kind="curl", cell_id=cell_id, degree=m,
                                  matrix=np.hstack(blocks),
                                  local_idx=np.concatenate(idx),
                                  vec_basis=target)


def build_div_lift(layout: HybridLayout, cell_id: int, p: int,
                   target: ScalarBasis | None = None) -> ReconstructionOperator:
    """Div lift onto degree-p cell scalar polynomials.

    Row a realizes minus the eta-weighted pairing of the cell field with
    the gradient of target_a plus the orientation-signed pairings of the
    normal-trace unknowns with target_a over each face.
    """
    if layout.curl_only:
        raise ValueError("a curl-only layout has no normal unknowns to lift")
    _check_target_degree(layout, p)
    mesh = layout.mesh
    co = layout.cells[cell_id]
    T = mesh.cells[cell_id]
    if target is None:
        target = cell_scalar_basis(mesh, cell_id, p, co.rule)
    pts = co.rule.points
    blocks = [-T.eta * np.einsum("nak,n,nbk->ab", target.grad(pts),
                                 co.rule.weights, co.vec.eval(pts),
                                 optimize=True)]
    idx = [np.arange(layout.cell_off[cell_id],
                     layout.cell_off[cell_id] + layout.cell_dim)]
    for f in T.face_ids:
        fo = layout.faces[f]
        eps = mesh.epsilon(cell_id, f)
        fpts = fo.rule.points
        blocks.append(eps * np.einsum("na,n,nb->ab", target.eval(fpts),
                                      fo.rule.weights, fo.scalar.eval(fpts),
                                      optimize=True))
        idx.append(np.arange(layout.nrm_off[f],
                             layout.nrm_off[f] + layout.nrm_dim))
    return ReconstructionOperator(kind="div", cell_id=cell_id, degree=p,
                                  matrix=np.hstack(blocks),
                                  local_idx=np.concatenate(idx),
                                  scal_basis=target)


def build_cell_lifts(layout: HybridLayout, m: int, p: int | None = None):
    """Both lifts for every cell, sharing the target scalar basis (and its
    Gram factorization) whenever the target degrees agree."""
    curls, divs = [], []
    for c in range(layout.mesh.n_cells):
        scal_m = cell_scalar_basis(layout.mesh, c, m, layout.cells[c].rule)
        curls.append(build_curl_lift(layout, c, m, target=VectorBasis(scal_m)))
        if p is not None and not layout.curl_only:
            scal_p = scal_m if p == m else cell_scalar_basis(
                layout.mesh, c, p, layout.cells[c].rule)
            divs.append(build_div_lift(layout, c, p, target=scal_p))
    return curls, divs


# ---------------------------------------------------------------------------
# dual-route diagnostics
# ---------------------------------------------------------------------------


def defining_residual(layout: HybridLayout, op: ReconstructionOperator,
                      vec: HybridVector | np.ndarray,
                      quad_degree: int | None = None) -> float:
    """Recompute the lift's defining right side with independent quadrature
    rules, solve against the target Gram matrix computed on those rules, and
    return the max deviation from the operator's coefficients. Machine-small
    values mean the two integration routes agree on every pairing."""
    full = vec.expand() if isinstance(vec, HybridVector) else np.asarray(vec)
    mesh = layout.mesh
    c = op.cell_id
    T = mesh.cells[c]
    qd = quad_degree if quad_degree is not None else layout.quad_degree + 3
    crule = cell_rule(mesh, c, qd)
    pts = crule.points
    cell_c = full[layout.cell_slice(c)]
    vvals = np.einsum("njk,j->nk", layout.cells[c].vec.eval(pts), cell_c)

    if op.kind == "curl":
        target = op.vec_basis
        rhs = np.einsum("nak,n,nk->a", target.curl(pts), crule.weights, vvals,
                        optimize=True)
        gram = np.einsum("nak,n,nbk->ab", target.eval(pts), crule.weights,
                         target.eval(pts), optimize=True)
        for f in T.face_ids:
            fo = layout.faces[f]
            F = mesh.faces[f]
            eps = mesh.epsilon(c, f)
            frule = face_rule(mesh, f, qd)
            fpts = frule.points
            Vq = target.eval(fpts)
            tang = np.stack([Vq @ F.tau1, Vq @ F.tau2], axis=2)
            t_full = fo.q_cols @ full[layout.tau_slice(f)]
            tvals = np.einsum("nak,a->nk", fo.tangent.eval_frame(fpts), t_full)
            rhs -= eps * np.einsum("nak,n,nk->a", tang, frule.weights, tvals,
                                   optimize=True)
    else:
        target = op.scal_basis
        rhs = -T.eta * np.einsum("nak,n,nk->a", target.grad(pts),
                                 crule.weights, vvals, optimize=True)
        gram = np.einsum("na,n,nb->ab", target.eval(pts), crule.weights,
                         target.eval(pts), optimize=True)
        for f in T.face_ids:
            fo = layout.faces[f]
            eps = mesh.epsilon(c, f)
            frule = face_rule(mesh, f, qd)
            fpts = frule.points
            nvals = fo.scalar.eval(fpts) @ full[layout.nrm_slice(f)]
            rhs += eps * np.einsum("na,n,n->a", target.eval(fpts),
                                   frule.weights, nvals, optimize=True)

    coeffs = np.linalg.solve(gram, rhs)
    return float(np.abs(coeffs - op.matrix @ full[op.local_idx]).max(initial=0.0))


def curl_commutation_defect(layout: HybridLayout, vec: HybridVector,
                            cell_id: int, m: int, curl_field) -> float:
    """L2 distance between the curl lift of a reduced field and the
    projection of the field's curl onto the target space."""
    op = build_curl_lift(layout, cell_id, m)
    have = op.coefficients(vec)
    rule = layout.cells[cell_id].rule
    want = np.einsum("nak,n,nk->a", op.vec_basis.eval(rule.points),
                     rule.weights, np.asarray(curl_field(rule.points)),
                     optimize=True)
    return float(np.linalg.norm(have - want))


def div_commutation_defect(layout: HybridLayout, vec: HybridVector,
                           cell_id: int, p: int, div_eta_field) -> float:
    """L2 distance between the div lift of a reduced field and the projected
    divergence of the eta-weighted field (callable of physical points)."""
    op = build_div_lift(layout, cell_id, p)
    have = op.coefficients(vec)
    rule = layout.cells[cell_id].rule
    want = op.scal_basis.eval(rule.points).T @ (
        rule.weights * np.asarray(div_eta_field(rule.points)))
    return float(np.linalg.norm(have - want))


# ---------------------------------------------------------------------------
# global boundedness
# ---------------------------------------------------------------------------


def boundedness_constants(layout: HybridLayout, forms: list[LocalForms],
                          m: int | None = None, p: int | None = None, *,
                          reverse: bool = False, dense_cutoff: int = 4000,
                          seed: int = 0) -> dict:
    """Sharp constants bounding lift energy by the hybrid seminorms.

    The curl bound is the largest eigenvalue of the cellwise lift-plus-
    penalty form against the squared curl seminorm (a quotient pencil: both
    forms share the seminorm's kernel, and the solver falsifies the
    containment if the left form leaks onto it). The div bound is the
    analogue with the div lift. With `reverse=True` the transposed pencils
    are solved as well, which is meaningful when the tangential face space
    is full enough for the lift to control the seminorm.
    """
    if m is None:
        m = layout.degree
    if p is None:
        p = layout.degree
    gf = assemble_global_forms(layout, forms)
    curls, divs = build_cell_lifts(layout, m, None if layout.curl_only else p)
    n = layout.cell_dim

    def curl_entries():
        for lf, op in zip(forms, curls):
            B = lf.stab_curl + op.matrix.T @ op.matrix
            yield lf.curl_idx, B

    L_curl = accumulate_blocks(layout.n_free, layout.full_to_free,
                               curl_entries())
    res_c = pencil_max(L_curl, gf.A_curl, dense_cutoff=dense_cutoff,
                       seed=seed, label="curl-lift boundedness")
    out = {
        "curl_bound": float(np.sqrt(max(res_c.value, 0.0))),
        "curl_lambda": res_c.value,
        "curl_residual": res_c.residual,
        "dense": res_c.dense,
        "n_free": layout.n_free,
        "target_degrees": (m, p),
    }
    if not layout.curl_only:
        def div_entries():
            for lf, op in zip(forms, divs):
                B = lf.stab_div + op.matrix.T @ op.matrix
                yield lf.div_idx, B

        L_div = accumulate_blocks(layout.n_free, layout.full_to_free,
                                  div_entries())
        res_d = pencil_max(L_div, gf.A_div, dense_cutoff=dense_cutoff,
                           seed=seed, label="div-lift boundedness")
        out.update(div_bound=float(np.sqrt(max(res_d.value, 0.0))),
                   div_lambda=res_d.value, div_residual=res_d.residual)
    if reverse:
        rev_c = pencil_max(gf.A_curl, L_curl, dense_cutoff=dense_cutoff,
                           seed=seed, label="curl-lift reverse bound")
        out["curl_reverse_bound"] = float(np.sqrt(max(rev_c.value, 0.0)))
        if not layout.curl_only:
            rev_d = pencil_max(gf.A_div, L_div, dense_cutoff=dense_cutoff,
                               seed=seed, label="div-lift reverse bound")
            out["div_reverse_bound"] = float(np.sqrt(max(rev_d.value, 0.0)))
    return out


# ---------------------------------------------------------------------------
# adjoint consistency
# ---------------------------------------------------------------------------


def adjoint_consistency(layout: HybridLayout, vec: HybridVector, z, curl_z,
                        m: int | None = None) -> dict:
    """Discrete integration-by-parts identity for the curl lift.

    For a layout with tangential essential conditions, the global pairing
    of the curl lift with a smooth field z equals the pairing of the cell
    unknowns with curl z plus a computable remainder: the broken cell curl
    against the projection defect of z, plus face pairings of the
    tangential trace jumps against the tangential projection defect. The
    returned residual is the identity defect; it vanishes to quadrature
    accuracy (machine precision when z is a polynomial resolved by the
    layout's rules). The remainder itself shrinks under refinement at the
    lift's approximation order.
    """
    if layout.bc != "tangential":
        raise ValueError("the adjoint identity needs tangential essential "
                         "conditions (boundary tangential unknowns vanish)")
    if m is None:
        m = layout.degree
    mesh = layout.mesh
    full = vec.expand()
    lift_pairing = 0.0
    field_pairing = 0.0
    rem_cells = 0.0
    rem_faces = 0.0
    for c in range(mesh.n_cells):
        co = layout.cells[c]
        op = build_curl_lift(layout, c, m)
        rule = co.rule
        pts, w = rule.points, rule.weights
        zvals = np.asarray(z(pts))
        cvals = np.asarray(curl_z(pts))
        cell_c = full[layout.cell_slice(c)]

        coeffs = op.coefficients(full)
        target = op.vec_basis
        Vt = target.eval(pts)
        lift_vals = np.einsum("nak,a->nk", Vt, coeffs)
        lift_pairing += float(np.einsum("nk,n,nk->", lift_vals, w, zvals))

        vvals = np.einsum("njk,j->nk", co.vec.eval(pts), cell_c)
        field_pairing += float(np.einsum("nk,n,nk->", vvals, w, cvals))

        zc = np.einsum("nak,n,nk->a", Vt, w, zvals, optimize=True)
        proj_defect = np.einsum("nak,a->nk", Vt, zc) - zvals
        curl_vals = np.einsum("nak,a->nk", co.vec.curl(pts), cell_c)
        rem_cells += float(np.einsum("nk,n,nk->", curl_vals, w, proj_defect))

        T = mesh.cells[c]
        for f in T.face_ids:
            fo = layout.faces[f]
            F = mesh.faces[f]
            eps = mesh.epsilon(c, f)
            fpts, fw = fo.rule.points, fo.rule.weights
            Vc = co.vec.eval(fpts)
            a = Vc @ F.tau1
            b = Vc @ F.tau2
            trace_rot = np.einsum("naq,a->nq", np.stack([b, -a], axis=2),
                                  cell_c)
            t_full = fo.q_cols @ full[layout.tau_slice(f)]
            face_rot = np.einsum("naq,a->nq", fo.tangent.eval_frame(fpts),
                                 t_full)
            jump = trace_rot - face_rot
            zdef = np.einsum("nak,a->nk", target.eval(fpts), zc) \
                - np.asarray(z(fpts))
            zdef_t = np.stack([zdef @ F.tau1, zdef @ F.tau2], axis=1)
            rem_faces += eps * float(np.einsum("nq,n,nq->", jump, fw, zdef_t))

    remainder = rem_cells + rem_faces
    return {
        "lift_pairing": lift_pairing,
        "field_pairing": field_pairing,
        "remainder": remainder,
        "remainder_cells": rem_cells,
        "remainder_faces": rem_faces,
        "residual": abs(lift_pairing - field_pairing - remainder),
    }

"""Hybrid cell-plus-face spaces with stabilized curl and div seminorms.

A hybrid vector carries one vector polynomial per cell, a tangential
polynomial per face holding the rotated trace v x n in frame coordinates,
and a scalar polynomial per face holding the weighted normal trace. The
tangential face space is policy-dependent: anything between the rotated
surface gradients and the full tangential space is stability-compatible.
Least-squares face penalties tie cell traces to face unknowns; they vanish
identically on reductions of degree-l polynomials, which is what makes the
seminorms consistent.

All coefficient blocks refer to the orthonormal bases of `polybasis`, so
face L2 products are Euclidean and mass matrices are identities.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .koszul import (
    FaceSplit,
    dim_face_rotation_complement,
    dim_face_rotations,
    face_rotation_complement,
    face_split,
)
from .mesh import MeshError, PolyMesh
from .polybasis import (
    ScalarBasis,
    TangentBasis,
    VectorBasis,
    cell_scalar_basis,
    cell_vector_basis,
    poly_dim,
)
from .quadrature import QuadRule, cell_rule, face_rule

__all__ = [
    "FaceSpacePolicy",
    "HybridLayout",
    "HybridVector",
    "KernelContainmentError",
    "LocalForms",
    "assemble_local_forms",
    "build_layout",
    "cell_field",
    "flux_functionals",
    "flux_vectors",
    "jump_control_constant",
    "policy_containment_defect",
    "random_vector",
    "reduce",
    "seminorms",
    "zeros",
]

MAX_DEGREE = 4
BC_FLAVORS = ("none", "tangential", "normal")

_TRIMMED_RE = re.compile(r"^trimmed\((\d+)\)$")


class KernelContainmentError(AssertionError):
    """The unprojected tangential jump fails to vanish on the stability kernel.

    Raised when the face policy does not contain the rotated surface
    gradients, so tangential traces of curl-free cell fields escape the face
    space and the jump-control estimate breaks down.
    """


@dataclass(frozen=True)
class FaceSpacePolicy:
    """Choice of the tangential face space between rotated gradients and full.

    Selectors: `minimal` (rotated surface gradients only), `trimmed` with a
    trim degree k (rotated gradients plus the degree-k radial complement,
    0 <= k <= l), `full` (all tangential polynomials), and the deliberately
    illegal `deficient` (one rotated-gradient direction dropped; negative
    tests only).
    """

    selector: str
    trim_degree: int | None = None

    def __post_init__(self):
        if self.selector not in ("minimal", "trimmed", "full", "deficient"):
            raise ValueError(f"unknown face-space policy {self.selector!r}")
        if self.selector == "trimmed":
            if self.trim_degree is None or self.trim_degree < 0:
                raise ValueError("trimmed policy needs a trim degree >= 0")
        elif self.trim_degree is not None:
            raise ValueError("trim degree only applies to the trimmed policy")

    @classmethod
    def parse(cls, text: str | FaceSpacePolicy) -> FaceSpacePolicy:
        if isinstance(text, FaceSpacePolicy):
            return text
        text = text.strip()
        m = _TRIMMED_RE.match(text)
        if m:
            return cls("trimmed", int(m.group(1)))
        return cls(text)

    @property
    def label(self) -> str:
        if self.selector == "trimmed":
            return f"trimmed({self.trim_degree})"
        return self.selector


@dataclass(frozen=True)
class FaceOps:
    """Per-face bases and the policy-selected tangential subspace."""

    face_id: int
    rule: QuadRule
    scalar: ScalarBasis
    tangent: TangentBasis
    q_cols: np.ndarray    # tangential face space, orthonormal columns
    rot_cols: np.ndarray  # rotated surface gradients, orthonormal columns


@dataclass(frozen=True)
class CellOps:
    """Per-cell basis, differential maps, and per-face trace matrices.

    `tau_trace[F]` maps cell coefficients to the full tangential-basis
    coefficients of the rotated trace v|F x n_F; `nrm_trace[F]` maps them to
    face-scalar coefficients of v|F . n_F (unweighted; the cell eta is
    applied where the weighted trace is needed).
    """

    cell_id: int
    rule: QuadRule
    vec: VectorBasis
    curl_map: np.ndarray
    div_map: np.ndarray
    tau_trace: dict[int, np.ndarray]
    nrm_trace: dict[int, np.ndarray]


@dataclass
class HybridLayout:
    """Global DOF layout: cell blocks, then per face a tangential block and,
    unless the layout is curl-only, a normal block. Boundary-condition
    flavors fix the corresponding boundary-face blocks; fixed DOFs are
    eliminated from the free index set, not penalized."""

    mesh: PolyMesh
    degree: int
    policy: FaceSpacePolicy
    bc: str
    curl_only: bool
    quad_degree: int
    cell_dim: int
    nrm_dim: int
    tau_dims: np.ndarray
    cell_off: np.ndarray
    tau_off: np.ndarray
    nrm_off: np.ndarray
    total: int
    fixed_mask: np.ndarray
    free_to_full: np.ndarray
    full_to_free: np.ndarray
    faces: list[FaceOps] = field(repr=False)
    cells: list[CellOps] = field(repr=False)

    @property
    def n_free(self) -> int:
        return len(self.free_to_full)

    def cell_slice(self, cell_id: int) -> slice:
        o = self.cell_off[cell_id]
        return slice(o, o + self.cell_dim)

    def tau_slice(self, face_id: int) -> slice:
        o = self.tau_off[face_id]
        return slice(o, o + self.tau_dims[face_id])

    def nrm_slice(self, face_id: int) -> slice:
        o = self.nrm_off[face_id]
        return slice(o, o + self.nrm_dim)

    def expand(self, free_coeffs: np.ndarray) -> np.ndarray:
        full = np.zeros(self.total)
        full[self.free_to_full] = free_coeffs
        return full

    def restrict(self, full: np.ndarray) -> np.ndarray:
        return np.asarray(full)[self.free_to_full]


@dataclass
class HybridVector:
    """Coefficients over the free DOFs of a layout; value-semantic."""

    layout: HybridLayout
    coeffs: np.ndarray
    bc_defect: float = 0.0

    def __post_init__(self):
        if len(self.coeffs) != self.layout.n_free:
            raise ValueError("coefficient length does not match the free-DOF count")

    def expand(self) -> np.ndarray:
        return self.layout.expand(self.coeffs)

    def copy(self) -> HybridVector:
        return HybridVector(self.layout, self.coeffs.copy(), self.bc_defect)

    def __add__(self, other: HybridVector) -> HybridVector:
        return HybridVector(self.layout, self.coeffs + other.coeffs)

    def __sub__(self, other: HybridVector) -> HybridVector:
        return HybridVector(self.layout, self.coeffs - other.coeffs)

    def __mul__(self, s: float) -> HybridVector:
        return HybridVector(self.layout, self.coeffs * s)

    __rmul__ = __mul__


def zeros(layout: HybridLayout) -> HybridVector:
    return HybridVector(layout, np.zeros(layout.n_free))


def random_vector(layout: HybridLayout, rng: np.random.Generator) -> HybridVector:
    return HybridVector(layout, rng.standard_normal(layout.n_free))


def _pair(rule: QuadRule, test: np.ndarray, trial: np.ndarray) -> np.ndarray:
    if test.ndim == 2:
        return np.einsum("na,n,nb->ab", test, rule.weights, trial, optimize=True)
    return np.einsum("nak,n,nbk->ab", test, rule.weights, trial, optimize=True)


def _policy_columns(policy: FaceSpacePolicy, split: FaceSplit, degree: int,
                    mesh: PolyMesh, face_id: int) -> np.ndarray:
    if policy.selector == "minimal":
        return split.rotations
    if policy.selector == "full":
        return np.eye(split.basis.n)
    if policy.selector == "deficient":
        return split.rotations[:, :-1]
    k = policy.trim_degree
    if k > degree:
        raise ValueError(f"trim degree {k} exceeds the space degree {degree}")
    if k == 0:
        return split.rotations
    comp = face_rotation_complement(split.basis, split.rule, k, mesh, face_id)
    stacked = np.hstack([split.rotations, comp])
    U, s, _ = np.linalg.svd(stacked, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * s[0]))
    want = dim_face_rotations(degree) + dim_face_rotation_complement(k)
    if rank != want:
        raise RuntimeError(
            f"face {face_id}: trimmed({k}) space rank {rank}, expected {want}"
        )
    return U[:, :rank]


def build_layout(mesh: PolyMesh, degree: int,
                 policy: str | FaceSpacePolicy = "minimal",
                 bc: str = "none", curl_only: bool = False,
                 quad_degree: int | None = None) -> HybridLayout:
    """Build the DOF layout plus all per-entity bases and trace matrices."""
    if not 0 <= degree <= MAX_DEGREE:
        raise ValueError(f"unsupported degree {degree} (0..{MAX_DEGREE})")
    if bc not in BC_FLAVORS:
        raise ValueError(f"unknown bc flavor {bc!r}")
    if curl_only and bc == "normal":
        raise ValueError("a curl-only layout has no normal DOFs to constrain")
    policy = FaceSpacePolicy.parse(policy)
    qd = max(quad_degree or 0, 2 * degree + 2)

    faces: list[FaceOps] = []
    for f in range(mesh.n_faces):
        frule = face_rule(mesh, f, qd)
        split = face_split(mesh, f, degree, frule)
        q_cols = _policy_columns(policy, split, degree, mesh, f)
        faces.append(FaceOps(face_id=f, rule=frule, scalar=split.basis.scalar,
                             tangent=split.basis, q_cols=q_cols,
                             rot_cols=split.rotations))

    cell_dim = 3 * poly_dim(3, degree)
    nrm_dim = 0 if curl_only else poly_dim(2, degree)
    tau_dims = np.array([fo.q_cols.shape[1] for fo in faces], dtype=int)

    cells: list[CellOps] = []
    for c in range(mesh.n_cells):
        crule = cell_rule(mesh, c, qd)
        vec = cell_vector_basis(mesh, c, degree, crule)
        down_vec = cell_vector_basis(mesh, c, degree - 1, crule)
        down_scal = cell_scalar_basis(mesh, c, degree - 1, crule)
        pts = crule.points
        curl_map = _pair(crule, down_vec.eval(pts), vec.curl(pts))
        div_map = _pair(crule, down_scal.eval(pts), vec.divergence(pts))
        tau_trace, nrm_trace = {}, {}
        for f in mesh.cells[c].face_ids:
            fo = faces[f]
            F = mesh.faces[f]
            fpts = fo.rule.points
            V = vec.eval(fpts)
            a = V @ F.tau1
            b = V @ F.tau2
            # v x n has frame coordinates (b, -a) in the right-handed frame
            rot = np.stack([b, -a], axis=2)
            tau_trace[f] = _pair(fo.rule, fo.tangent.eval_frame(fpts), rot)
            nrm_trace[f] = _pair(fo.rule, fo.scalar.eval(fpts), V @ F.normal)
        cells.append(CellOps(cell_id=c, rule=crule, vec=vec, curl_map=curl_map,
                             div_map=div_map, tau_trace=tau_trace,
                             nrm_trace=nrm_trace))

    cell_off = np.arange(mesh.n_cells, dtype=int) * cell_dim
    pos = mesh.n_cells * cell_dim
    tau_off = np.empty(mesh.n_faces, dtype=int)
    nrm_off = np.empty(mesh.n_faces, dtype=int)
    for f in range(mesh.n_faces):
        tau_off[f] = pos
        pos += tau_dims[f]
        nrm_off[f] = pos
        pos += nrm_dim
    total = pos

    fixed = np.zeros(total, dtype=bool)
    if bc != "none":
        for f in mesh.boundary_faces:
            if bc == "tangential":
                fixed[tau_off[f]:tau_off[f] + tau_dims[f]] = True
            else:
                fixed[nrm_off[f]:nrm_off[f] + nrm_dim] = True
    free_to_full = np.flatnonzero(~fixed)
    full_to_free = np.full(total, -1, dtype=int)
    full_to_free[free_to_full] = np.arange(len(free_to_full))

    return HybridLayout(mesh=mesh, degree=degree, policy=policy, bc=bc,
                        curl_only=curl_only, quad_degree=qd, cell_dim=cell_dim,
                        nrm_dim=nrm_dim, tau_dims=tau_dims, cell_off=cell_off,
                        tau_off=tau_off, nrm_off=nrm_off, total=total,
                        fixed_mask=fixed, free_to_full=free_to_full,
                        full_to_free=full_to_free, faces=faces, cells=cells)


def reduce(v, layout: HybridLayout, eta_times_v=None) -> HybridVector:
    """Reduction of an evaluable field onto the hybrid DOF blocks.

    Cell blocks are L2 projections of v; tangential blocks are face-space
    projections of the rotated trace v x n_F in frame coordinates; normal
    blocks are projections of the weighted normal trace. Where eta jumps
    across a face the single-valued flux must be supplied via `eta_times_v`;
    otherwise the side of the first incident cell is used. Fixed DOFs that
    come out nonzero are zeroed and the magnitude reported in `bc_defect`.
    """
    mesh = layout.mesh
    full = np.zeros(layout.total)
    for c, co in enumerate(layout.cells):
        pts = co.rule.points
        full[layout.cell_slice(c)] = np.einsum(
            "njk,n,nk->j", co.vec.eval(pts), co.rule.weights, np.asarray(v(pts)),
            optimize=True)
    for f, fo in enumerate(layout.faces):
        F = mesh.faces[f]
        pts = fo.rule.points
        vals = np.asarray(v(pts))
        a = vals @ F.tau1
        b = vals @ F.tau2
        rot = np.stack([b, -a], axis=1)
        t_full = np.einsum("njk,n,nk->j", fo.tangent.eval_frame(pts),
                           fo.rule.weights, rot, optimize=True)
        full[layout.tau_slice(f)] = fo.q_cols.T @ t_full
        if layout.curl_only:
            continue
        if eta_times_v is not None:
            flux = np.asarray(eta_times_v(pts)) @ F.normal
        else:
            flux = mesh.cells[F.cells[0]].eta * (vals @ F.normal)
        full[layout.nrm_slice(f)] = fo.scalar.eval(pts).T @ (fo.rule.weights * flux)

    bc_defect = float(np.abs(full[layout.fixed_mask]).max(initial=0.0))
    return HybridVector(layout, full[layout.free_to_full], bc_defect=bc_defect)


def local_interpolate(layout: HybridLayout, cell_id: int, v) -> np.ndarray:
    """Single-cell reduction of an evaluable field, as a full-length DOF
    array with only this cell's blocks filled.

    The normal blocks carry this cell's own eta, which is what the per-cell
    consistency statements are about: where eta jumps across a face the two
    cells have different local interpolates, and each cell's stabilization
    must vanish on its own.
    """
    mesh = layout.mesh
    T = mesh.cells[cell_id]
    co = layout.cells[cell_id]
    full = np.zeros(layout.total)
    pts = co.rule.points
    full[layout.cell_slice(cell_id)] = np.einsum(
        "njk,n,nk->j", co.vec.eval(pts), co.rule.weights, np.asarray(v(pts)),
        optimize=True)
    for f in T.face_ids:
        F = mesh.faces[f]
        fo = layout.faces[f]
        fpts = fo.rule.points
        vals = np.asarray(v(fpts))
        a = vals @ F.tau1
        b = vals @ F.tau2
        rot = np.stack([b, -a], axis=1)
        t_full = np.einsum("njk,n,nk->j", fo.tangent.eval_frame(fpts),
                           fo.rule.weights, rot, optimize=True)
        full[layout.tau_slice(f)] = fo.q_cols.T @ t_full
        if not layout.curl_only:
            flux = T.eta * (vals @ F.normal)
            full[layout.nrm_slice(f)] = fo.scalar.eval(fpts).T @ (
                fo.rule.weights * flux)
    return full


@dataclass(frozen=True)
class LocalForms:
    """Per-cell volumetric maps and face-penalty matrices.

    `stab_curl` acts on the local block (cell DOFs, then the tangential
    blocks of the cell's faces in face order); `stab_div` on (cell DOFs,
    then normal blocks). `curl_idx`/`div_idx` give the matching full-layout
    indices. Both penalty matrices are positive semi-definite.
    """

    cell_id: int
    eta: float
    curl_map: np.ndarray
    div_map: np.ndarray
    stab_curl: np.ndarray
    stab_div: np.ndarray | None
    curl_idx: np.ndarray
    div_idx: np.ndarray | None


def _local_forms_for_cell(layout: HybridLayout, c: int) -> LocalForms:
    mesh = layout.mesh
    co = layout.cells[c]
    T = mesh.cells[c]
    n = layout.cell_dim

    nc = n + int(sum(layout.tau_dims[f] for f in T.face_ids))
    s_curl = np.zeros((nc, nc))
    curl_idx = np.empty(nc, dtype=int)
    curl_idx[:n] = np.arange(layout.cell_off[c], layout.cell_off[c] + n)
    o = n
    for f in T.face_ids:
        fo = layout.faces[f]
        q = layout.tau_dims[f]
        w = 1.0 / mesh.faces[f].h_F
        P = fo.q_cols.T @ co.tau_trace[f]
        s_curl[:n, :n] += w * (P.T @ P)
        s_curl[:n, o:o + q] -= w * P.T
        s_curl[o:o + q, :n] -= w * P
        s_curl[o:o + q, o:o + q] += w * np.eye(q)
        curl_idx[o:o + q] = np.arange(layout.tau_off[f], layout.tau_off[f] + q)
        o += q

    if layout.curl_only:
        s_div, div_idx = None, None
    else:
        m = layout.nrm_dim
        nd = n + m * len(T.face_ids)
        s_div = np.zeros((nd, nd))
        div_idx = np.empty(nd, dtype=int)
        div_idx[:n] = curl_idx[:n]
        o = n
        for f in T.face_ids:
            w = 1.0 / mesh.faces[f].h_F
            N = T.eta * co.nrm_trace[f]
            s_div[:n, :n] += w * (N.T @ N)
            s_div[:n, o:o + m] -= w * N.T
            s_div[o:o + m, :n] -= w * N
            s_div[o:o + m, o:o + m] += w * np.eye(m)
            div_idx[o:o + m] = np.arange(layout.nrm_off[f], layout.nrm_off[f] + m)
            o += m

    return LocalForms(cell_id=c, eta=T.eta, curl_map=co.curl_map,
                      div_map=co.div_map, stab_curl=s_curl, stab_div=s_div,
                      curl_idx=curl_idx, div_idx=div_idx)


def assemble_local_forms(layout: HybridLayout, threads: int = 1) -> list[LocalForms]:
    ids = range(layout.mesh.n_cells)
    if threads <= 1:
        return [_local_forms_for_cell(layout, c) for c in ids]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda c: _local_forms_for_cell(layout, c), ids))


def seminorms(layout: HybridLayout, forms: list[LocalForms],
              vec: HybridVector) -> dict[str, float]:
    """Hybrid curl/div seminorms, the weighted L2 norm, and the X-norm.

    Penalty terms are evaluated in factored least-squares form (trace minus
    face unknown, then squared), which keeps interpolates of polynomials at
    machine-zero instead of the assembled matrices' cancellation level.
    """
    mesh = layout.mesh
    full = vec.expand()
    curl2 = div2 = mass2 = 0.0
    for lf in forms:
        c = full[layout.cell_slice(lf.cell_id)]
        co = layout.cells[lf.cell_id]
        mass2 += lf.eta * float(c @ c)
        kc = lf.curl_map @ c
        curl2 += float(kc @ kc)
        if not layout.curl_only:
            dc = lf.eta * (lf.div_map @ c)
            div2 += float(dc @ dc)
        for f in mesh.cells[lf.cell_id].face_ids:
            fo = layout.faces[f]
            w = 1.0 / mesh.faces[f].h_F
            jump_t = fo.q_cols.T @ (co.tau_trace[f] @ c) - full[layout.tau_slice(f)]
            curl2 += w * float(jump_t @ jump_t)
            if not layout.curl_only:
                jump_n = lf.eta * (co.nrm_trace[f] @ c) - full[layout.nrm_slice(f)]
                div2 += w * float(jump_n @ jump_n)
    out = {"curl": float(np.sqrt(max(curl2, 0.0))),
           "l2_eta": float(np.sqrt(max(mass2, 0.0)))}
    if not layout.curl_only:
        out["div"] = float(np.sqrt(max(div2, 0.0)))
        x2 = mass2 + div2 / mesh.eta_min + mesh.eta_max * curl2
        out["x"] = float(np.sqrt(max(x2, 0.0)))
    return out


def flux_vectors(layout: HybridLayout, kind: str) -> list[np.ndarray]:
    """Full-layout vectors g with g . dofs = integral of the normal trace
    over each boundary component (kind 'tangential', components beyond the
    outer one) or each cut surface (kind 'normal')."""
    if layout.curl_only:
        raise ValueError("curl-only layouts carry no normal traces")
    mesh = layout.mesh
    if kind == "tangential":
        face_sets = [set(fs) for fs in mesh.gamma_sets[1:]]
    elif kind == "normal":
        if mesh.beta1 > len(mesh.sigma_sets):
            raise MeshError(
                f"mesh has beta1 = {mesh.beta1} but only {len(mesh.sigma_sets)} "
                "tagged cut surfaces; normal-flavor flux functionals need the tags"
            )
        face_sets = [set(s.face_ids) for s in mesh.sigma_sets]
    else:
        raise ValueError(f"unknown flux kind {kind!r}")
    out = []
    for fs in face_sets:
        g = np.zeros(layout.total)
        for f in sorted(fs):
            # the constant face mode integrates to sqrt(area)
            g[layout.nrm_off[f]] = np.sqrt(mesh.faces[f].area)
        out.append(g)
    return out


def flux_functionals(layout: HybridLayout, vec: HybridVector) -> dict[str, np.ndarray]:
    """Integrals of the weighted normal trace over boundary components
    (beyond the outer one) and over tagged cut surfaces."""
    full = vec.expand()
    gam = [float(g @ full) for g in flux_vectors(layout, "tangential")]
    if layout.mesh.beta1 > 0 or layout.mesh.sigma_sets:
        sig = [float(g @ full) for g in flux_vectors(layout, "normal")]
    else:
        sig = []
    return {"gamma": np.array(gam), "sigma": np.array(sig)}


def policy_containment_defect(layout: HybridLayout, face_id: int) -> float:
    """Operator-norm defect of projecting the rotated gradients into the face
    space; zero exactly when the policy contains them (the legality condition)."""
    fo = layout.faces[face_id]
    R, Q = fo.rot_cols, fo.q_cols
    D = R - Q @ (Q.T @ R)
    s = np.linalg.svd(D, compute_uv=False)
    return float(s[0]) if s.size else 0.0


def jump_control_constant(layout: HybridLayout, forms: list[LocalForms],
                          cell_id: int, kernel_rtol: float = 1e-10,
                          containment_tol: float = 1e-8) -> float:
    """Smallest constant bounding the unprojected tangential jumps by the
    cell curl plus the penalty, as a generalized eigenvalue on the quotient
    of the right form's kernel.

    The kernel of the right form must be annihilated by the jump form; a
    violation means the face policy lost rotated-gradient directions and
    raises `KernelContainmentError`.
    """
    mesh = layout.mesh
    lf = forms[cell_id]
    co = layout.cells[cell_id]
    T = mesh.cells[cell_id]
    n = layout.cell_dim
    nc = lf.stab_curl.shape[0]

    left = np.zeros((nc, nc))
    o = n
    for f in T.face_ids:
        fo = layout.faces[f]
        q = layout.tau_dims[f]
        w = 1.0 / mesh.faces[f].h_F
        Tr = co.tau_trace[f]          # full tangential coords of the rotated trace
        Qc = fo.q_cols
        left[:n, :n] += w * (Tr.T @ Tr)
        left[:n, o:o + q] -= w * (Tr.T @ Qc)
        left[o:o + q, :n] -= w * (Qc.T @ Tr)
        left[o:o + q, o:o + q] += w * np.eye(q)  # Q columns are orthonormal
        o += q

    right = lf.stab_curl.copy()
    right[:n, :n] += lf.curl_map.T @ lf.curl_map

    lam, W = np.linalg.eigh(right)
    lmax = lam[-1]
    if lmax <= 0.0:
        return 0.0
    in_kernel = lam < kernel_rtol * lmax
    Z = W[:, in_kernel]
    if Z.shape[1]:
        lz = Z.T @ left @ Z
        lnorm = float(np.abs(np.linalg.eigvalsh(left)).max())
        if float(np.abs(lz).max()) > containment_tol * max(lnorm, 1e-300):
            raise KernelContainmentError(
                f"cell {cell_id}, policy {layout.policy.label}: the jump form "
                f"reaches {np.abs(lz).max():.3e} on the stability kernel "
                f"(jump-form scale {lnorm:.3e}); the face space does not "
                "contain the rotated surface gradients"
            )
    Wp = W[:, ~in_kernel]
    lp = lam[~in_kernel]
    scaled = (Wp / np.sqrt(lp)[None, :])
    red = scaled.T @ left @ scaled
    lam_max = float(np.linalg.eigvalsh(red)[-1])
    return float(np.sqrt(max(lam_max, 0.0)))


def cell_field(layout: HybridLayout, vec: HybridVector, cell_id: int,
               points: np.ndarray) -> np.ndarray:
    """Evaluate the cell component of a hybrid vector at physical points."""
    c = vec.expand()[layout.cell_slice(cell_id)]
    return np.einsum("njk,j->nk", layout.cells[cell_id].vec.eval(points), c)

"""Global quadratic forms and extremal constants for hybrid vector fields.

The central quantity is the largest generalized eigenvalue of the weighted
cell mass form against an energy form that combines the div and curl
seminorms with low-rank flux functionals over boundary components or cut
surfaces. Its square root is the sharp constant of the discrete
Poincare-type inequality the energy form encodes; refinement studies track
it across structured mesh families, and the degeneracy probe shows the
flux terms are exactly what keeps the energy form definite on domains with
cavities or tunnels.

All matrices act on the free DOFs of a `HybridLayout`. The dense
symmetric-definite solver is the correctness oracle up to `DENSE_CUTOFF`
free DOFs; above that, ARPACK runs on the same pencil with a deterministic
start vector. Quotient pencils (semi-definite right-hand side) get an
explicit dense kernel split when small and a tiny diagonal regularization
when iterative.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from time import perf_counter

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh, eigvalsh

from .hybridspace import (
    FaceSpacePolicy,
    HybridLayout,
    KernelContainmentError,
    LocalForms,
    assemble_local_forms,
    build_layout,
    flux_vectors,
)
from .mesh import (
    MeshError,
    PolyMesh,
    checkerboard_eta,
    gen_structured,
    mesh_content_hash,
)

__all__ = [
    "DEFAULT_DOF_CAP",
    "DENSE_CUTOFF",
    "DegenerateFormError",
    "GlobalForms",
    "PencilResult",
    "QuadraticFormPair",
    "STUDY_COLUMNS",
    "accumulate_blocks",
    "assemble_forms",
    "assemble_global_forms",
    "degeneracy_probe",
    "norm_equivalence",
    "pencil_max",
    "refinement_study",
    "study_mesh",
    "variant_constants",
    "weber_constant",
    "write_study_csv",
    "write_study_json",
]

DENSE_CUTOFF = 4000
DENSE_PROBE_LIMIT = 8000
DEFAULT_DOF_CAP = 100_000
RESIDUAL_TOL = 1e-8
NEAR_KERNEL_FACTOR = 1e-6

STUDY_COLUMNS = [
    "level", "h", "dofs", "degree", "policy", "flavor", "include_flux",
    "lambda_max", "c_w", "lambda_min_A", "residual", "wall_ms",
]


class DegenerateFormError(RuntimeError):
    """The energy form is not positive definite on the free DOFs.

    On domains with nontrivial topology this is the expected failure when
    flux terms are omitted; the degeneracy probe quantifies the near-kernel.
    """


# ---------------------------------------------------------------------------
# sparse assembly from per-cell blocks
# ---------------------------------------------------------------------------


def accumulate_blocks(n_free: int, full_to_free: np.ndarray, entries) -> sp.csr_matrix:
    """Scatter symmetric local blocks, indexed in full-layout DOFs, into a
    free-DOF CSR matrix. Rows and columns hitting fixed DOFs are dropped,
    which is the Galerkin restriction for homogeneous essential conditions."""
    rows, cols, vals = [], [], []
    for idx_full, block in entries:
        fidx = full_to_free[idx_full]
        keep = fidx >= 0
        if not np.all(keep):
            block = block[np.ix_(keep, keep)]
            fidx = fidx[keep]
        k = len(fidx)
        rows.append(np.repeat(fidx, k))
        cols.append(np.tile(fidx, k))
        vals.append(np.asarray(block).ravel())
    if rows:
        A = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_free, n_free),
        ).tocsr()
    else:
        A = sp.csr_matrix((n_free, n_free))
    return ((A + A.T) * 0.5).tocsr()


@dataclass(frozen=True)
class GlobalForms:
    """Free-DOF matrices of the curl seminorm, the div seminorm (absent on
    curl-only layouts), and the eta-weighted cell mass."""

    layout: HybridLayout
    A_curl: sp.csr_matrix
    A_div: sp.csr_matrix | None
    M_eta: sp.csr_matrix


def assemble_global_forms(layout: HybridLayout, forms: list[LocalForms]) -> GlobalForms:
    """Assemble the squared seminorm and mass matrices from local forms.

    The curl matrix adds the cell-curl Gram to the tangential penalties; the
    div matrix uses the eta-weighted cell divergence. The mass matrix is
    diagonal and touches cell blocks only, so its kernel is exactly the
    face-DOF subspace.
    """
    n = layout.cell_dim
    f2f = layout.full_to_free

    def curl_entries():
        for lf in forms:
            B = lf.stab_curl.copy()
            B[:n, :n] += lf.curl_map.T @ lf.curl_map
            yield lf.curl_idx, B

    A_curl = accumulate_blocks(layout.n_free, f2f, curl_entries())

    A_div = None
    if not layout.curl_only:
        def div_entries():
            for lf in forms:
                B = lf.stab_div.copy()
                B[:n, :n] += (lf.eta ** 2) * (lf.div_map.T @ lf.div_map)
                yield lf.div_idx, B

        A_div = accumulate_blocks(layout.n_free, f2f, div_entries())

    diag_full = np.zeros(layout.total)
    for lf in forms:
        diag_full[layout.cell_slice(lf.cell_id)] = lf.eta
    M_eta = sp.diags(diag_full[layout.free_to_full]).tocsr()
    return GlobalForms(layout=layout, A_curl=A_curl, A_div=A_div, M_eta=M_eta)


@dataclass(frozen=True)
class QuadraticFormPair:
    """Mass form against energy form on the free DOFs of one layout.

    `A_base` holds the weighted div+curl part; `flux` holds the free-DOF
    flux functionals whose weighted outer products complete the energy form.
    Keeping them separate preserves sparsity and makes the rank of the flux
    update explicit.
    """

    layout: HybridLayout
    flavor: str
    include_flux: bool
    M: sp.csr_matrix
    A_base: sp.csr_matrix
    flux: list[np.ndarray]
    flux_weight: float

    @property
    def n_free(self) -> int:
        return self.M.shape[0]

    def energy_matrix(self) -> sp.csr_matrix:
        A = self.A_base
        if self.include_flux:
            for g in self.flux:
                gs = sp.csr_matrix(g.reshape(-1, 1))
                A = A + self.flux_weight * (gs @ gs.T)
        return A.tocsr()


def assemble_forms(layout: HybridLayout, forms: list[LocalForms], flavor: str,
                   include_flux: bool = True) -> QuadraticFormPair:
    """Build the mass/energy pair for one boundary-condition flavor.

    The energy form weights the div seminorm by 1/min(eta), the curl
    seminorm by max(eta), and adds the squared normal-trace integrals over
    the nontrivial boundary components (tangential flavor) or the tagged cut
    surfaces (normal flavor), weighted by 1/min(eta).
    """
    if layout.curl_only:
        raise ValueError("the flavored energy form needs normal DOFs; "
                         "build the layout without curl_only")
    if flavor not in ("tangential", "normal"):
        raise ValueError(f"unknown flavor {flavor!r}")
    if layout.bc != flavor:
        raise ValueError(
            f"flavor {flavor!r} needs a layout with matching essential "
            f"conditions, got bc={layout.bc!r}")
    mesh = layout.mesh
    gf = assemble_global_forms(layout, forms)
    w_div = 1.0 / mesh.eta_min
    A_base = (w_div * gf.A_div + mesh.eta_max * gf.A_curl).tocsr()
    flux = []
    for g in flux_vectors(layout, flavor):
        g_free = g[layout.free_to_full]
        # flux functionals must survive the restriction: their support is
        # interior (cut surfaces) or normal-trace blocks left free by the
        # tangential conditions
        if np.abs(g).sum() - np.abs(g_free).sum() > 1e-12 * max(np.abs(g).sum(), 1.0):
            raise MeshError("a flux functional hits fixed DOFs; the layout "
                            "essential conditions do not match the flavor")
        flux.append(g_free)
    return QuadraticFormPair(layout=layout, flavor=flavor,
                             include_flux=include_flux, M=gf.M_eta,
                             A_base=A_base, flux=flux, flux_weight=w_div)


# ---------------------------------------------------------------------------
# pencil solvers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PencilResult:
    """Largest generalized eigenvalue of a PSD pair on the quotient of the
    right form's kernel, with the extremal vector and its residual."""

    value: float
    vector: np.ndarray
    residual: float
    dense: bool
    n: int


def _dense(mat) -> np.ndarray:
    if sp.issparse(mat):
        return mat.toarray()
    return np.asarray(mat, dtype=float)


def _pencil_residual(L, R, x: np.ndarray, lam: float) -> float:
    r = L @ x - lam * (R @ x)
    den = np.linalg.norm(R @ x)
    return float(np.linalg.norm(r) / max(den, 1e-300))


def pencil_max(left, right, *, dense_cutoff: int = DENSE_CUTOFF,
               kernel_rtol: float = 1e-10, containment_tol: float = 1e-8,
               reg_scale: float = 1e-9, seed: int = 0,
               label: str = "pencil") -> PencilResult:
    """Largest eigenvalue of `left x = lam right x` for symmetric PSD forms.

    The right form may be singular; the eigenvalue is taken on the quotient
    of its kernel, and the left form must vanish there. A violation raises
    `KernelContainmentError`: it falsifies the containment the bound being
    computed relies on, rather than being a solver failure.

    Below the cutoff the kernel split is explicit (eigendecomposition of the
    right form); above it, the right form is regularized by a diagonal shift
    of relative size `reg_scale` and ARPACK computes the top of the pencil.
    A kernel leak shows up there as a huge eigenvalue with a bad residual
    against the unregularized form, which callers check via `residual`.
    """
    n = left.shape[0]
    if n <= dense_cutoff:
        L, R = _dense(left), _dense(right)
        lam, W = np.linalg.eigh(R)
        lmax = lam[-1] if n else 0.0
        if lmax <= 0.0:
            lnorm = float(np.abs(L).max(initial=0.0))
            if lnorm > containment_tol:
                raise KernelContainmentError(
                    f"{label}: the right form vanishes identically but the "
                    f"left form reaches {lnorm:.3e}")
            return PencilResult(0.0, np.zeros(n), 0.0, True, n)
        in_kernel = lam < kernel_rtol * lmax
        Z = W[:, in_kernel]
        if Z.shape[1]:
            lz = Z.T @ L @ Z
            lscale = float(np.abs(np.linalg.eigvalsh(L)).max())
            if float(np.abs(lz).max()) > containment_tol * max(lscale, 1e-300):
                raise KernelContainmentError(
                    f"{label}: the left form reaches {np.abs(lz).max():.3e} on "
                    f"the {Z.shape[1]}-dimensional kernel of the right form "
                    f"(left-form scale {lscale:.3e})")
        Wp = W[:, ~in_kernel]
        lp = lam[~in_kernel]
        scaled = Wp / np.sqrt(lp)[None, :]
        red = scaled.T @ L @ scaled
        mu, Y = np.linalg.eigh(red)
        value = float(max(mu[-1], 0.0))
        x = scaled @ Y[:, -1]
        x /= np.linalg.norm(x)
        return PencilResult(value, x, _pencil_residual(L, R, x, value), True, n)

    Lc = sp.csr_matrix(left)
    Rc = sp.csr_matrix(right)
    diag = Rc.diagonal()
    scale = float(diag[diag > 0].mean()) if np.any(diag > 0) else 1.0
    Rreg = (Rc + (reg_scale * scale) * sp.identity(n, format="csr")).tocsc()
    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(n)
    vals, vecs = spla.eigsh(Lc, k=1, M=Rreg, which="LA", v0=v0, tol=1e-10)
    value = float(vals[0])
    x = vecs[:, 0]
    x /= np.linalg.norm(x)
    return PencilResult(value, x, _pencil_residual(Lc, Rc, x, value), False, n)


def weber_constant(pair: QuadraticFormPair, *, dense_cutoff: int = DENSE_CUTOFF,
                   seed: int = 0) -> dict:
    """Sharp constant of the mass-versus-energy inequality for one pair.

    Returns the largest eigenvalue of `M x = lam A x`, its square root
    `c_w`, the smallest eigenvalue of the energy form, the extremal-vector
    residual, and the Rayleigh quotient of the extremal vector. The energy
    form must be positive definite; otherwise `DegenerateFormError` names
    the offending eigenvalue and points at the degeneracy probe.
    """
    A = pair.energy_matrix()
    M = pair.M
    n = pair.n_free
    if n <= dense_cutoff:
        Ad, Md = _dense(A), _dense(M)
        evals_A = eigvalsh(Ad)
        lam_min_A = float(evals_A[0])
        if lam_min_A <= 0.0:
            raise DegenerateFormError(
                f"energy form is not positive definite: smallest eigenvalue "
                f"{lam_min_A:.6e}; run the degeneracy probe to inspect the "
                "near-kernel")
        w, V = eigh(Md, Ad)
        lam = float(w[-1])
        x = V[:, -1]
        x = x / np.linalg.norm(x)
        dense = True
    else:
        Ac = A.tocsc()
        try:
            lu = spla.splu(Ac)
        except RuntimeError as exc:
            raise DegenerateFormError(
                f"energy form factorization failed ({exc}); run the "
                "degeneracy probe to inspect the near-kernel") from exc
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        inv_op = spla.LinearOperator((n, n), matvec=lu.solve)
        mu = spla.eigsh(inv_op, k=1, which="LA", v0=v0,
                        return_eigenvectors=False, tol=1e-10)
        lam_min_A = float(1.0 / mu[0])
        if lam_min_A <= 0.0:
            raise DegenerateFormError(
                f"energy form is not positive definite: smallest eigenvalue "
                f"{lam_min_A:.6e}; run the degeneracy probe to inspect the "
                "near-kernel")
        vals, vecs = spla.eigsh(M, k=1, M=Ac, which="LA", v0=v0, tol=1e-12)
        lam = float(vals[0])
        x = vecs[:, 0]
        x = x / np.linalg.norm(x)
        dense = False

    residual = _pencil_residual(M, A, x, lam)
    if residual > RESIDUAL_TOL:
        raise RuntimeError(
            f"extremal eigenvector residual {residual:.3e} exceeds "
            f"{RESIDUAL_TOL:.1e}")
    xAx = float(x @ (A @ x))
    rayleigh = float(x @ (M @ x)) / xAx if xAx > 0 else 0.0
    return {
        "lambda_max": lam,
        "c_w": float(np.sqrt(max(lam, 0.0))),
        "lambda_min_A": lam_min_A,
        "residual": residual,
        "rayleigh": rayleigh,
        "dense": dense,
        "n_free": n,
        "vector": x,
    }


# ---------------------------------------------------------------------------
# topology degeneracy
# ---------------------------------------------------------------------------


def degeneracy_probe(layout: HybridLayout, forms: list[LocalForms],
                     flavor: str) -> dict:
    """Spectrum-level check that the flux terms restore definiteness.

    Computes the dense spectrum of the energy form without flux terms,
    counts the near-kernel (eigenvalues below `NEAR_KERNEL_FACTOR` times
    the median), and reports the smallest eigenvalue once the flux outer
    products are added. The harmonic dimension of the domain (one per
    cavity for the tangential flavor, one per tunnel for the normal flavor)
    is the asymptotic near-kernel count: the bottom eigenvector approximates
    a harmonic field, so its eigenvalue decays under refinement while the
    flux terms hold the with-flux spectrum away from zero. `flux_coupling`
    reports how strongly that bottom mode loads the flux functionals; it is
    zero exactly when the flux terms cannot see the mode. On a
    topologically trivial domain both counts are zero at any resolution.
    """
    pair_off = assemble_forms(layout, forms, flavor, include_flux=False)
    n = pair_off.n_free
    if n > DENSE_PROBE_LIMIT:
        raise MeshError(
            f"the degeneracy probe runs a dense spectrum; {n} free DOFs "
            f"exceed the limit {DENSE_PROBE_LIMIT}")
    vals, vecs = eigh(_dense(pair_off.energy_matrix()))
    median = float(np.median(vals))
    threshold = NEAR_KERNEL_FACTOR * median
    near = int(np.sum(vals < threshold))
    pair_on = assemble_forms(layout, forms, flavor, include_flux=True)
    vals_on = eigvalsh(_dense(pair_on.energy_matrix()))
    bottom = vecs[:, 0]
    coupling = max((abs(float(g @ bottom)) for g in pair_on.flux), default=0.0)
    mesh = layout.mesh
    expected = mesh.beta2 if flavor == "tangential" else mesh.beta1
    return {
        "flavor": flavor,
        "n_free": n,
        "near_kernel_dim": near,
        "expected_dim": int(expected),
        "median": median,
        "threshold": threshold,
        "lambda_min_without_flux": float(vals[0]),
        "lambda_min_with_flux": float(vals_on[0]),
        "smallest_without_flux": [float(v) for v in vals[: near + 3]],
        "flux_coupling": coupling,
    }


def norm_equivalence(layout: HybridLayout, forms: list[LocalForms], flavor: str,
                     *, include_flux: bool = True,
                     dense_cutoff: int = DENSE_CUTOFF, seed: int = 0) -> dict:
    """Extremal eigenvalues of the flavored energy form against the full
    hybrid X-norm form (mass + weighted div + weighted curl), both PD on
    the free DOFs. Their spread bounds the equivalence constant."""
    mesh = layout.mesh
    pair = assemble_forms(layout, forms, flavor, include_flux=include_flux)
    gf = assemble_global_forms(layout, forms)
    X = (gf.M_eta + (1.0 / mesh.eta_min) * gf.A_div
         + mesh.eta_max * gf.A_curl).tocsr()
    A = pair.energy_matrix()
    n = pair.n_free
    if n <= dense_cutoff:
        w = eigh(_dense(A), _dense(X), eigvals_only=True)
        lo, hi = float(w[0]), float(w[-1])
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        Xc = X.tocsc()
        hi = float(spla.eigsh(A, k=1, M=Xc, which="LA", v0=v0, tol=1e-10,
                              return_eigenvectors=False)[0])
        lo = float(spla.eigsh(A, k=1, M=Xc, sigma=0.0, which="LM", v0=v0,
                              tol=1e-10, return_eigenvectors=False)[0])
    return {"lambda_min": lo, "lambda_max": hi,
            "spread": float(max(hi, 1.0 / lo) if lo > 0 else np.inf),
            "n_free": n}


# ---------------------------------------------------------------------------
# refinement studies
# ---------------------------------------------------------------------------


def study_mesh(domain_kind: str, divisions: int, eta_spec=None) -> PolyMesh:
    """Mesh factory for studies: uniform eta (None or a positive value) or a
    per-cell checkerboard given as ("checkerboard", low, high)."""
    if eta_spec is None:
        return gen_structured(domain_kind, divisions)
    if np.isscalar(eta_spec):
        return gen_structured(domain_kind, divisions, eta=float(eta_spec))
    tag = eta_spec[0]
    if tag == "uniform":
        return gen_structured(domain_kind, divisions, eta=float(eta_spec[1]))
    if tag == "checkerboard":
        low, high = float(eta_spec[1]), float(eta_spec[2])
        return gen_structured(domain_kind, divisions,
                              eta=checkerboard_eta(domain_kind, divisions, low, high))
    raise MeshError(f"unknown eta specification {eta_spec!r}")


def refinement_study(domain_kind: str, degree: int, policy, flavor: str,
                     levels, *, eta_spec=None, include_flux: bool = True,
                     dense_cutoff: int = DENSE_CUTOFF,
                     dof_cap: int = DEFAULT_DOF_CAP, threads: int = 1,
                     seed: int = 0, timings: bool = True) -> dict:
    """Run the Weber-constant estimate across a refinement family.

    `levels` is the list of per-axis divisions. Returns row dicts in
    `STUDY_COLUMNS` order plus a truncation flag: a level whose free-DOF
    count exceeds `dof_cap` stops the study with a notice instead of
    running it.
    """
    levels = list(levels)
    if len(levels) < 2:
        raise ValueError("a refinement study needs at least 2 levels")
    policy_label = FaceSpacePolicy.parse(policy).label
    rows = []
    hashes = []
    truncated = False
    notice = None
    for lvl, divisions in enumerate(levels):
        t0 = perf_counter()
        mesh = study_mesh(domain_kind, divisions, eta_spec)
        layout = build_layout(mesh, degree, policy, bc=flavor)
        if layout.n_free > dof_cap:
            truncated = True
            notice = (f"level {lvl} (divisions {divisions}): {layout.n_free} "
                      f"free DOFs exceed the cap {dof_cap}; study truncated")
            break
        hashes.append(mesh_content_hash(mesh))
        forms = assemble_local_forms(layout, threads=threads)
        pair = assemble_forms(layout, forms, flavor, include_flux=include_flux)
        res = weber_constant(pair, dense_cutoff=dense_cutoff, seed=seed)
        wall = (perf_counter() - t0) * 1000.0
        rows.append({
            "level": lvl,
            "h": mesh.h,
            "dofs": layout.n_free,
            "degree": degree,
            "policy": policy_label,
            "flavor": flavor,
            "include_flux": include_flux,
            "lambda_max": res["lambda_max"],
            "c_w": res["c_w"],
            "lambda_min_A": res["lambda_min_A"],
            "residual": res["residual"],
            "wall_ms": wall if timings else None,
        })
    return {"rows": rows, "mesh_hashes": hashes, "truncated": truncated,
            "notice": notice}


def _csv_value(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return repr(v)
    return v


def write_study_csv(report: dict, path, *, config: dict | None = None,
                    mesh_hashes: list[str] | None = None) -> None:
    """CSV is the primary artifact. The run configuration and mesh content
    hashes ride along as leading comment lines, so the data rows stay
    parseable by any reader that skips '#'."""
    with open(path, "w", newline="") as f:
        if config is not None:
            f.write("# config: %s\n" % json.dumps(config, sort_keys=True))
        for h in mesh_hashes or []:
            f.write("# mesh_hash: %s\n" % h)
        writer = csv.writer(f)
        writer.writerow(STUDY_COLUMNS)
        for row in report["rows"]:
            writer.writerow([_csv_value(row[c]) for c in STUDY_COLUMNS])


def write_study_json(report: dict, path, *, config: dict | None = None,
                     mesh_hashes: list[str] | None = None) -> None:
    payload = {
        "config": config or {},
        "mesh_hashes": mesh_hashes or [],
        "columns": STUDY_COLUMNS,
        "rows": report["rows"],
        "truncated": report["truncated"],
        "notice": report["notice"],
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# curl-only variant bounds under gradient orthogonality
# ---------------------------------------------------------------------------


def _structured_boxes(mesh: PolyMesh) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-cell (lo, hi) corners; raises unless every cell is a coordinate
    box with its 8 vertices on the corners (the trilinear hat functions the
    gradient constraints use are only defined there)."""
    boxes = []
    for T in mesh.cells:
        pts = mesh.vertices[np.asarray(T.vertex_ids)]
        if pts.shape[0] != 8:
            raise MeshError("gradient-orthogonality constraints are "
                            "implemented for structured hexahedral meshes only")
        lo, hi = pts.min(axis=0), pts.max(axis=0)
        corners = np.array([[x, y, z] for z in (lo[2], hi[2])
                            for y in (lo[1], hi[1]) for x in (lo[0], hi[0])])
        d = np.abs(pts[:, None, :] - corners[None, :, :]).max(axis=2)
        tol = 1e-9 * max(T.h_T, 1.0)
        if not np.all(d.min(axis=1) < tol) or np.any(hi - lo <= 0):
            raise MeshError("gradient-orthogonality constraints are "
                            "implemented for structured hexahedral meshes only")
        boxes.append((lo, hi))
    return boxes


def _hat_gradient(pts: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                  corner: np.ndarray) -> np.ndarray:
    """Gradient of the trilinear nodal function of `corner` on the box."""
    t = np.empty_like(pts)
    dt = np.empty(3)
    for d in range(3):
        span = hi[d] - lo[d]
        if corner[d] > 0.5 * (lo[d] + hi[d]):
            t[:, d] = (pts[:, d] - lo[d]) / span
            dt[d] = 1.0 / span
        else:
            t[:, d] = (hi[d] - pts[:, d]) / span
            dt[d] = -1.0 / span
    g = np.empty_like(pts)
    g[:, 0] = dt[0] * t[:, 1] * t[:, 2]
    g[:, 1] = dt[1] * t[:, 0] * t[:, 2]
    g[:, 2] = dt[2] * t[:, 0] * t[:, 1]
    return g


def gradient_constraint_matrix(layout: HybridLayout,
                               interior_only: bool) -> np.ndarray:
    """Rows of eta-weighted pairings of the cell unknowns against broken
    gradients of the continuous trilinear nodal functions, one row per mesh
    vertex (interior vertices only when `interior_only`). Acting on free
    DOFs; only cell blocks are touched."""
    mesh = layout.mesh
    boxes = _structured_boxes(mesh)
    boundary_vertices: set[int] = set()
    for f in mesh.boundary_faces:
        boundary_vertices.update(int(v) for v in mesh.faces[f].vertex_ids)
    vertex_ids = [v for v in range(len(mesh.vertices))
                  if not (interior_only and v in boundary_vertices)]
    vrow = {v: i for i, v in enumerate(vertex_ids)}

    G = np.zeros((len(vertex_ids), layout.n_free))
    for T in mesh.cells:
        co = layout.cells[T.cell_id]
        pts, w = co.rule.points, co.rule.weights
        basis_vals = co.vec.eval(pts)
        lo, hi = boxes[T.cell_id]
        sl = layout.cell_slice(T.cell_id)
        fidx = layout.full_to_free[sl.start:sl.stop]
        for v in T.vertex_ids:
            v = int(v)
            if v not in vrow:
                continue
            grad = _hat_gradient(pts, lo, hi, mesh.vertices[v])
            row = T.eta * np.einsum("njk,n,nk->j", basis_vals, w, grad,
                                    optimize=True)
            G[vrow[v], fidx] += row
    return G


def variant_constants(layout: HybridLayout, forms: list[LocalForms], *,
                      rank_rtol: float = 1e-10, seed: int = 0) -> dict:
    """Sharp constant of the curl-only mass bound under gradient
    orthogonality.

    For a curl-only layout with tangential essential conditions, the cell
    unknowns are constrained eta-orthogonally to broken gradients of the
    interior trilinear nodal functions; without essential conditions, of
    all nodal functions. The constraint matrix is rank-revealed rather
    than assumed full: the all-vertex variant is always deficient at least
    by the constant function, and low-degree cell spaces on coarse grids
    add sign-parity relations, all reported in `rank_deficiency`. The
    constant is sqrt of the largest eigenvalue of the weighted mass against
    max(eta) times the curl-seminorm form on the constraint null space; the
    extremal vector's constraint residual is reported. If the nodal
    constraints are too coarse to exclude every curl-free direction (the
    all-vertex variant on cell spaces of degree >= 1), the constrained form
    is singular and `DegenerateFormError` reports it.

    Requires trivial topology (no cavities, no tunnels): the harmonic fields
    the full orthogonality condition would also exclude must be absent.
    """
    if not layout.curl_only:
        raise ValueError("variant bounds act on curl-only layouts")
    if layout.bc == "tangential":
        variant = "boundary"
    elif layout.bc == "none":
        variant = "free"
    else:
        raise ValueError("variant bounds need tangential or no essential "
                         "conditions")
    mesh = layout.mesh
    if mesh.beta1 or mesh.beta2:
        raise MeshError("variant bounds need trivial topology; this mesh has "
                        f"beta1={mesh.beta1}, beta2={mesh.beta2}")
    n = layout.n_free
    if n > DENSE_PROBE_LIMIT:
        raise MeshError(f"variant bounds run dense; {n} free DOFs exceed "
                        f"the limit {DENSE_PROBE_LIMIT}")

    G = gradient_constraint_matrix(layout, interior_only=(variant == "boundary"))
    U, s, Vt = np.linalg.svd(G, full_matrices=True)
    rank = int(np.sum(s > rank_rtol * s[0])) if s.size else 0
    deficiency = G.shape[0] - rank
    Z = Vt[rank:].T

    gf = assemble_global_forms(layout, forms)
    A = mesh.eta_max * _dense(gf.A_curl)
    M = _dense(gf.M_eta)
    Acon = Z.T @ A @ Z
    Mcon = Z.T @ M @ Z
    lam_min_A = float(eigvalsh(Acon)[0]) if Acon.size else 0.0
    if lam_min_A <= 0.0:
        raise DegenerateFormError(
            f"constrained curl form is not positive definite: smallest "
            f"eigenvalue {lam_min_A:.6e}; the gradient constraints left a "
            "curl-free direction")
    w, Y = eigh(Mcon, Acon)
    lam = float(w[-1])
    x = Z @ Y[:, -1]
    x /= np.linalg.norm(x)
    constraint_residual = float(np.abs(G @ x).max(initial=0.0))
    return {
        "variant": variant,
        "constant": float(np.sqrt(max(lam, 0.0))),
        "lambda_max": lam,
        "lambda_min_A": lam_min_A,
        "n_constraints": int(G.shape[0]),
        "constraint_rank": rank,
        "rank_deficiency": int(deficiency),
        "constraint_residual": constraint_residual,
        "n_free": n,
        "vector": x,
    }

"""Command-line front end: mesh tooling, verification suites, Weber studies.

Three command groups map onto the library layers. `mesh` generates,
validates, and summarizes mesh files. `verify` runs the per-cell invariant
suites (polynomial splittings, stabilization consistency, reconstruction
residuals) and prints a pass/fail table. `weber` estimates the extremal
constants, runs refinement studies, and probes topological degeneracy.

Exit codes: 0 success, 1 invariant falsified, 2 input error, 3 budget
exceeded (a partial report is still written when an output path is given).

Reports embed the full run configuration and a content hash of every mesh
they used. With `--no-timings` the CSV and JSON artifacts are byte-stable
across runs and thread counts for a fixed seed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass
from time import perf_counter

import numpy as np

from .hybridspace import (
    HybridVector,
    assemble_local_forms,
    build_layout,
    local_interpolate,
    random_vector,
)
from .koszul import (
    cell_split,
    dim_face_rotation_complement,
    dim_face_rotations,
    dim_gradient_complement,
    dim_gradients,
    dim_rotation_complement,
    dim_rotations,
    div_inverse,
    face_split,
)
from .mesh import (
    DOMAIN_KINDS,
    MeshError,
    load_mesh,
    mesh_content_hash,
    mesh_from_dict,
    regularity_report,
    save_mesh,
)
from .polybasis import graded_exponents
from .reconstruct import (
    build_cell_lifts,
    curl_commutation_defect,
    defining_residual,
    div_commutation_defect,
)
from .spectral import (
    DEFAULT_DOF_CAP,
    assemble_forms,
    degeneracy_probe,
    refinement_study,
    study_mesh,
    weber_constant,
    write_study_csv,
    write_study_json,
)

SPLIT_COND_LIMIT = 1e8
STAB_TOL = 1e-11
RESIDUAL_TOL = 1e-11
COMMUTATION_TOL = 1e-10
DIV_RATIO_SLACK = 1e-9


@dataclass(frozen=True)
class RunConfig:
    """Validated run parameters, serialized into every report."""

    command: str
    domain_kind: str | None = None
    mesh_path: str | None = None
    divisions: int | None = None
    degree: int | None = None
    policy: str | None = None
    flavor: str | None = None
    levels: list[int] | None = None
    eta: str | None = None
    output: str | None = None
    dof_cap: int | None = None
    threads: int = 1
    seed: int = 0
    timings: bool = True

    def as_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def _threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        return args.threads
    env = os.environ.get("WEBERLAB_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise MeshError(f"WEBERLAB_THREADS={env!r} is not an integer") from exc
    return 1


def _parse_eta(text: str | None):
    """None, a positive number, or 'checkerboard:LO,HI'."""
    if text is None:
        return None
    if text.startswith("checkerboard:"):
        body = text[len("checkerboard:"):]
        parts = body.split(",")
        if len(parts) != 2:
            raise MeshError(f"eta spec {text!r}: expected checkerboard:LO,HI")
        lo, hi = (float(p) for p in parts)
        return ("checkerboard", lo, hi)
    try:
        value = float(text)
    except ValueError as exc:
        raise MeshError(f"eta spec {text!r} is neither a number nor "
                        f"checkerboard:LO,HI") from exc
    return ("uniform", value)


def _obtain_mesh(args):
    """Mesh from --mesh PATH or from --kind/--n (+ --eta)."""
    if getattr(args, "mesh", None):
        if getattr(args, "kind", None):
            raise MeshError("give either --mesh or --kind, not both")
        return load_mesh(args.mesh)
    kind = getattr(args, "kind", None)
    if kind is None:
        raise MeshError("a mesh is required: --mesh PATH or --kind KIND --n N")
    return study_mesh(kind, args.n, _parse_eta(getattr(args, "eta", None)))


def _config_from(args, command: str, **extra) -> RunConfig:
    return RunConfig(
        command=command,
        domain_kind=getattr(args, "kind", None),
        mesh_path=getattr(args, "mesh", None),
        divisions=getattr(args, "n", None),
        degree=getattr(args, "degree", None),
        policy=getattr(args, "policy", None),
        flavor=getattr(args, "flavor", None),
        eta=getattr(args, "eta", None),
        output=getattr(args, "output", None),
        dof_cap=getattr(args, "dof_cap", None),
        threads=_threads(args),
        seed=getattr(args, "seed", 0),
        timings=not getattr(args, "no_timings", False),
        **extra,
    )


def _json_mirror_path(path: str) -> str:
    root, ext = os.path.splitext(path)
    return root + ".json" if ext.lower() == ".csv" else path + ".json"


# ---------------------------------------------------------------------------
# mesh commands
# ---------------------------------------------------------------------------


def cmd_mesh_gen(args) -> int:
    try:
        mesh = study_mesh(args.kind, args.n, _parse_eta(args.eta))
    except (MeshError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    save_mesh(mesh, args.output)
    print(f"wrote {args.output}: {mesh.n_cells} cells, {mesh.n_faces} faces, "
          f"h={mesh.h:.6g}, beta1={mesh.beta1}, beta2={mesh.beta2}")
    print(f"mesh_hash: {mesh_content_hash(mesh)}")
    return 0


def _load_staged(path: str):
    """Split input errors (unreadable, 2) from falsified invariants (1)."""
    try:
        with open(path) as f:
            data = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        return None, 2, f"cannot read mesh file {path}: {exc}"
    try:
        mesh = mesh_from_dict(data)
    except MeshError as exc:
        return None, 1, f"mesh invariant falsified in {path}: {exc}"
    except (KeyError, TypeError, ValueError) as exc:
        return None, 2, f"malformed mesh file {path}: {exc}"
    return mesh, 0, None


def cmd_mesh_validate(args) -> int:
    mesh, code, message = _load_staged(args.path)
    if mesh is None:
        print(f"error: {message}", file=sys.stderr)
        return code
    print(f"{args.path}: valid ({mesh.n_cells} cells, {mesh.n_faces} faces, "
          f"beta1={mesh.beta1}, beta2={mesh.beta2})")
    print(f"mesh_hash: {mesh_content_hash(mesh)}")
    return 0


def cmd_mesh_info(args) -> int:
    mesh, code, message = _load_staged(args.path)
    if mesh is None:
        print(f"error: {message}", file=sys.stderr)
        return code
    info = {
        "path": args.path,
        "mesh_hash": mesh_content_hash(mesh),
        "n_cells": mesh.n_cells,
        "n_faces": mesh.n_faces,
        "n_boundary_faces": len(mesh.boundary_faces),
        "h": mesh.h,
        "beta1": mesh.beta1,
        "beta2": mesh.beta2,
        "eta_min": mesh.eta_min,
        "eta_max": mesh.eta_max,
        "boundary_components": len(mesh.gamma_sets),
        "cut_surfaces": len(mesh.sigma_sets),
        "regularity": regularity_report(mesh),
    }
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------
# verify commands
# ---------------------------------------------------------------------------


def _verify_koszul(mesh, degree: int):
    """Dimension, conditioning, and inverse-norm checks per cell and face."""
    lines = []
    failures = []
    want_cell = (dim_gradients(degree), dim_gradient_complement(degree),
                 dim_rotations(degree), dim_rotation_complement(degree))
    for c in range(mesh.n_cells):
        split = cell_split(mesh, c, degree)
        dims = (split.gradients.shape[1], split.gradient_complement.shape[1],
                split.rotations.shape[1], split.rotation_complement.shape[1])
        cond = max(split.gradient_split_cond, split.rotation_split_cond)
        inv = div_inverse(mesh, c, degree, split=split)
        ratio = inv.norm / inv.bound if inv.bound > 0 else 0.0
        ok = (dims == want_cell and cond < SPLIT_COND_LIMIT
              and ratio <= 1.0 + DIV_RATIO_SLACK)
        status = "ok" if ok else "FAIL"
        lines.append(f"cell {c:4d}  dims {dims}  cond {cond:10.3e}  "
                     f"div-inv/bound {ratio:8.6f}  {status}")
        if not ok:
            failures.append(("cell", c))
    want_face = (dim_face_rotations(degree), dim_face_rotation_complement(degree))
    for f in range(mesh.n_faces):
        fsplit = face_split(mesh, f, degree)
        dims = (fsplit.rotations.shape[1], fsplit.rotation_complement.shape[1])
        ok = dims == want_face and fsplit.split_cond < SPLIT_COND_LIMIT
        status = "ok" if ok else "FAIL"
        lines.append(f"face {f:4d}  dims {dims}  cond {fsplit.split_cond:10.3e}"
                     f"  {status}")
        if not ok:
            failures.append(("face", f))
    return lines, failures


def _polynomial_suite(degree: int, rng: np.random.Generator):
    """Random global polynomial vector field with exact curl and divergence.

    Coordinates are shifted to (x - 1/2)/(1/2), so the chain rule brings a
    factor 2 into every derivative.
    """
    exps = graded_exponents(3, degree)
    coeffs = rng.standard_normal((exps.shape[0], 3))
    scale = 2.0

    def _local(pts):
        return (np.asarray(pts) - 0.5) / 0.5

    def _mono(local):
        return np.prod(local[:, None, :] ** exps[None, :, :], axis=2)

    def _partial(local, k):
        factor = exps[:, k].astype(float)
        lowered = exps.copy()
        lowered[:, k] = np.maximum(lowered[:, k] - 1, 0)
        mono = np.prod(local[:, None, :] ** lowered[None, :, :], axis=2)
        return scale * factor[None, :] * mono

    def field(pts):
        return _mono(_local(pts)) @ coeffs

    def curl(pts):
        local = _local(pts)
        d = [_partial(local, k) for k in range(3)]
        out = np.empty((local.shape[0], 3))
        out[:, 0] = d[1] @ coeffs[:, 2] - d[2] @ coeffs[:, 1]
        out[:, 1] = d[2] @ coeffs[:, 0] - d[0] @ coeffs[:, 2]
        out[:, 2] = d[0] @ coeffs[:, 1] - d[1] @ coeffs[:, 0]
        return out

    def div(pts):
        local = _local(pts)
        return sum(_partial(local, k) @ coeffs[:, k] for k in range(3))

    return field, curl, div


def _polynomial_field(degree: int, rng: np.random.Generator):
    """Random vector field, polynomial of total degree <= `degree` globally."""
    return _polynomial_suite(degree, rng)[0]


def _verify_stab(layout, forms, n_samples: int, seed: int):
    """Stabilization must vanish on cell-wise interpolates of polynomials."""
    rng = np.random.default_rng(seed)
    mesh = layout.mesh
    worst_curl = np.zeros(mesh.n_cells)
    worst_div = np.zeros(mesh.n_cells)
    for _ in range(n_samples):
        field = _polynomial_field(layout.degree, rng)
        for c in range(mesh.n_cells):
            lf = forms[c]
            full = local_interpolate(layout, c, field)
            xc = full[lf.curl_idx]
            denom = np.linalg.norm(lf.stab_curl) * (xc @ xc) + 1e-300
            worst_curl[c] = max(worst_curl[c], (xc @ lf.stab_curl @ xc) / denom)
            if lf.stab_div is not None:
                xd = full[lf.div_idx]
                denom = np.linalg.norm(lf.stab_div) * (xd @ xd) + 1e-300
                worst_div[c] = max(worst_div[c], (xd @ lf.stab_div @ xd) / denom)
    lines = []
    failures = []
    for c in range(mesh.n_cells):
        ok = worst_curl[c] <= STAB_TOL and worst_div[c] <= STAB_TOL
        status = "ok" if ok else "FAIL"
        lines.append(f"cell {c:4d}  curl-stab {worst_curl[c]:10.3e}  "
                     f"div-stab {worst_div[c]:10.3e}  {status}")
        if not ok:
            failures.append(("cell", c))
    return lines, failures


def _verify_reconstruct(layout, forms, seed: int):
    """Defining-relation residuals and commutation defects per cell.

    Div commutation holds for every policy (the normal trace space is always
    the full one); curl commutation is a full-policy identity for degree
    >= 1, so it is asserted only there and reported as a diagnostic
    otherwise.
    """
    rng = np.random.default_rng(seed)
    vec = random_vector(layout, rng)
    degree = layout.degree
    curl_ops, div_ops = build_cell_lifts(layout, degree, degree)
    field, curl_of, div_of = _polynomial_suite(degree, rng)
    assert_curl = layout.policy.selector == "full" or degree == 0
    lines = []
    failures = []
    for c in range(layout.mesh.n_cells):
        res_c = defining_residual(layout, curl_ops[c], vec)
        res_d = defining_residual(layout, div_ops[c], vec)
        eta_c = layout.mesh.cells[c].eta
        full = local_interpolate(layout, c, field)
        ivec = HybridVector(layout, full[layout.free_to_full])
        dc = curl_commutation_defect(layout, ivec, c, degree, curl_of)
        dd = div_commutation_defect(
            layout, ivec, c, degree, lambda pts: eta_c * div_of(pts))
        ok = (res_c <= RESIDUAL_TOL and res_d <= RESIDUAL_TOL
              and dd <= COMMUTATION_TOL
              and (dc <= COMMUTATION_TOL or not assert_curl))
        status = "ok" if ok else "FAIL"
        lines.append(f"cell {c:4d}  curl-res {res_c:10.3e}  div-res "
                     f"{res_d:10.3e}  curl-comm {dc:10.3e}  div-comm "
                     f"{dd:10.3e}  {status}")
        if not ok:
            failures.append(("cell", c))
    return lines, failures


def cmd_verify(args) -> int:
    try:
        mesh = _obtain_mesh(args)
    except (MeshError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    degree = args.degree
    try:
        if args.check == "koszul":
            lines, failures = _verify_koszul(mesh, degree)
        else:
            layout = build_layout(mesh, degree, args.policy)
            forms = assemble_local_forms(layout, threads=_threads(args))
            if args.check == "stab":
                lines, failures = _verify_stab(layout, forms, args.samples,
                                               args.seed)
            else:
                lines, failures = _verify_reconstruct(layout, forms, args.seed)
    except (MeshError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"verify {args.check}: degree {degree}, {mesh.n_cells} cells")
    for line in lines:
        print(line)
    if failures:
        cell_ids = sorted({i for kind, i in failures if kind == "cell"})
        face_ids = sorted({i for kind, i in failures if kind == "face"})
        parts = []
        if cell_ids:
            parts.append(f"cells {cell_ids}")
        if face_ids:
            parts.append(f"faces {face_ids}")
        print(f"FAIL: {', '.join(parts)}")
        return 1
    print("PASS")
    return 0


# ---------------------------------------------------------------------------
# weber commands
# ---------------------------------------------------------------------------


def _print_study_rows(rows) -> None:
    header = ("level", "h", "dofs", "c_w", "lambda_min_A", "residual")
    print("  ".join(f"{h:>12s}" for h in header))
    for row in rows:
        print("  ".join([f"{row['level']:>12d}", f"{row['h']:>12.6f}",
                         f"{row['dofs']:>12d}", f"{row['c_w']:>12.8f}",
                         f"{row['lambda_min_A']:>12.4e}",
                         f"{row['residual']:>12.4e}"]))


def _write_reports(report: dict, config: RunConfig, output: str | None) -> None:
    if not output:
        return
    hashes = report.get("mesh_hashes", [])
    write_study_csv(report, output, config=config.as_dict(), mesh_hashes=hashes)
    write_study_json(report, _json_mirror_path(output),
                     config=config.as_dict(), mesh_hashes=hashes)


def cmd_weber_estimate(args) -> int:
    config = _config_from(args, "weber estimate")
    try:
        mesh = _obtain_mesh(args)
        layout = build_layout(mesh, args.degree, args.policy, bc=args.flavor)
    except (MeshError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    cap = args.dof_cap if args.dof_cap is not None else DEFAULT_DOF_CAP
    if layout.n_free > cap:
        notice = (f"{layout.n_free} free DOFs exceed the cap {cap}; "
                  f"no estimate computed")
        report = {"rows": [], "mesh_hashes": [mesh_content_hash(mesh)],
                  "truncated": True, "notice": notice}
        _write_reports(report, config, args.output)
        print(f"budget: {notice}", file=sys.stderr)
        return 3
    t0 = perf_counter()
    try:
        forms = assemble_local_forms(layout, threads=_threads(args))
        pair = assemble_forms(layout, forms, args.flavor,
                              include_flux=not args.no_flux)
        res = weber_constant(pair, seed=args.seed)
    except (MeshError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    wall = (perf_counter() - t0) * 1000.0
    row = {
        "level": 0,
        "h": mesh.h,
        "dofs": layout.n_free,
        "degree": args.degree,
        "policy": layout.policy.label,
        "flavor": args.flavor,
        "include_flux": not args.no_flux,
        "lambda_max": res["lambda_max"],
        "c_w": res["c_w"],
        "lambda_min_A": res["lambda_min_A"],
        "residual": res["residual"],
        "wall_ms": wall if config.timings else None,
    }
    report = {"rows": [row], "mesh_hashes": [mesh_content_hash(mesh)],
              "truncated": False, "notice": None}
    _print_study_rows([row])
    print(f"c_w = {res['c_w']:.10f}  (lambda_max {res['lambda_max']:.6e}, "
          f"dense={res['dense']})")
    _write_reports(report, config, args.output)
    return 0


def cmd_weber_study(args) -> int:
    if args.divisions:
        try:
            levels = [int(p) for p in args.divisions.split(",")]
        except ValueError:
            print(f"error: bad --divisions {args.divisions!r}", file=sys.stderr)
            return 2
    else:
        base = 2 if args.kind == "solid_cube" else 3
        levels = [base * 2 ** i for i in range(args.levels)]
    config = _config_from(args, "weber study", levels=levels)
    cap = args.dof_cap if args.dof_cap is not None else DEFAULT_DOF_CAP
    try:
        report = refinement_study(
            args.kind, args.degree, args.policy, args.flavor, levels,
            eta_spec=_parse_eta(args.eta), include_flux=not args.no_flux,
            dof_cap=cap, threads=_threads(args), seed=args.seed,
            timings=config.timings)
    except (MeshError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _print_study_rows(report["rows"])
    if report["rows"]:
        cs = [r["c_w"] for r in report["rows"]]
        print(f"c_w spread max/min = {max(cs) / min(cs):.6f}")
    _write_reports(report, config, args.output)
    if report["truncated"]:
        print(f"budget: {report['notice']}", file=sys.stderr)
        return 3
    return 0


def cmd_weber_degeneracy(args) -> int:
    config = _config_from(args, "weber degeneracy")
    try:
        mesh = _obtain_mesh(args)
        layout = build_layout(mesh, args.degree, args.policy, bc=args.flavor)
        forms = assemble_local_forms(layout, threads=_threads(args))
        probe = degeneracy_probe(layout, forms, args.flavor)
    except (MeshError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for key in ("flavor", "n_free", "near_kernel_dim", "expected_dim",
                "median", "threshold", "lambda_min_without_flux",
                "lambda_min_with_flux", "flux_coupling"):
        print(f"{key}: {probe[key]}")
    if args.output:
        payload = {"config": config.as_dict(),
                   "mesh_hash": mesh_content_hash(mesh), "probe": probe}
        with open(args.output, "w") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")
    if probe["near_kernel_dim"] != probe["expected_dim"]:
        print(f"FAIL: near-kernel dimension {probe['near_kernel_dim']} does "
              f"not match the harmonic dimension {probe['expected_dim']} at "
              f"this resolution", file=sys.stderr)
        return 1
    print("PASS")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_mesh_source(p: argparse.ArgumentParser) -> None:
    p.add_argument("--mesh", help="path to a mesh JSON file")
    p.add_argument("--kind", choices=DOMAIN_KINDS, help="generated domain kind")
    p.add_argument("--n", type=int, default=2,
                   help="per-axis divisions for --kind (default 2)")
    p.add_argument("--eta", help="coefficient: NUMBER or checkerboard:LO,HI")


def _add_common(p: argparse.ArgumentParser, *, policy: bool = True) -> None:
    p.add_argument("--degree", type=int, default=1,
                   help="polynomial degree of the hybrid space (default 1)")
    if policy:
        p.add_argument("--policy", default="minimal",
                       help="face space policy: minimal, trimmed(k), full")
    p.add_argument("--threads", type=int, default=None,
                   help="worker cap (default: WEBERLAB_THREADS or 1)")
    p.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weberlab",
        description="Hybrid-space functional-inequality toolkit")
    sub = parser.add_subparsers(dest="group", required=True)

    mesh_p = sub.add_parser("mesh", help="generate and inspect meshes")
    mesh_sub = mesh_p.add_subparsers(dest="action", required=True)
    gen = mesh_sub.add_parser("gen", help="generate a structured mesh file")
    gen.add_argument("--kind", choices=DOMAIN_KINDS, required=True)
    gen.add_argument("--n", type=int, required=True, help="per-axis divisions")
    gen.add_argument("--eta", help="coefficient: NUMBER or checkerboard:LO,HI")
    gen.add_argument("-o", "--output", required=True, help="output JSON path")
    gen.set_defaults(func=cmd_mesh_gen)
    val = mesh_sub.add_parser("validate", help="validate a mesh file")
    val.add_argument("path")
    val.set_defaults(func=cmd_mesh_validate)
    info = mesh_sub.add_parser("info", help="print mesh summary and regularity")
    info.add_argument("path")
    info.set_defaults(func=cmd_mesh_info)

    ver = sub.add_parser("verify", help="run per-cell invariant suites")
    ver.add_argument("check", choices=("koszul", "stab", "reconstruct"))
    _add_mesh_source(ver)
    _add_common(ver)
    ver.add_argument("--samples", type=int, default=30,
                     help="random polynomials per cell for stab (default 30)")
    ver.set_defaults(func=cmd_verify)

    web = sub.add_parser("weber", help="extremal-constant estimates")
    web_sub = web.add_subparsers(dest="action", required=True)

    est = web_sub.add_parser("estimate", help="single-mesh constant")
    _add_mesh_source(est)
    _add_common(est)
    est.add_argument("--flavor", choices=("tangential", "normal"),
                     default="tangential")
    est.add_argument("--no-flux", action="store_true",
                     help="drop the topological flux terms")
    est.add_argument("--dof-cap", type=int, default=None,
                     help=f"free-DOF budget (default {DEFAULT_DOF_CAP})")
    est.add_argument("--no-timings", action="store_true",
                     help="blank wall_ms for byte-stable reports")
    est.add_argument("-o", "--output", help="CSV path (JSON mirror alongside)")
    est.set_defaults(func=cmd_weber_estimate)

    stu = web_sub.add_parser("study", help="refinement study")
    stu.add_argument("--kind", choices=DOMAIN_KINDS, required=True)
    stu.add_argument("--levels", type=int, default=3,
                     help="number of doubling refinement levels (default 3)")
    stu.add_argument("--divisions",
                     help="explicit comma-separated divisions, overrides --levels")
    stu.add_argument("--eta", help="coefficient: NUMBER or checkerboard:LO,HI")
    _add_common(stu)
    stu.add_argument("--flavor", choices=("tangential", "normal"),
                     default="tangential")
    stu.add_argument("--no-flux", action="store_true",
                     help="drop the topological flux terms")
    stu.add_argument("--dof-cap", type=int, default=None,
                     help=f"free-DOF budget (default {DEFAULT_DOF_CAP})")
    stu.add_argument("--no-timings", action="store_true",
                     help="blank wall_ms for byte-stable reports")
    stu.add_argument("-o", "--output", help="CSV path (JSON mirror alongside)")
    stu.set_defaults(func=cmd_weber_study)

    deg = web_sub.add_parser("degeneracy", help="topological degeneracy probe")
    _add_mesh_source(deg)
    _add_common(deg)
    deg.add_argument("--flavor", choices=("tangential", "normal"),
                     required=True)
    deg.add_argument("-o", "--output", help="JSON report path")
    deg.set_defaults(func=cmd_weber_degeneracy)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MeshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

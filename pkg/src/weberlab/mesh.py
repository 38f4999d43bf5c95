"""Polyhedral meshes with oriented faces, boundary components and cut surfaces.

A mesh is a flat-faced polyhedral cell complex. Every face carries a global
unit normal ``n_F``, an orthonormal in-plane frame ``(tau1, tau2, n_F)`` and a
vertex loop stored in right-hand orientation about ``n_F``. Cells carry a star
point ``x_T`` from which all faces are visible, a per-cell coefficient
``eta_T > 0``, and relative orientation signs ``eps(T, F) = n_{T,F} . n_F``.

Meshes are immutable after construction; use :func:`with_eta` to obtain a copy
with a different coefficient field.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "MeshError",
    "FaceGeometry",
    "CellGeometry",
    "SigmaSurface",
    "PolyMesh",
    "gen_structured",
    "load_mesh",
    "save_mesh",
    "mesh_to_dict",
    "mesh_content_hash",
    "with_eta",
    "checkerboard_eta",
    "regularity_report",
    "DOMAIN_KINDS",
]

# A point is a plain float64 array of shape (3,).
Point3 = np.ndarray

DOMAIN_KINDS = ("solid_cube", "hollow_cube", "through_hole_cube")

PLANARITY_RTOL = 1e-12      # face vertices must sit on the frame plane to this * h_F
FRAME_ORTHO_TOL = 1e-13     # orthonormality / handedness defect of (tau1, tau2, n)
CLOSURE_RTOL = 1e-12        # per-cell sum eps|F| n_F must vanish to this * h_T^2


class MeshError(ValueError):
    """Raised when mesh input data violates a geometric or topological contract."""


@dataclass(frozen=True)
class FaceGeometry:
    """A planar face: vertex loop, frame, size measures and adjacency."""

    face_id: int
    vertex_ids: tuple[int, ...]     # loop, right-handed about normal
    coords: np.ndarray              # (k, 3) loop coordinates
    x_F: np.ndarray                 # frame origin (vertex centroid)
    tau1: np.ndarray
    tau2: np.ndarray
    normal: np.ndarray              # global n_F
    h_F: float                      # diameter: max pairwise vertex distance
    r_F: float                      # inscribed-disk radius about x_F
    area: float
    cells: tuple[int, ...]          # (T+,) on the boundary, (T+, T-) inside
    boundary_component: int | None  # index j of Gamma_j, None for interfaces
    cut_surface: int | None         # 1-based index i of Sigma_i, None otherwise

    @property
    def is_boundary(self) -> bool:
        return len(self.cells) == 1

    def frame_coords(self, points: np.ndarray) -> np.ndarray:
        """Map 3D points (n, 3) to in-plane frame coordinates (n, 2)."""
        rel = np.atleast_2d(points) - self.x_F
        return np.stack([rel @ self.tau1, rel @ self.tau2], axis=-1)


@dataclass(frozen=True)
class CellGeometry:
    """A polyhedral cell star-shaped with respect to its point ``x_T``."""

    cell_id: int
    face_ids: tuple[int, ...]
    vertex_ids: tuple[int, ...]
    x_T: np.ndarray
    h_T: float                      # diameter: max pairwise vertex distance
    r_T: float                      # inscribed-ball radius about x_T
    volume: float
    eta: float


@dataclass(frozen=True)
class SigmaSurface:
    """A cutting surface: a planar patch of interface faces with a fixed normal."""

    face_ids: tuple[int, ...]
    normal: np.ndarray


class PolyMesh:
    """Immutable polyhedral mesh with orientation signs and topology data.

    Attributes
    ----------
    vertices : (nv, 3) array
    cells : list[CellGeometry]
    faces : list[FaceGeometry]
    beta1, beta2 : first and second Betti numbers of the meshed domain
    gamma_sets : list of face-id tuples, one per boundary component;
        ``gamma_sets[0]`` is the outer component.
    sigma_sets : list[SigmaSurface], one per tunnel (possibly fewer when the
        input file omitted them; see ``warnings``).
    """

    def __init__(
        self,
        vertices: np.ndarray,
        cells: list[CellGeometry],
        faces: list[FaceGeometry],
        cell_face_signs: list[np.ndarray],
        beta1: int,
        beta2: int,
        gamma_sets: list[tuple[int, ...]],
        sigma_sets: list[SigmaSurface],
        warnings: tuple[str, ...] = (),
    ):
        self.vertices = vertices
        self.cells = cells
        self.faces = faces
        self._signs = cell_face_signs
        self.beta1 = beta1
        self.beta2 = beta2
        self.gamma_sets = gamma_sets
        self.sigma_sets = sigma_sets
        self.warnings = warnings

    # -- size and coefficient summaries ------------------------------------

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def h(self) -> float:
        return max(T.h_T for T in self.cells)

    @property
    def eta_min(self) -> float:
        return min(T.eta for T in self.cells)

    @property
    def eta_max(self) -> float:
        return max(T.eta for T in self.cells)

    @property
    def kappa_eta(self) -> float:
        return self.eta_max / self.eta_min

    @property
    def boundary_faces(self) -> list[int]:
        return [F.face_id for F in self.faces if F.is_boundary]

    @property
    def interface_faces(self) -> list[int]:
        return [F.face_id for F in self.faces if not F.is_boundary]

    def epsilon(self, cell_id: int, face_id: int) -> float:
        """Orientation sign eps(T, F) = n_{T,F} . n_F, +-1."""
        cell = self.cells[cell_id]
        pos = cell.face_ids.index(face_id)
        return float(self._signs[cell_id][pos])

    def cell_signs(self, cell_id: int) -> np.ndarray:
        """Signs eps(T, F) aligned with ``cells[cell_id].face_ids``."""
        return self._signs[cell_id]


# ---------------------------------------------------------------------------
# geometric primitives
# ---------------------------------------------------------------------------


def _pairwise_diameter(coords: np.ndarray) -> float:
    diff = coords[:, None, :] - coords[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=-1)).max())


def _newell_normal(coords: np.ndarray) -> np.ndarray:
    """Area-weighted normal of a closed vertex loop (Newell's method)."""
    shifted = np.roll(coords, -1, axis=0)
    n = np.array(
        [
            np.sum((coords[:, 1] - shifted[:, 1]) * (coords[:, 2] + shifted[:, 2])),
            np.sum((coords[:, 2] - shifted[:, 2]) * (coords[:, 0] + shifted[:, 0])),
            np.sum((coords[:, 0] - shifted[:, 0]) * (coords[:, 1] + shifted[:, 1])),
        ]
    )
    norm = np.linalg.norm(n)
    if norm == 0.0:
        raise MeshError("degenerate face loop with vanishing Newell normal")
    return n / norm

def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return float(np.linalg.norm(p - (a + t * ab)))


def _face_frame(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """In-plane frame: tau1 from the axis least aligned with the normal."""
    k = int(np.argmin(np.abs(normal)))
    axis = np.zeros(3)
    axis[k] = 1.0
    tau1 = axis - (axis @ normal) * normal
    tau1 /= np.linalg.norm(tau1)
    tau2 = np.cross(normal, tau1)
    return tau1, tau2


def _fan_areas(coords: np.ndarray, x_F: np.ndarray) -> np.ndarray:
    """Areas of the triangles (x_F, v_i, v_{i+1}) fanned over the loop."""
    a = coords - x_F
    b = np.roll(coords, -1, axis=0) - x_F
    return 0.5 * np.linalg.norm(np.cross(a, b), axis=1)


# ---------------------------------------------------------------------------
# construction from raw connectivity
# ---------------------------------------------------------------------------


def _build_mesh(
    vertices: np.ndarray,
    cell_face_ids: list[list[int]],
    face_vertex_ids: list[list[int]],
    face_cell_ids: list[list[int]],
    eta: np.ndarray,
    star_points: dict[int, np.ndarray] | None = None,
    declared_topology: dict | None = None,
    sigma_decls: list[tuple[list[int], np.ndarray]] | None = None,
    warnings: list[str] | None = None,
) -> PolyMesh:
    warnings = list(warnings or [])
    star_points = star_points or {}
    sigma_decls = sigma_decls or []
    vertices = np.asarray(vertices, dtype=float)
    n_cells, n_faces = len(cell_face_ids), len(face_vertex_ids)

    if eta.shape != (n_cells,) or np.any(eta <= 0.0):
        raise MeshError("eta must give one positive coefficient per cell")

    # Cross-validate the two incidence tables.
    face_cells: list[list[int]] = []
    for f, owners in enumerate(face_cell_ids):
        owners = list(owners)
        if not 1 <= len(owners) <= 2 or len(set(owners)) != len(owners):
            raise MeshError(f"face {f} must list one or two distinct cells")
        for T in owners:
            if not 0 <= T < n_cells or f not in cell_face_ids[T]:
                raise MeshError(f"face {f} and cell {T} disagree on incidence")
        face_cells.append(owners)
    for T, fids in enumerate(cell_face_ids):
        for f in fids:
            if not 0 <= f < n_faces or T not in face_cells[f]:
                raise MeshError(f"cell {T} lists face {f} without matching owner entry")

    # Star points first: needed to orient the faces.
    cell_vertex_ids = []
    x_T_list = []
    for T in range(n_cells):
        vids = sorted({v for f in cell_face_ids[T] for v in face_vertex_ids[f]})
        cell_vertex_ids.append(tuple(vids))
        x_T = star_points.get(T)
        x_T_list.append(
            np.asarray(x_T, dtype=float) if x_T is not None else vertices[vids].mean(axis=0)
        )

    sigma_of_face: dict[int, tuple[int, np.ndarray]] = {}
    for i, (fids, n_sig) in enumerate(sigma_decls, start=1):
        n_sig = np.asarray(n_sig, dtype=float)
        n_sig = n_sig / np.linalg.norm(n_sig)
        for f in fids:
            if f in sigma_of_face:
                raise MeshError(f"face {f} tagged by more than one cut surface")
            sigma_of_face[f] = (i, n_sig)

    # Orient each face: prescribed normal on cut faces, outward from the owner
    # on the boundary, outward from the smaller-id cell on plain interfaces.
    faces: list[FaceGeometry] = []
    for f in range(n_faces):
        vids = list(face_vertex_ids[f])
        if len(vids) < 3 or len(set(vids)) != len(vids):
            raise MeshError(f"face {f} needs at least three distinct vertices")
        coords = vertices[vids]
        x_F = coords.mean(axis=0)
        h_F = _pairwise_diameter(coords)
        n_plane = _newell_normal(coords)
        off = (coords - x_F) @ n_plane
        if np.abs(off).max() > PLANARITY_RTOL * h_F:
            raise MeshError(
                f"face {f} is not planar: offset {np.abs(off).max():.3e} "
                f"exceeds {PLANARITY_RTOL:.0e} * h_F"
            )
        owners = face_cells[f]
        if f in sigma_of_face:
            i_sig, n_sig = sigma_of_face[f]
            if len(owners) != 2:
                raise MeshError(f"cut-surface face {f} must be an interface")
            if abs(abs(n_plane @ n_sig) - 1.0) > 1e-10:
                raise MeshError(f"cut-surface normal disagrees with the plane of face {f}")
            normal = n_sig
            cut = i_sig
        else:
            normal = n_plane
            anchor = owners[0] if len(owners) == 1 else min(owners)
            if (x_F - x_T_list[anchor]) @ normal < 0.0:
                normal = -normal
            cut = None
        # T+ is the cell seeing n_F as outward; it must exist and be unique.
        sides = [(x_F - x_T_list[T]) @ normal for T in owners]
        if len(owners) == 1:
            if sides[0] <= 0.0:
                raise MeshError(f"boundary face {f} is not outward-visible from its cell")
            ordered = (owners[0],)
        else:
            if sides[0] * sides[1] >= 0.0:
                raise MeshError(f"interface {f} does not separate its two cells")
            ordered = (owners[0], owners[1]) if sides[0] > 0.0 else (owners[1], owners[0])
        if np.dot(_newell_normal(coords), normal) < 0.0:
            vids.reverse()
            coords = coords[::-1]
        tau1, tau2 = _face_frame(normal)
        ortho_defect = max(
            abs(tau1 @ tau1 - 1.0), abs(tau2 @ tau2 - 1.0), abs(normal @ normal - 1.0),
            abs(tau1 @ tau2), abs(tau1 @ normal), abs(tau2 @ normal),
            float(np.linalg.norm(np.cross(tau1, tau2) - normal)),
        )
        if ortho_defect > FRAME_ORTHO_TOL:
            raise MeshError(f"face {f} frame defect {ortho_defect:.3e} exceeds tolerance")
        r_F = min(
            _point_segment_distance(x_F, coords[i], coords[(i + 1) % len(vids)])
            for i in range(len(vids))
        )
        areas = _fan_areas(coords, x_F)
        if np.any(areas <= 0.0):
            raise MeshError(f"face {f} has a degenerate fan triangle about x_F")
        faces.append(
            FaceGeometry(
                face_id=f,
                vertex_ids=tuple(vids),
                coords=coords,
                x_F=x_F,
                tau1=tau1,
                tau2=tau2,
                normal=normal,
                h_F=h_F,
                r_F=float(r_F),
                area=float(areas.sum()),
                cells=ordered,
                boundary_component=None,  # filled below
                cut_surface=cut,
            )
        )

    # Cells: diameters, volumes (sub-tet sums), inscribed radii, signs.
    cells: list[CellGeometry] = []
    signs: list[np.ndarray] = []
    for T in range(n_cells):
        vids = cell_vertex_ids[T]
        coords = vertices[list(vids)]
        x_T = x_T_list[T]
        h_T = _pairwise_diameter(coords)
        volume = 0.0
        r_T = math.inf
        sgn = np.empty(len(cell_face_ids[T]))
        closure = np.zeros(3)
        for pos, f in enumerate(cell_face_ids[T]):
            F = faces[f]
            side = (F.x_F - x_T) @ F.normal
            sgn[pos] = 1.0 if side > 0.0 else -1.0
            r_T = min(r_T, abs(side))
            closure += sgn[pos] * F.area * F.normal
            # Sub-tets (x_T, x_F, v_i, v_{i+1}) over the outward-oriented loop.
            loop = F.coords if sgn[pos] > 0.0 else F.coords[::-1]
            a = loop - x_T
            b = np.roll(loop, -1, axis=0) - x_T
            vols = np.einsum("ij,ij->i", np.cross(F.x_F - x_T, a), b) / 6.0
            if np.any(vols <= 0.0):
                raise MeshError(
                    f"cell {T} is not star-shaped about x_T: degenerate sub-pyramid "
                    f"on face {f}"
                )
            volume += float(vols.sum())
        if np.linalg.norm(closure) > CLOSURE_RTOL * h_T**2:
            raise MeshError(
                f"cell {T} violates the closure identity sum eps |F| n_F = 0: "
                f"|sum| = {np.linalg.norm(closure):.3e}"
            )
        cells.append(
            CellGeometry(
                cell_id=T,
                face_ids=tuple(cell_face_ids[T]),
                vertex_ids=vids,
                x_T=x_T,
                h_T=h_T,
                r_T=float(r_T),
                volume=volume,
                eta=float(eta[T]),
            )
        )
        signs.append(sgn)

    # Interface signs cancel by construction (T+ gets +1, T- gets -1).
    for F in faces:
        if not F.is_boundary:
            sT = [signs[T][cells[T].face_ids.index(F.face_id)] for T in F.cells]
            if sT[0] != 1.0 or sum(sT) != 0.0:
                raise MeshError(f"orientation signs on interface {F.face_id} do not cancel")
        elif signs[F.cells[0]][cells[F.cells[0]].face_ids.index(F.face_id)] != 1.0:
            raise MeshError(f"boundary face {F.face_id} must have eps = +1")

    gamma_sets, faces = _boundary_components(faces)
    beta2 = len(gamma_sets) - 1
    chi = _euler_characteristic(vertices, faces, n_cells)
    beta1 = 1 + beta2 - chi
    if beta1 < 0:
        raise MeshError(f"computed Euler characteristic {chi} implies beta1 = {beta1} < 0")

    sigma_sets = [
        SigmaSurface(face_ids=tuple(fids), normal=np.asarray(n, dtype=float) / np.linalg.norm(n))
        for fids, n in sigma_decls
    ]
    _validate_sigma_sets(faces, sigma_sets)
    if beta1 > 0 and len(sigma_sets) < beta1:
        warnings.append(
            f"mesh has beta1 = {beta1} but only {len(sigma_sets)} cut surface(s) declared; "
            "flux-augmented forms on the normal-trace side will be incomplete"
        )

    if declared_topology is not None:
        db1, db2 = declared_topology.get("beta1"), declared_topology.get("beta2")
        if db1 is not None and db1 != beta1:
            raise MeshError(f"declared beta1 = {db1} but computed beta1 = {beta1}")
        if db2 is not None and db2 != beta2:
            raise MeshError(f"declared beta2 = {db2} but computed beta2 = {beta2}")
        declared_gamma = declared_topology.get("gamma_sets")
        if declared_gamma is not None:
            got = {frozenset(g) for g in declared_gamma}
            want = {frozenset(g) for g in gamma_sets}
            if got != want:
                raise MeshError("declared boundary components do not match the computed ones")

    return PolyMesh(
        vertices=vertices,
        cells=cells,
        faces=faces,
        cell_face_signs=signs,
        beta1=beta1,
        beta2=beta2,
        gamma_sets=gamma_sets,
        sigma_sets=sigma_sets,
        warnings=tuple(warnings),
    )


def _boundary_components(
    faces: list[FaceGeometry],
) -> tuple[list[tuple[int, ...]], list[FaceGeometry]]:
    """Split boundary faces into closed connected components; largest first."""
    boundary = [F.face_id for F in faces if F.is_boundary]
    edge_map: dict[frozenset, list[int]] = {}
    for f in boundary:
        vids = faces[f].vertex_ids
        for i in range(len(vids)):
            edge_map.setdefault(frozenset((vids[i], vids[(i + 1) % len(vids)])), []).append(f)
    for edge, owners in edge_map.items():
        if len(owners) != 2:
            raise MeshError(
                f"boundary is not a closed surface: edge {sorted(edge)} belongs to "
                f"{len(owners)} boundary face(s)"
            )
    adjacency: dict[int, set[int]] = {f: set() for f in boundary}
    for owners in edge_map.values():
        a, b = owners
        adjacency[a].add(b)
        adjacency[b].add(a)
    seen: set[int] = set()
    comps: list[list[int]] = []
    for f in boundary:
        if f in seen:
            continue
        stack, comp = [f], []
        seen.add(f)
        while stack:
            g = stack.pop()
            comp.append(g)
            for nb in adjacency[g]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        comps.append(sorted(comp))
    # The outer component encloses the rest: it has the largest total area.
    comps.sort(key=lambda c: (-sum(faces[f].area for f in c), c[0]))
    labeled = list(faces)
    for j, comp in enumerate(comps):
        for f in comp:
            labeled[f] = replace(labeled[f], boundary_component=j)
    return [tuple(c) for c in comps], labeled


def _euler_characteristic(vertices: np.ndarray, faces: list[FaceGeometry], n_cells: int) -> int:
    used = {v for F in faces for v in F.vertex_ids}
    edges = {
        frozenset((F.vertex_ids[i], F.vertex_ids[(i + 1) % len(F.vertex_ids)]))
        for F in faces
        for i in range(len(F.vertex_ids))
    }
    return len(used) - len(edges) + len(faces) - n_cells


def _validate_sigma_sets(faces: list[FaceGeometry], sigma_sets: list[SigmaSurface]) -> None:
    """Each declared cut surface must be a connected planar interface patch."""
    for i, sig in enumerate(sigma_sets, start=1):
        if not sig.face_ids:
            raise MeshError(f"cut surface {i} is empty")
        offsets = []
        scale = 0.0
        for f in sig.face_ids:
            F = faces[f]
            if F.is_boundary:
                raise MeshError(f"cut surface {i} contains boundary face {f}")
            if np.linalg.norm(F.normal - sig.normal) > 1e-12:
                raise MeshError(f"face {f} of cut surface {i} has a mismatched normal")
            offsets.append(F.x_F @ sig.normal)
            scale = max(scale, F.h_F)
        if max(offsets) - min(offsets) > 1e-10 * max(scale, 1.0):
            raise MeshError(f"cut surface {i} is not planar")
        edge_map: dict[frozenset, list[int]] = {}
        for f in sig.face_ids:
            vids = faces[f].vertex_ids
            for k in range(len(vids)):
                edge_map.setdefault(frozenset((vids[k], vids[(k + 1) % len(vids)])), []).append(f)
        adjacency = {f: set() for f in sig.face_ids}
        for owners in edge_map.values():
            for a, b in itertools.combinations(owners, 2):
                adjacency[a].add(b)
                adjacency[b].add(a)
        seen = {sig.face_ids[0]}
        stack = [sig.face_ids[0]]
        while stack:
            for nb in adjacency[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) != len(sig.face_ids):
            raise MeshError(f"cut surface {i} is not edge-connected")


# ---------------------------------------------------------------------------
# structured generators
# ---------------------------------------------------------------------------


def gen_structured(
    domain_kind: str,
    divisions: int,
    eta: float | np.ndarray | None = None,
) -> PolyMesh:
    """Generate a structured hexahedral mesh of one of the built-in domains.

    ``solid_cube`` meshes the unit cube. ``hollow_cube`` removes the closed
    middle-third sub-cube, creating an internal cavity. ``through_hole_cube``
    removes the middle-third square channel along the z axis, creating a
    tunnel; a cut surface is tagged on a single grid plane y = const on the
    channel's low-x side, oriented by +e_y.

    Parameters
    ----------
    domain_kind : one of ``DOMAIN_KINDS``
    divisions : subdivisions per axis; must be divisible by 3 for the
        non-trivial kinds so the removed region aligns with the grid
    eta : uniform positive value, or one positive value per kept cell
    """
    if domain_kind not in DOMAIN_KINDS:
        raise MeshError(f"unknown domain kind {domain_kind!r}; expected one of {DOMAIN_KINDS}")
    N = int(divisions)
    if N < 1:
        raise MeshError("divisions must be a positive integer")
    if domain_kind != "solid_cube" and N % 3 != 0:
        raise MeshError(f"{domain_kind} requires divisions divisible by 3, got {N}")

    third = N // 3

    def kept(i: int, j: int, k: int) -> bool:
        if domain_kind == "hollow_cube":
            return not (third <= i < 2 * third and third <= j < 2 * third and third <= k < 2 * third)
        if domain_kind == "through_hole_cube":
            return not (third <= i < 2 * third and third <= j < 2 * third)
        return True

    grid = np.linspace(0.0, 1.0, N + 1)

    def vid(i: int, j: int, k: int) -> int:
        return i + (N + 1) * (j + (N + 1) * k)

    # Iteration order (k, j, i) with i fastest matches vid().
    vertices = np.array(
        [[grid[i], grid[j], grid[k]] for k in range(N + 1) for j in range(N + 1) for i in range(N + 1)]
    )

    cell_index: dict[tuple[int, int, int], int] = {}
    for k in range(N):
        for j in range(N):
            for i in range(N):
                if kept(i, j, k):
                    cell_index[(i, j, k)] = len(cell_index)
    if not cell_index:
        raise MeshError("no cells kept; divisions too small for this domain kind")

    cell_face_ids: list[list[int]] = [[] for _ in cell_index]
    face_vertex_ids: list[list[int]] = []
    face_cells: list[list[int]] = []
    face_lookup: dict[tuple[int, int, int, int], int] = {}

    # Faces plane by plane; loop in-plane axes follow the cyclic order
    # (axis+1, axis+2) so every loop is right-handed about +e_axis.
    for axis in range(3):
        for p in range(N + 1):
            for b in range(N):
                for a in range(N):
                    idx_lo = [0, 0, 0]
                    idx_lo[axis] = p - 1
                    idx_lo[(axis + 1) % 3] = a
                    idx_lo[(axis + 2) % 3] = b
                    idx_hi = [0, 0, 0]
                    idx_hi[axis] = p
                    idx_hi[(axis + 1) % 3] = a
                    idx_hi[(axis + 2) % 3] = b
                    lo = cell_index.get(tuple(idx_lo)) if p > 0 else None
                    hi = cell_index.get(tuple(idx_hi)) if p < N else None
                    if lo is None and hi is None:
                        continue
                    base = [0, 0, 0]
                    base[axis] = p
                    corners = []
                    for da, db in ((0, 0), (1, 0), (1, 1), (0, 1)):
                        c = list(base)
                        c[(axis + 1) % 3] = a + da
                        c[(axis + 2) % 3] = b + db
                        corners.append(vid(*c))
                    f = len(face_vertex_ids)
                    face_lookup[(axis, p, a, b)] = f
                    face_vertex_ids.append(corners)
                    owners = [T for T in (lo, hi) if T is not None]
                    face_cells.append(owners)
                    for T in owners:
                        cell_face_ids[T].append(f)

    sigma_decls: list[tuple[list[int], np.ndarray]] = []
    if domain_kind == "through_hole_cube":
        # Cut plane y = (N//2)/N over the low-x side column x in [0, 1/3];
        # joins the outer boundary to the channel wall, oriented by +e_y.
        # axis=1 faces are keyed (axis, p, a, b) with (a, b) = (z, x).
        p = N // 2
        fids = sorted(face_lookup[(1, p, zz, xx)] for zz in range(N) for xx in range(third))
        sigma_decls.append((fids, np.array([0.0, 1.0, 0.0])))

    if eta is None:
        eta_arr = np.ones(len(cell_index))
    elif np.isscalar(eta):
        eta_arr = np.full(len(cell_index), float(eta))
    else:
        eta_arr = np.asarray(eta, dtype=float)

    return _build_mesh(
        vertices=vertices,
        cell_face_ids=cell_face_ids,
        face_vertex_ids=face_vertex_ids,
        face_cell_ids=face_cells,
        eta=eta_arr,
        sigma_decls=sigma_decls,
    )


def checkerboard_eta(domain_kind: str, divisions: int, low: float, high: float) -> np.ndarray:
    """Per-cell eta alternating with the parity of i+j+k on the structured grid."""
    if domain_kind not in DOMAIN_KINDS:
        raise MeshError(f"unknown domain kind {domain_kind!r}")
    N = int(divisions)
    third = N // 3
    vals = []
    for k in range(N):
        for j in range(N):
            for i in range(N):
                if domain_kind == "hollow_cube" and (
                    third <= i < 2 * third and third <= j < 2 * third and third <= k < 2 * third
                ):
                    continue
                if domain_kind == "through_hole_cube" and (
                    third <= i < 2 * third and third <= j < 2 * third
                ):
                    continue
                vals.append(low if (i + j + k) % 2 == 0 else high)
    return np.array(vals)


def with_eta(mesh: PolyMesh, eta: float | np.ndarray) -> PolyMesh:
    """Copy of ``mesh`` with a replaced coefficient field."""
    if np.isscalar(eta):
        eta_arr = np.full(mesh.n_cells, float(eta))
    else:
        eta_arr = np.asarray(eta, dtype=float)
        if eta_arr.shape != (mesh.n_cells,):
            raise MeshError("eta must give one value per cell")
    if np.any(eta_arr <= 0.0):
        raise MeshError("eta must be positive")
    cells = [replace(T, eta=float(eta_arr[T.cell_id])) for T in mesh.cells]
    return PolyMesh(
        vertices=mesh.vertices,
        cells=cells,
        faces=mesh.faces,
        cell_face_signs=mesh._signs,
        beta1=mesh.beta1,
        beta2=mesh.beta2,
        gamma_sets=mesh.gamma_sets,
        sigma_sets=mesh.sigma_sets,
        warnings=mesh.warnings,
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def mesh_to_dict(mesh: PolyMesh) -> dict:
    """Schema dict: vertices, cells, faces, topology, eta. All ids 0-based."""
    return {
        "vertices": [[float(x) for x in v] for v in mesh.vertices],
        "cells": [
            {"faces": list(T.face_ids), "star_point": [float(x) for x in T.x_T]}
            for T in mesh.cells
        ],
        "faces": [
            {"vertices": list(F.vertex_ids), "cells": sorted(F.cells)} for F in mesh.faces
        ],
        "topology": {
            "beta1": mesh.beta1,
            "beta2": mesh.beta2,
            "gamma_sets": [list(g) for g in mesh.gamma_sets],
            "sigma_sets": [
                {"faces": list(s.face_ids), "normal": [float(x) for x in s.normal]}
                for s in mesh.sigma_sets
            ],
        },
        "eta": [T.eta for T in mesh.cells],
    }


def save_mesh(mesh: PolyMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(mesh_to_dict(mesh), fh, indent=1)
        fh.write("\n")


def mesh_content_hash(mesh: PolyMesh) -> str:
    payload = json.dumps(mesh_to_dict(mesh), sort_keys=True).encode()
    return hashlib.sha256(payload).hexdigest()


def load_mesh(path) -> PolyMesh:
    """Load a mesh from the JSON schema; frames and signs are recomputed."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MeshError(f"not valid JSON: {exc}") from exc
    return mesh_from_dict(data)


def mesh_from_dict(data: dict) -> PolyMesh:
    for key in ("vertices", "cells", "faces"):
        if key not in data:
            raise MeshError(f"mesh file missing required key {key!r}")
    vertices = np.asarray(data["vertices"], dtype=float)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise MeshError("vertices must be a list of [x, y, z] triples")
    cell_face_ids = []
    star_points = {}
    for T, entry in enumerate(data["cells"]):
        cell_face_ids.append([int(f) for f in entry["faces"]])
        if entry.get("star_point") is not None:
            star_points[T] = np.asarray(entry["star_point"], dtype=float)
    face_vertex_ids = [[int(v) for v in entry["vertices"]] for entry in data["faces"]]
    face_cells = [[int(T) for T in entry["cells"]] for entry in data["faces"]]

    warnings: list[str] = []
    topo = data.get("topology") or {}
    sigma_decls = []
    for entry in topo.get("sigma_sets", []):
        sigma_decls.append(([int(f) for f in entry["faces"]], np.asarray(entry["normal"], float)))

    eta_raw = data.get("eta")
    if eta_raw is None:
        eta = np.ones(len(cell_face_ids))
        warnings.append("mesh file has no eta field; defaulting to eta = 1")
    else:
        eta = np.asarray(eta_raw, dtype=float)

    declared = None
    if topo:
        declared = {
            "beta1": topo.get("beta1"),
            "beta2": topo.get("beta2"),
            "gamma_sets": topo.get("gamma_sets"),
        }

    mesh = _build_mesh(
        vertices=vertices,
        cell_face_ids=cell_face_ids,
        face_vertex_ids=face_vertex_ids,
        face_cell_ids=face_cells,
        eta=eta,
        star_points=star_points,
        declared_topology=declared,
        sigma_decls=sigma_decls,
        warnings=warnings,
    )
    return mesh


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def regularity_report(mesh: PolyMesh) -> dict:
    """Mesh-regularity summary uniform under self-similar refinement."""
    min_rT = min(T.r_T / T.h_T for T in mesh.cells)
    min_rF = min(F.r_F / F.h_F for F in mesh.faces)
    max_ratio = max(
        mesh.cells[T].h_T / mesh.faces[f].h_F
        for T in range(mesh.n_cells)
        for f in mesh.cells[T].face_ids
    )
    return {
        "h": mesh.h,
        "min_r_T_over_h_T": min_rT,
        "min_r_F_over_h_F": min_rF,
        "max_h_T_over_h_F": max_ratio,
        "max_faces_per_cell": max(len(T.face_ids) for T in mesh.cells),
    }

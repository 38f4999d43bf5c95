"""Mesh generation, orientation, topology counts, and serialization."""

import json
import math

import numpy as np
import pytest

from weberlab import (
    MeshError,
    checkerboard_eta,
    gen_structured,
    load_mesh,
    mesh_content_hash,
    regularity_report,
    save_mesh,
    with_eta,
)
from weberlab.mesh import mesh_from_dict, mesh_to_dict


def test_solid_cube_counts(solid2):
    assert solid2.n_cells == 8
    assert solid2.n_faces == 36
    assert len(solid2.boundary_faces) == 24
    assert solid2.h == pytest.approx(math.sqrt(3) / 2)
    assert solid2.beta1 == 0 and solid2.beta2 == 0
    assert len(solid2.gamma_sets) == 1
    assert solid2.sigma_sets == []


def test_hollow_cube_counts(hollow3):
    assert hollow3.n_cells == 26
    assert hollow3.n_faces == 108
    assert len(hollow3.boundary_faces) == 60
    assert hollow3.beta1 == 0 and hollow3.beta2 == 1
    assert len(hollow3.gamma_sets) == 2
    # gamma_sets[0] is the outer component: 54 outer faces vs 6 cavity walls
    assert len(hollow3.gamma_sets[0]) == 54
    assert len(hollow3.gamma_sets[1]) == 6
    cavity_area = sum(hollow3.faces[f].area for f in hollow3.gamma_sets[1])
    assert cavity_area == pytest.approx(6 * (1 / 3) ** 2)


def test_through_hole_counts(through3):
    assert through3.n_cells == 24
    assert through3.n_faces == 104
    assert len(through3.boundary_faces) == 64
    assert through3.beta1 == 1 and through3.beta2 == 0
    assert len(through3.gamma_sets) == 1
    assert len(through3.sigma_sets) == 1
    sigma = through3.sigma_sets[0]
    np.testing.assert_allclose(sigma.normal, [0.0, 1.0, 0.0], atol=1e-14)
    for f in sigma.face_ids:
        F = through3.faces[f]
        assert not F.is_boundary
        assert F.x_F[1] == pytest.approx(1 / 3)
        # the cut sits in the column left of the channel
        assert F.x_F[0] < 1 / 3 + 1e-12


def test_face_frames_orthonormal(solid2):
    for F in solid2.faces:
        M = np.stack([F.tau1, F.tau2, F.normal])
        np.testing.assert_allclose(M @ M.T, np.eye(3), atol=1e-12)
        assert np.linalg.det(M) == pytest.approx(1.0, abs=1e-12)
        # vertices lie in the frame plane
        rel = F.coords - F.x_F
        assert np.abs(rel @ F.normal).max() < 1e-12 * F.h_F


def test_epsilon_signs(hollow3):
    # boundary faces: outward normal, owning cell has eps = +1
    for f in hollow3.boundary_faces:
        F = hollow3.faces[f]
        assert hollow3.epsilon(F.cells[0], f) == 1.0
    # interfaces: the two sides disagree
    for f in hollow3.interface_faces:
        F = hollow3.faces[f]
        tp, tm = F.cells
        assert hollow3.epsilon(tp, f) == -hollow3.epsilon(tm, f)


def test_cell_closure_identity(solid2):
    # sum over faces of eps |F| n_F vanishes for every closed cell
    for T in solid2.cells:
        acc = np.zeros(3)
        for f in T.face_ids:
            F = solid2.faces[f]
            acc += solid2.epsilon(T.cell_id, f) * F.area * F.normal
        assert np.linalg.norm(acc) < 1e-12 * T.h_T**2


def test_volumes_partition_domain(hollow3, through3):
    assert sum(T.volume for T in hollow3.cells) == pytest.approx(1 - (1 / 3) ** 3)
    assert sum(T.volume for T in through3.cells) == pytest.approx(1 - (1 / 3) ** 2)


def test_divisions_must_resolve_feature():
    with pytest.raises(MeshError):
        gen_structured("hollow_cube", 4)
    with pytest.raises(MeshError):
        gen_structured("through_hole_cube", 2)
    with pytest.raises(MeshError):
        gen_structured("unknown_kind", 2)


def test_roundtrip_and_hash(tmp_path, hollow3):
    path = tmp_path / "m.json"
    save_mesh(hollow3, path)
    again = load_mesh(path)
    assert again.n_cells == hollow3.n_cells
    assert again.beta2 == hollow3.beta2
    assert mesh_content_hash(again) == mesh_content_hash(hollow3)
    # hash is content-derived: a different mesh hashes differently
    assert mesh_content_hash(gen_structured("solid_cube", 2)) != \
        mesh_content_hash(hollow3)


def test_declared_topology_is_checked(hollow3):
    data = mesh_to_dict(hollow3)
    data["topology"]["beta2"] = 0
    with pytest.raises(MeshError, match="beta2"):
        mesh_from_dict(data)


def test_checkerboard_eta(solid2):
    eta = checkerboard_eta("solid_cube", 2, 1.0, 10.0)
    assert eta.shape == (8,)
    assert set(np.unique(eta)) == {1.0, 10.0}
    mesh = with_eta(solid2, eta)
    assert mesh.eta_min == 1.0 and mesh.eta_max == 10.0
    assert mesh.kappa_eta == 10.0
    # neighbors through a face carry different values
    for f in mesh.interface_faces:
        tp, tm = mesh.faces[f].cells
        assert mesh.cells[tp].eta != mesh.cells[tm].eta


def test_eta_must_be_positive(solid2):
    with pytest.raises(MeshError):
        with_eta(solid2, -1.0)
    bad = np.ones(8)
    bad[3] = 0.0
    with pytest.raises(MeshError):
        with_eta(solid2, bad)


def test_regularity_report_refinement_stable():
    r2 = regularity_report(gen_structured("solid_cube", 2))
    r4 = regularity_report(gen_structured("solid_cube", 4))
    assert r2["min_r_T_over_h_T"] == pytest.approx(r4["min_r_T_over_h_T"])
    assert r2["max_h_T_over_h_F"] == pytest.approx(r4["max_h_T_over_h_F"])
    assert r4["h"] == pytest.approx(r2["h"] / 2)


def test_corrupt_payload_rejected(hollow3):
    data = mesh_to_dict(hollow3)
    data["faces"][0]["vertices"] = data["faces"][0]["vertices"][:2]
    with pytest.raises((MeshError, ValueError)):
        mesh_from_dict(data)

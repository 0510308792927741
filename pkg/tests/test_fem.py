import dataclasses
import warnings

import numpy as np
import pytest
from conftest import cube_hex

from virtobj import fem, geometry
from virtobj.materials import MaterialRecord

WATERISH = MaterialRecord("test", 1000.0, 1e9, 0.3, 0.0, 0.0)


def test_lumped_mass_entries():
    _, me = fem.element_matrices(1.0, WATERISH)
    np.testing.assert_array_equal(me, 125.0)
    assert me.shape == (24,)


def test_element_stiffness_kills_translation():
    Ke, _ = fem.element_matrices(1.0, WATERISH)
    t = np.tile([1.0, 0.0, 0.0], 8)
    assert np.abs(Ke @ t).max() < 1e-9 * np.abs(Ke).max()


def test_element_stiffness_symmetric_psd():
    Ke = fem.element_stiffness(0.1, 1e9, 0.3)
    np.testing.assert_array_equal(Ke, Ke.T)
    w = np.linalg.eigvalsh(Ke)
    assert np.sum(w < 1e-9 * w.max()) == 6
    assert w.min() > -1e-9 * w.max()


def test_element_stiffness_linear_in_E():
    np.testing.assert_allclose(fem.element_stiffness(0.5, 2e9, 0.25),
                               2.0 * fem.element_stiffness(0.5, 1e9, 0.25), rtol=1e-14)


def test_element_stiffness_scales_with_edge():
    # K ~ E h for a cube element
    np.testing.assert_allclose(fem.element_stiffness(2.0, 1e9, 0.25),
                               2.0 * fem.element_stiffness(1.0, 1e9, 0.25), rtol=1e-13)


def test_single_element_system():
    s = fem.assemble(cube_hex(1), WATERISH)
    assert s.dof_count == 24
    np.testing.assert_array_equal(s.M, 125.0)


def test_two_voxels():
    occ = np.ones((2, 1, 1), dtype=bool)
    hx = geometry.hex_from_occupancy(occ, np.zeros(3), 1.0)
    assert hx.n_nodes == 12
    assert fem.assemble(hx, WATERISH).dof_count == 36


def test_rigid_modes_in_null_space():
    hx = voxelize_sphere()
    s = fem.assemble(hx, WATERISH)
    R = fem.rigid_body_modes(hx.nodes)
    knorm = abs(s.K).max()
    assert np.abs(s.K @ R).max() < 1e-9 * knorm * np.abs(R).max()


def voxelize_sphere():
    return geometry.voxelize(geometry.icosphere(0.5, 2), 5)


def test_total_mass_exact():
    hx = voxelize_sphere()
    s = fem.assemble(hx, WATERISH)
    total = WATERISH.density * hx.n_elements * hx.voxel_edge ** 3
    assert s.M[0::3].sum() == pytest.approx(total, rel=1e-14)


def test_assembly_permutation_consistent(rng):
    hx = voxelize_sphere()
    perm = rng.permutation(hx.n_elements)
    hp = dataclasses.replace(hx, elements=hx.elements[perm])
    a = fem.assemble(hx, WATERISH)
    b = fem.assemble(hp, WATERISH)
    assert (a.K != b.K).nnz == 0
    np.testing.assert_array_equal(a.M, b.M)


def test_disconnected_warns():
    occ = np.zeros((3, 1, 1), dtype=bool)
    occ[0] = occ[2] = True
    hx = geometry.hex_from_occupancy(occ, np.zeros(3), 1.0)
    with pytest.warns(fem.DisconnectedMeshWarning):
        s = fem.assemble(hx, WATERISH)
    assert s.n_components == 2


def test_connected_does_not_warn():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert fem.assemble(cube_hex(2), WATERISH).n_components == 1


def test_edge_contact_counts_as_connected():
    # voxels sharing only an edge share two nodes
    occ = np.zeros((2, 2, 1), dtype=bool)
    occ[0, 0] = occ[1, 1] = True
    hx = geometry.hex_from_occupancy(occ, np.zeros(3), 1.0)
    assert fem.count_components(hx) == 1

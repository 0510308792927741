import dataclasses

import numpy as np
import pytest
import scipy.sparse as sp
from conftest import cube_hex

from virtobj import eigensolver as es
from virtobj import geometry
from virtobj.fem import SystemMatrices, assemble


def test_diagonal_case():
    s = SystemMatrices(np.ones(3), sp.csr_matrix(np.diag([4.0, 1.0, 9.0])))
    sol = es.solve_dense(s)
    np.testing.assert_allclose(sol.eigenvalues, [1, 4, 9])
    np.testing.assert_allclose(np.abs(sol.eigenvectors), np.eye(3)[:, [1, 0, 2]])


def test_single_hex_rigid_count(ceramic):
    s = assemble(cube_hex(1), ceramic)
    sol = es.solve_dense(s)
    assert int(np.sum(np.abs(sol.eigenvalues) < 1e-6 * sol.lambda_max)) == 6


def test_scaling_K(ceramic):
    s = assemble(cube_hex(2), ceramic)
    a = es.solve_dense(s)
    b = es.solve_dense(SystemMatrices(s.M, (4.0 * s.K).tocsr()))
    el = ~a.rigid_mask()
    np.testing.assert_allclose(b.eigenvalues[el], 4.0 * a.eigenvalues[el], rtol=1e-10)
    # distinct modes are unique up to sign, and signs are fixed
    lam = a.eigenvalues[el]
    simple = np.flatnonzero(el)[np.r_[True, np.diff(lam) > 1e-6 * lam[1:]] & np.r_[np.diff(lam) > 1e-6 * lam[:-1], True]]
    assert simple.size > 0
    np.testing.assert_allclose(b.eigenvectors[:, simple], a.eigenvectors[:, simple], atol=1e-8)


def test_dense_cap(ceramic):
    s = assemble(cube_hex(2), ceramic)
    with pytest.raises(es.EigenError):
        es.solve_dense(s, dense_cap=10)


def test_sign_convention(small_system):
    _, s = small_system
    U = es.solve_dense(s).eigenvectors
    idx = np.argmax(np.abs(U), axis=0)
    assert np.all(U[idx, np.arange(U.shape[1])] > 0)


@pytest.mark.parametrize("mesh", ["block4", "sphere", "plate"])
def test_lanczos_matches_dense(ceramic, mesh):
    if mesh == "block4":
        hx = cube_hex(4, 0.25)
    elif mesh == "sphere":
        hx = geometry.voxelize(geometry.icosphere(0.5, 2), 7)
    else:
        hx = geometry.voxelize(geometry.box_mesh((1.0, 1.0, 0.1)), 10)
    s = assemble(hx, ceramic)
    assert s.dof_count <= 3000
    it = es.solve_lowest(s, 50)
    ref = es.solve_dense(s).take(slice(0, 50))
    el = ~ref.rigid_mask()
    rel = np.abs(it.eigenvalues[el] - ref.eigenvalues[el]) / ref.eigenvalues[el]
    assert rel.max() < 1e-8
    assert np.all(np.abs(it.eigenvalues[~el]) < 1e-6 * ref.lambda_max)
    res, ortho = es.residuals(s, it)
    assert res.max() < 1e-8
    assert ortho < 1e-8


def test_huge_request_returns_full_spectrum(ceramic):
    s = assemble(cube_hex(2), ceramic)
    sol = es.solve_lowest(s, 10_000)
    assert sol.n_modes == s.dof_count


def test_freq_cap_zero_keeps_only_rigid(small_system):
    _, s = small_system
    sol = es.solve_lowest(s, 30, freq_cap=0.0)
    assert sol.n_modes == 6
    assert np.all(sol.rigid_mask())


def test_freq_cap_truncates(small_system):
    _, s = small_system
    full = es.solve_lowest(s, 30)
    hz = np.sqrt(np.maximum(full.eigenvalues, 0)) / (2 * np.pi)
    cap = 0.5 * (hz[10] + hz[20])
    capped = es.solve_lowest(s, 30, freq_cap=cap)
    assert capped.n_modes == int(np.sum(hz <= cap))


def test_node_reordering_invariance(ceramic, rng):
    hx = geometry.voxelize(geometry.icosphere(0.5, 2), 5)
    s = assemble(hx, ceramic)
    perm = rng.permutation(hx.n_nodes)
    inv = np.argsort(perm)
    hp = dataclasses.replace(hx, nodes=hx.nodes[perm], elements=inv[hx.elements])
    a = es.solve_dense(s)
    b = es.solve_dense(assemble(hp, ceramic))
    el = ~a.rigid_mask()
    np.testing.assert_allclose(b.eigenvalues[el], a.eigenvalues[el], rtol=1e-9)


def test_geometric_scaling(ceramic):
    a = es.solve_dense(assemble(cube_hex(3, 1.0), ceramic))
    b = es.solve_dense(assemble(cube_hex(3, 2.0), ceramic))
    el = ~a.rigid_mask()
    np.testing.assert_allclose(b.eigenvalues[el], a.eigenvalues[el] / 4.0, rtol=1e-9)


def test_lanczos_deterministic(small_system):
    _, s = small_system
    a = es.solve_lowest(s, 20)
    b = es.solve_lowest(s, 20)
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
    np.testing.assert_array_equal(a.eigenvectors, b.eigenvectors)


def test_bad_requests(small_system):
    _, s = small_system
    with pytest.raises(ValueError):
        es.solve_lowest(s, 0)
    with pytest.raises(ValueError):
        es.solve_lowest(s, 5, shift=1.0)


def test_convergence_error_reports_residual(small_system):
    _, s = small_system
    with pytest.raises(es.ConvergenceError) as err:
        es.solve_lowest(s, 40, max_restarts=0, tol=1e-30)
    assert err.value.residual > 0

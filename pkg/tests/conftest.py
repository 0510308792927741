import sys
import time

import numpy as np
import pytest

from virtobj import geometry
from virtobj.fem import assemble
from virtobj.materials import MaterialRecord, lookup


SUITE_BUDGET_S = 300.0
_t0 = [0.0]


def pytest_sessionstart(session):
    _t0[0] = time.perf_counter()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    elapsed = time.perf_counter() - _t0[0]
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
    ok = elapsed < SUITE_BUDGET_S
    terminalreporter.write_line(
        f"[{'PASS' if ok else 'FAIL'}] AC10 suite wall time: {elapsed:.1f} s (< {SUITE_BUDGET_S:.0f} s)"
    )


def plane_patch(half_width_m=0.02, n=8):
    """Flat square patch in z=0 with +z normals everywhere (open mesh)."""
    s = np.linspace(-half_width_m, half_width_m, n + 1)
    X, Y = np.meshgrid(s, s, indexing="xy")
    verts = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], axis=1)
    tris = []
    for j in range(n):
        for i in range(n):
            a = j * (n + 1) + i
            b, c, d = a + 1, a + n + 2, a + n + 1
            tris += [(a, b, c), (a, c, d)]
    return geometry.TriangleMesh.from_arrays(verts, np.array(tris))


def cube_hex(n, edge=1.0):
    """Solid n x n x n block of voxels."""
    return geometry.hex_from_occupancy(np.ones((n, n, n), dtype=bool), np.zeros(3), edge)


@pytest.fixture(scope="session")
def ceramic():
    return lookup("ceramic")


@pytest.fixture(scope="session")
def undamped():
    return MaterialRecord("undamped", 2700.0, 7.2e10, 0.19, 0.0, 0.0)


@pytest.fixture(scope="session")
def unit_cube():
    return geometry.box_mesh(1.0, center=(0.5, 0.5, 0.5))


@pytest.fixture(scope="session")
def small_system(ceramic):
    """Free 4x4x4 block: 375 dof, dense and iterative both feasible."""
    hx = cube_hex(4, 0.25)
    return hx, assemble(hx, ceramic)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_container(rng, with_colors=None):
    """A valid object file container with random but consistent contents."""
    from virtobj import modal
    from virtobj.objectfile import BuildInfo, FieldParams, ObjectFileContainer
    from virtobj.touch import TactileConfig

    dims = tuple(int(d) for d in rng.integers(1, 5, 3))
    occ = rng.random(dims) < 0.6
    occ.flat[rng.integers(occ.size)] = True
    h = float(rng.uniform(0.01, 0.2))
    hx = geometry.hex_from_occupancy(occ, rng.normal(size=3), h)
    surf = geometry.icosphere(float(rng.uniform(0.05, 0.5)), int(rng.integers(0, 2)))
    colors = None
    if with_colors or (with_colors is None and rng.random() < 0.5):
        colors = rng.random((surf.n_vertices, 3))
    surf = geometry.TriangleMesh.from_arrays(surf.vertices + hx.origin, surf.triangles, colors)
    mat = MaterialRecord(f"m{int(rng.integers(1000))}", float(rng.uniform(100, 9000)),
                         float(rng.uniform(1e8, 3e11)), float(rng.uniform(0.0, 0.49)),
                         float(rng.uniform(0, 20)), float(rng.uniform(0, 1e-7)))
    k = int(rng.integers(0, 12))
    lam = np.sort((2 * np.pi * rng.uniform(50, 15000, k)) ** 2)
    c, w = modal.mode_params_array(lam, mat.rayleigh_alpha, mat.rayleigh_beta)
    model = modal.ModalModel(lam, c, w, rng.normal(size=(hx.n_nodes, 3, k)), mat,
                             geometry.map_surface_to_hex(surf, hx))
    tact = TactileConfig(width=int(rng.integers(10, 200)), height=int(rng.integers(10, 200)),
                         press_depth=float(rng.uniform(0.1, 2.0)))
    fp = FieldParams(float(rng.uniform(1, 1000)), tuple(float(x) for x in rng.random(3)), bool(rng.random() < 0.5))
    build = BuildInfo(int(rng.integers(1, 64)), k, float(rng.uniform(1000, 20000)), rng.bytes(32))
    return ObjectFileContainer(f"obj-{int(rng.integers(1 << 30))}", mat, hx, surf, model, tact, fp, build)

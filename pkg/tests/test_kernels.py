"""The numba and numpy backends must agree on every kernel."""
import numpy as np
import pytest

from virtobj import geometry, kernels

nb = kernels.numba_backend
npb = kernels.numpy_backend
pytestmark = pytest.mark.skipif(nb is None, reason="numba backend disabled")


@pytest.fixture(scope="module")
def sphere_tris():
    return geometry.icosphere(1.0, 2).triangle_coords()


def test_parity_inside(sphere_tris):
    origin = np.array([-1.1, -1.1, -1.1])
    dims = (11, 11, 11)
    h = 0.2
    args = (sphere_tris, origin, h, dims, 1.2345678e-7 * h, 2.3456789e-7 * h)
    a = nb.parity_inside(*args)
    b = npb.parity_inside(*args)
    assert np.array_equal(a, b)
    assert a.any() and not a.all()


def test_surface_voxels(sphere_tris):
    origin = np.array([-1.1, -1.1, -1.1])
    args = (sphere_tris, origin, 0.2, (11, 11, 11))
    assert np.array_equal(nb.surface_voxels(*args), npb.surface_voxels(*args))


def test_nearest4(rng):
    pts = rng.random((50, 3))
    nodes = rng.random((300, 3))
    assert np.array_equal(nb.nearest4(pts, nodes, 1e-12), npb.nearest4(pts, nodes, 1e-12))


def test_damped_sine_bank(rng):
    amp = rng.normal(size=20)
    decay = rng.uniform(0, 20, 20)
    freq = rng.uniform(50, 5000, 20)
    a = nb.damped_sine_bank(amp, decay, freq, 44100.0, 4000)
    b = npb.damped_sine_bank(amp, decay, freq, 44100.0, 4000)
    # both lose ~eps * phase in the sine; phases here reach ~3e3 rad
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12 * np.abs(amp).sum())


def test_raster_heights(rng):
    tri = rng.uniform(-5, 5, (40, 3, 3))
    u = np.linspace(-6, 6, 30)
    v = np.linspace(-6, 6, 20)
    a = nb.raster_heights(tri, u, v, 10.0)
    b = npb.raster_heights(tri, u, v, 10.0)
    assert np.array_equal(np.isfinite(a), np.isfinite(b))
    np.testing.assert_allclose(a[np.isfinite(a)], b[np.isfinite(b)], rtol=0, atol=1e-12)


def test_march_rays(rng):
    dens = rng.uniform(0, 5, (4, 3, 5))
    alb = rng.uniform(0, 1, (4, 3, 5, 3))
    P = 30
    o = np.tile([0.5, -2.0, 0.6], (P, 1)) + rng.normal(scale=0.05, size=(P, 3))
    d = np.tile([0.0, 1.0, 0.0], (P, 1)) + rng.normal(scale=0.1, size=(P, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    t_n = np.full(P, 1.5)
    t_f = np.full(P, 3.5)
    off = rng.random((P, 16))
    args = (o, d, t_n, t_f, off, dens, alb, np.zeros(3), 0.25,
            np.array([1.0, -1.0, 2.0]), np.array([3.0, 3.0, 3.0]), 8)
    ra, ta = nb.march_rays(*args)
    rb, tb = npb.march_rays(*args)
    np.testing.assert_allclose(ra, rb, rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(ta, tb, rtol=1e-12, atol=1e-14)


def test_backend_flag_names_a_backend():
    assert kernels.BACKEND_NAME in ("numba", "numpy")

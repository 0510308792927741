import numpy as np
import pytest
from conftest import plane_patch
from scipy.spatial.transform import Rotation

from virtobj import geometry, touch
from virtobj.touch import TactileConfig

R_MM = 5.0


@pytest.fixture(scope="module")
def sphere():
    return geometry.icosphere(R_MM * 1e-3, 5)


def contact_radius(mask, cfg):
    u, v = cfg.pixel_centers()
    U, V = np.meshgrid(u, v)
    return np.sqrt((U[mask] ** 2 + V[mask] ** 2).max())


def spike():
    """Needle pointing +z whose tip covers no pixel center."""
    w = 1e-5
    v = [[0, 0, 0], [-w, -w, -5e-3], [w, -w, -5e-3], [w, w, -5e-3], [-w, w, -5e-3]]
    t = [[0, 1, 2], [0, 2, 3], [0, 3, 4], [0, 4, 1], [1, 3, 2], [1, 4, 3]]
    return geometry.TriangleMesh.from_arrays(v, t)


class TestHeightmap:
    def test_plane_uniform(self):
        m = plane_patch()
        hm, mask = touch.contact_heightmap(m, 40, TactileConfig(press_depth=1.0))
        assert mask.all()
        assert np.abs(hm - 1.0).max() <= 1e-9

    def test_sphere_radius(self, sphere):
        cfg = TactileConfig(press_depth=0.5)
        hm, mask = touch.contact_heightmap(sphere, 0, cfg)
        expected = np.sqrt(2 * R_MM * 0.5 - 0.25)
        assert expected == pytest.approx(2.179, abs=1e-3)
        assert abs(contact_radius(mask, cfg) - expected) <= max(cfg.pitch)
        assert hm.max() <= 0.5 + 1e-12

    def test_no_contact(self):
        hm, mask = touch.contact_heightmap(spike(), 0, TactileConfig(press_depth=0.5))
        assert not mask.any()
        assert not hm.any()

    def test_depth_monotone(self, sphere):
        prev_h = prev_m = None
        for d in np.linspace(0.1, 1.0, 5):
            h, m = touch.contact_heightmap(sphere, 0, TactileConfig(press_depth=float(d)))
            if prev_h is not None:
                assert np.all(h >= prev_h) and np.all(m >= prev_m)
            prev_h, prev_m = h, m

    def test_frame_equivariance(self, sphere, rng):
        base = geometry.icosphere(R_MM * 1e-3, 3)
        cfg = TactileConfig(press_depth=0.6)
        v = 17
        frame = touch.tangent_frame(base.vertex_normals[v])
        h0, _ = touch.contact_heightmap(base, v, cfg, frame=frame)
        R = Rotation.random(random_state=7).as_matrix()
        h1, _ = touch.contact_heightmap(base.transformed(rotation=R), v, cfg, frame=frame @ R.T)
        assert np.abs(h1 - h0).max() <= 1e-6

    def test_bad_vertex(self, sphere):
        with pytest.raises(IndexError):
            touch.contact_heightmap(sphere, sphere.n_vertices)

    def test_tangent_frame_orthonormal(self, rng):
        for n in list(rng.normal(size=(10, 3))) + [np.array([0, 0, -2.0])]:
            F = touch.tangent_frame(n)
            np.testing.assert_allclose(F @ F.T, np.eye(3), atol=1e-12)
            np.testing.assert_allclose(F[2], n / np.linalg.norm(n))
            assert np.linalg.det(F) == pytest.approx(1.0)


class TestRender:
    def test_empty_mask_background(self):
        cfg = TactileConfig()
        img = touch.render_tactile(np.zeros((cfg.height, cfg.width)), np.zeros((cfg.height, cfg.width), bool), cfg)
        assert np.all(img.pixels == np.asarray(cfg.background))

    def test_shape_and_range(self, sphere):
        cfg = TactileConfig(press_depth=0.5)
        img = touch.touch(sphere, 0, cfg)
        assert img.pixels.shape == (cfg.height, cfg.width, 3)
        assert img.pixels.min() >= 0 and img.pixels.max() <= 1

    def test_shading_oracle(self, sphere):
        cfg = TactileConfig(press_depth=0.5)
        img = touch.touch(sphere, 0, cfg)
        u, v = cfg.pixel_centers()
        U, V = np.meshgrid(u, v)
        r2 = U ** 2 + V ** 2
        cap = np.sqrt(np.maximum(R_MM ** 2 - r2, 0))
        n = np.stack([U, V, cap], axis=-1) / R_MM
        ref = np.zeros(n.shape)
        for d, rgb in cfg.lights:
            ref += np.maximum(n @ np.asarray(d), 0)[..., None] * np.asarray(rgb)
        ref = np.clip(ref, 0, 1)
        inner = r2 < (0.6 * 2.179) ** 2
        assert np.abs(img.pixels[inner] - ref[inner]).max() < 0.02
        # each channel brightens toward its light
        for ch, (d, _) in enumerate(cfg.lights):
            toward = inner & ((U * d[0] + V * d[1]) > 0.5)
            away = inner & ((U * d[0] + V * d[1]) < -0.5)
            assert img.pixels[toward, ch].mean() > img.pixels[away, ch].mean()


def test_heightmap_file_roundtrip(tmp_path, rng):
    hm = rng.random((12, 16))
    n = touch.write_heightmap(hm, tmp_path / "h.bin")
    raw = (tmp_path / "h.bin").read_bytes()
    assert n == len(raw) == 16 + 12 * 16 * 4
    assert raw[:4] == b"HMAP"
    np.testing.assert_array_equal(touch.read_heightmap(tmp_path / "h.bin"), hm.astype(np.float32))


def test_config_validation():
    with pytest.raises(touch.TouchError):
        TactileConfig(press_depth=0)
    with pytest.raises(touch.TouchError):
        TactileConfig(width=0)

"""Emission/absorption volume rendering of a voxel scattering field.

The field stores a density and an RGB albedo per cubic cell (nearest-cell
lookup, zero outside the box). Light comes from one point source. Radiance
scattered at ``x`` toward the camera is
``I / |x - p|^2 * T_shadow(x -> p) * albedo(x) / pi`` (an isotropic
Lambertian phase), and the pixel color is the stratified quadrature
``sum_j T_j (1 - exp(-sigma_j delta)) L_s(x_j)`` over the ray's overlap with
the box, composited over the background by the residual transmittance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import HexMesh, TriangleMesh, nearest_four

DEFAULT_SIGMA = 500.0
DEFAULT_ALBEDO = (0.8, 0.8, 0.8)
DEFAULT_SAMPLES = 128


@dataclass(frozen=True, eq=False)
class ScatterField:
    density: np.ndarray  # (nx, ny, nz), 1/m
    albedo: np.ndarray  # (nx, ny, nz, 3)
    aabb_min: np.ndarray
    cell: float

    def __post_init__(self):
        if self.density.ndim != 3 or np.any(self.density < 0):
            raise ValueError("density must be a nonnegative 3-D grid")
        if self.albedo.shape != self.density.shape + (3,):
            raise ValueError("albedo grid must match density grid with 3 channels")
        if np.any(self.albedo < 0) or np.any(self.albedo > 1):
            raise ValueError("albedo must lie in [0, 1]")
        if not self.cell > 0:
            raise ValueError("cell size must be positive")

    @property
    def dims(self):
        return self.density.shape

    @property
    def aabb_max(self) -> np.ndarray:
        return self.aabb_min + self.cell * np.array(self.density.shape, dtype=np.float64)

    def _index(self, points):
        points = np.asarray(points, dtype=np.float64)
        f = np.floor((points - self.aabb_min) / self.cell).astype(np.int64)
        dims = np.array(self.density.shape)
        valid = np.all((f >= 0) & (f < dims), axis=-1)
        return np.clip(f, 0, dims - 1), valid

    def density_at(self, points) -> np.ndarray:
        f, valid = self._index(points)
        return np.where(valid, self.density[f[..., 0], f[..., 1], f[..., 2]], 0.0)

    def albedo_at(self, points) -> np.ndarray:
        f, valid = self._index(points)
        return np.where(valid[..., None], self.albedo[f[..., 0], f[..., 1], f[..., 2]], 0.0)

    @classmethod
    def constant(cls, dims, aabb_min, cell, sigma, albedo) -> "ScatterField":
        dims = tuple(int(d) for d in dims)
        dens = np.full(dims, float(sigma))
        alb = np.broadcast_to(np.asarray(albedo, dtype=np.float64), dims + (3,)).copy()
        return cls(dens, alb, np.asarray(aabb_min, dtype=np.float64), float(cell))


def field_from_hex(hex_mesh: HexMesh, sigma: float = DEFAULT_SIGMA, albedo=DEFAULT_ALBEDO,
                   mesh: TriangleMesh | None = None) -> ScatterField:
    """Density ``sigma`` inside occupied voxels; albedo constant or from vertex colors."""
    occ = hex_mesh.occupancy
    dens = np.where(occ, float(sigma), 0.0)
    alb = np.broadcast_to(np.asarray(albedo, dtype=np.float64), occ.shape + (3,)).copy()
    if mesh is not None and mesh.colors is not None:
        ii, jj, kk = np.nonzero(occ)
        centers = hex_mesh.origin + (np.stack([ii, jj, kk], axis=1) + 0.5) * hex_mesh.voxel_edge
        # nearest surface vertex per voxel (the first of the four nearest)
        near = nearest_four(centers, mesh.vertices, hex_mesh.voxel_edge)[:, 0]
        alb[ii, jj, kk] = mesh.colors[near]
    return ScatterField(dens, alb, np.asarray(hex_mesh.origin, dtype=np.float64), hex_mesh.voxel_edge)


def _unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class CameraLight:
    """Pinhole camera looking at ``look_at`` plus one point light."""

    origin: tuple = (0.0, -3.0, 0.0)
    look_at: tuple = (0.0, 0.0, 0.0)
    up: tuple = (0.0, 0.0, 1.0)
    fov: float = math.radians(40.0)
    width: int = 128
    height: int = 128
    light_pos: tuple = (2.0, -2.0, 2.0)
    light_rgb: tuple = (8.0, 8.0, 8.0)
    background: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not 0.0 < self.fov < math.pi:
            raise ValueError("fov must lie in (0, pi)")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image size must be positive")
        fwd = np.asarray(self.look_at, dtype=np.float64) - np.asarray(self.origin, dtype=np.float64)
        if np.linalg.norm(fwd) == 0 or np.linalg.norm(np.cross(fwd, self.up)) == 0:
            raise ValueError("camera orientation is degenerate")

    def basis(self):
        f = _unit(np.asarray(self.look_at, dtype=np.float64) - np.asarray(self.origin, dtype=np.float64))
        r = _unit(np.cross(f, np.asarray(self.up, dtype=np.float64)))
        u = np.cross(r, f)
        return f, r, u

    def rays(self):
        """Origins and unit directions, row-major (H*W, 3)."""
        f, r, u = self.basis()
        t = math.tan(0.5 * self.fov)
        aspect = self.width / self.height
        xs = (2.0 * (np.arange(self.width) + 0.5) / self.width - 1.0) * t * aspect
        ys = (1.0 - 2.0 * (np.arange(self.height) + 0.5) / self.height) * t
        X, Y = np.meshgrid(xs, ys)
        d = f[None, :] + X.reshape(-1, 1) * r[None, :] + Y.reshape(-1, 1) * u[None, :]
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        o = np.broadcast_to(np.asarray(self.origin, dtype=np.float64), d.shape).copy()
        return o, d


def clip_to_box(origins, dirs, lo, hi):
    """Entry and exit parameters (t >= 0) of rays through a box; misses give (0, 0)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
        t1 = (lo - origins) * inv
        t2 = (hi - origins) * inv
    tmin = np.where(dirs == 0.0, -np.inf, np.minimum(t1, t2))
    tmax = np.where(dirs == 0.0, np.inf, np.maximum(t1, t2))
    # parallel rays outside their slab miss
    outside = (dirs == 0.0) & ((origins < lo) | (origins > hi))
    t_in = np.maximum(tmin.max(axis=1), 0.0)
    t_out = tmax.min(axis=1)
    miss = outside.any(axis=1) | (t_out <= t_in)
    return np.where(miss, 0.0, t_in), np.where(miss, 0.0, t_out)


def _offsets(shape, deterministic, rng):
    if deterministic:
        return np.full(shape, 0.5)
    rng = rng if rng is not None else np.random.default_rng()
    return rng.random(shape)


def transmittance(field: ScatterField, origin, direction, t_n, t_f, n_samples,
                  deterministic: bool = True, rng=None) -> float:
    """``exp(-integral of density)`` along a segment, one sample per stratum."""
    if not t_n < t_f:
        raise ValueError("need t_n < t_f")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    delta = (t_f - t_n) / n_samples
    off = _offsets(n_samples, deterministic, rng)
    t = t_n + (np.arange(n_samples) + off) * delta
    sig = field.density_at(o[None, :] + t[:, None] * d[None, :])
    return float(math.exp(-float(np.sum(sig * delta))))


def scatter_radiance(field: ScatterField, x, light: CameraLight, omega_o=None,
                     n_shadow: int = DEFAULT_SAMPLES) -> np.ndarray:
    """Single-light scattered radiance at ``x`` (isotropic, so ``omega_o`` is unused)."""
    x = np.asarray(x, dtype=np.float64)
    lp = np.asarray(light.light_pos, dtype=np.float64)
    to_l = lp - x
    dist = float(np.linalg.norm(to_l))
    ldir = to_l / dist
    _, t_exit = clip_to_box(x[None, :], ldir[None, :], field.aabb_min, field.aabb_max)
    seg = min(float(t_exit[0]), dist)
    t_sh = transmittance(field, x, ldir, 0.0, seg, n_shadow) if seg > 0 else 1.0
    alb = field.albedo_at(x[None, :])[0]
    return np.asarray(light.light_rgb, dtype=np.float64) / dist ** 2 * t_sh * alb / math.pi


def render_image(field: ScatterField, cam: CameraLight, n_samples: int = DEFAULT_SAMPLES,
                 n_shadow: int | None = None, deterministic: bool = True, rng=None) -> np.ndarray:
    """(H, W, 3) image; midpoint samples when ``deterministic``, jittered otherwise."""
    n_shadow = n_samples if n_shadow is None else int(n_shadow)
    o, d = cam.rays()
    t_n, t_f = clip_to_box(o, d, field.aabb_min, field.aabb_max)
    off = _offsets((o.shape[0], int(n_samples)), deterministic, rng)
    rgb, trans = kernels.march_rays(
        o, d, t_n, t_f, off,
        np.ascontiguousarray(field.density, dtype=np.float64),
        np.ascontiguousarray(field.albedo, dtype=np.float64),
        np.asarray(field.aabb_min, dtype=np.float64), float(field.cell),
        np.asarray(cam.light_pos, dtype=np.float64),
        np.asarray(cam.light_rgb, dtype=np.float64), n_shadow,
    )
    img = rgb + trans[:, None] * np.asarray(cam.background, dtype=np.float64)[None, :]
    return img.reshape(cam.height, cam.width, 3)


def to_uint8(img) -> np.ndarray:
    return np.round(np.clip(np.asarray(img), 0.0, 1.0) * 255.0).astype(np.uint8)


def write_png(img, path) -> None:
    from PIL import Image

    arr = np.asarray(img)
    if arr.dtype != np.uint8:
        arr = to_uint8(arr)
    Image.fromarray(arr).save(path, format="PNG", optimize=False)

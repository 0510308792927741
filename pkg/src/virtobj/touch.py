"""Simplified optical tactile sensor.

A flat, rigid gel pad is pressed along a vertex normal. The sensor plane is
parked ``press_depth`` outside the tangent plane at the vertex and
orthographic rays are cast inward, one per pixel. After the press the pad
face sits ``press_depth`` below the tangent plane, so a surface point at
signed height ``w`` (mm, along the normal) penetrates the pad by
``clip(press_depth + w, 0, press_depth)``. Contact pixels are shaded from
heightmap normals under three colored directional lights.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .geometry import TriangleMesh

HEIGHTMAP_MAGIC = b"HMAP"


class TouchError(ValueError):
    pass


def _light(azimuth_deg, elevation_deg, rgb):
    az = np.radians(azimuth_deg)
    el = np.radians(elevation_deg)
    d = (float(np.cos(el) * np.cos(az)), float(np.cos(el) * np.sin(az)), float(np.sin(el)))
    return (d, tuple(float(c) for c in rgb))


def _default_lights():
    return (
        _light(90.0, 35.0, (0.85, 0.10, 0.10)),
        _light(210.0, 35.0, (0.10, 0.85, 0.10)),
        _light(330.0, 35.0, (0.10, 0.10, 0.85)),
    )


@dataclass(frozen=True)
class TactileConfig:
    """Sensor geometry (mm), image size (pixels) and lighting."""

    width: int = 160
    height: int = 120
    field_width: float = 16.0
    field_height: float = 12.0
    press_depth: float = 1.0
    lights: tuple = field(default_factory=_default_lights)
    background: tuple = (0.18, 0.18, 0.22)

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise TouchError("image size must be positive")
        if not (self.field_width > 0 and self.field_height > 0):
            raise TouchError("field extents must be positive")
        if not self.press_depth > 0:
            raise TouchError("press depth must be positive")
        if len(self.lights) != 3:
            raise TouchError("exactly three lights are required")
        for d, _ in self.lights:
            if abs(np.linalg.norm(d) - 1.0) > 1e-9:
                raise TouchError("light directions must be unit vectors")

    @property
    def pitch(self):
        return self.field_width / self.width, self.field_height / self.height

    def pixel_centers(self):
        pu, pv = self.pitch
        u = (np.arange(self.width) + 0.5) * pu - 0.5 * self.field_width
        v = (np.arange(self.height) + 0.5) * pv - 0.5 * self.field_height
        return u, v


@dataclass(frozen=True, eq=False)
class TactileImage:
    """``pixels`` is (H, W, 3); ``contact_mask`` and ``heightmap`` are (H, W)."""

    pixels: np.ndarray
    contact_mask: np.ndarray
    heightmap: np.ndarray


def tangent_frame(normal) -> np.ndarray:
    """Rows (u, v, n): u is global +z projected on the tangent plane (+x if n || z)."""
    n = np.asarray(normal, dtype=np.float64)
    nn = np.linalg.norm(n)
    if not nn > 0:
        raise TouchError("degenerate normal")
    n = n / nn
    ref = np.array([0.0, 0.0, 1.0])
    if abs(n @ ref) > 1.0 - 1e-9:
        ref = np.array([1.0, 0.0, 0.0])
    u = ref - (ref @ n) * n
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return np.stack([u, v, n])


def contact_heightmap(mesh: TriangleMesh, vertex: int, config: TactileConfig | None = None, frame=None):
    """Penetration depth (mm) per pixel and the contact mask, both (H, W).

    ``frame`` overrides the tangent frame with explicit rows (u, v, n).
    """
    config = config or TactileConfig()
    if not 0 <= int(vertex) < mesh.n_vertices:
        raise IndexError(f"vertex {vertex} out of range (0..{mesh.n_vertices - 1})")
    if frame is None:
        if not mesh.normal_valid[int(vertex)]:
            raise TouchError(f"vertex {vertex} has a degenerate normal")
        frame = tangent_frame(mesh.vertex_normals[int(vertex)])
    frame = np.asarray(frame, dtype=np.float64)
    d = float(config.press_depth)
    # sensor coordinates in mm
    local = (mesh.vertices - mesh.vertices[int(vertex)]) @ frame.T * 1000.0
    tri = local[mesh.triangles]
    hu = 0.5 * config.field_width
    hv = 0.5 * config.field_height
    lo = tri.min(axis=1)
    hi = tri.max(axis=1)
    keep = (hi[:, 2] >= -d) & (lo[:, 2] <= d)
    keep &= (hi[:, 0] >= -hu) & (lo[:, 0] <= hu) & (hi[:, 1] >= -hv) & (lo[:, 1] <= hv)
    u, v = config.pixel_centers()
    top = kernels.raster_heights(np.ascontiguousarray(tri[keep]), u, v, d)
    with np.errstate(invalid="ignore"):
        pen = np.where(np.isfinite(top), np.clip(d + top, 0.0, d), 0.0)
    return pen, pen > 0.0


def shade(heightmap, config: TactileConfig) -> np.ndarray:
    """Lambertian RGB from heightmap normals, clamped to [0, 1]; (H, W, 3)."""
    pu, pv = config.pitch
    gv, gu = np.gradient(np.asarray(heightmap, dtype=np.float64), pv, pu)
    n = np.stack([-gu, -gv, np.ones_like(gu)], axis=-1)
    n /= np.linalg.norm(n, axis=-1, keepdims=True)
    out = np.zeros(n.shape)
    for direction, rgb in config.lights:
        lam = np.maximum(n @ np.asarray(direction), 0.0)
        out += lam[..., None] * np.asarray(rgb)[None, None, :]
    return np.clip(out, 0.0, 1.0)


def render_tactile(heightmap, mask, config: TactileConfig | None = None) -> TactileImage:
    config = config or TactileConfig()
    heightmap = np.asarray(heightmap, dtype=np.float64)
    mask = np.asarray(mask, dtype=np.bool_)
    if not np.all(np.isfinite(heightmap)):
        raise TouchError("heightmap must be finite")
    bg = np.broadcast_to(np.asarray(config.background, dtype=np.float64), heightmap.shape + (3,))
    if mask.any():
        pix = np.where(mask[..., None], shade(heightmap, config), bg)
    else:
        pix = bg.copy()
    return TactileImage(np.ascontiguousarray(pix), mask, heightmap)


def touch(mesh: TriangleMesh, vertex: int, config: TactileConfig | None = None, frame=None) -> TactileImage:
    config = config or TactileConfig()
    hm, mask = contact_heightmap(mesh, vertex, config, frame)
    return render_tactile(hm, mask, config)


def write_heightmap(heightmap, path) -> int:
    """16-byte header (b"HMAP", u32 width, u32 height, u32 0) + float32 LE rows."""
    hm = np.asarray(heightmap, dtype="<f4")
    h, w = hm.shape
    blob = HEIGHTMAP_MAGIC + struct.pack("<III", w, h, 0) + hm.tobytes()
    with open(os.fspath(path), "wb") as fh:
        fh.write(blob)
    return len(blob)


def read_heightmap(path) -> np.ndarray:
    with open(os.fspath(path), "rb") as fh:
        blob = fh.read()
    if blob[:4] != HEIGHTMAP_MAGIC:
        raise ValueError("not a heightmap raster")
    w, h, _ = struct.unpack("<III", blob[4:16])
    return np.frombuffer(blob[16:], dtype="<f4").reshape(h, w).copy()

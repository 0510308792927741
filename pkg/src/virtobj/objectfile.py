"""The OBJF container: everything needed to answer sound, touch and image queries.

Layout (all little-endian)::

    header   4s magic "OBJF" | u32 version | u64 payload length
    payload  repeated sections: 4s tag | u64 length | body
    trailer  u64 checksum (BLAKE2b, 8-byte digest, of the payload)

Unknown section tags are skipped on load. See docs/formats.md for the body
of every section.
"""
from __future__ import annotations

import hashlib
import io
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .geometry import HexMesh, SurfaceToHexMap, TriangleMesh, hex_from_occupancy
from .materials import MaterialError, MaterialRecord
from .modal import ModalModel
from .render import ScatterField, field_from_hex
from .touch import TactileConfig

MAGIC = b"OBJF"
VERSION = 1
HEADER = struct.Struct("<4sIQ")
SECTION = struct.Struct("<4sQ")
CHECKSUM = struct.Struct("<Q")

_DTYPES = {b"f8": "<f8", b"f4": "<f4", b"i8": "<i8", b"u4": "<u4", b"u1": "u1"}


class ObjectFileError(ValueError):
    pass


class BadMagicError(ObjectFileError):
    pass


class UnsupportedVersionError(ObjectFileError):
    pass


class ChecksumError(ObjectFileError):
    pass


class TruncatedFileError(ObjectFileError):
    pass


class InconsistentContainerError(ObjectFileError):
    pass


@dataclass(frozen=True)
class FieldParams:
    """How the scattering field is rebuilt from the voxel grid."""

    sigma: float = 500.0
    albedo: tuple = (0.8, 0.8, 0.8)
    use_vertex_colors: bool = True


@dataclass(frozen=True)
class BuildInfo:
    resolution: int = 0
    n_modes: int = 0
    freq_cap: float = 20000.0
    mesh_digest: bytes = b"\0" * 32


@dataclass(frozen=True, eq=False)
class ObjectFileContainer:
    name: str
    material: MaterialRecord
    hex_mesh: HexMesh
    surface: TriangleMesh
    modal: ModalModel
    tactile: TactileConfig = field(default_factory=TactileConfig)
    field_params: FieldParams = field(default_factory=FieldParams)
    build: BuildInfo = field(default_factory=BuildInfo)

    @property
    def surface_map(self) -> SurfaceToHexMap:
        return self.modal.surface_map

    def scatter_field(self) -> ScatterField:
        fp = self.field_params
        mesh = self.surface if fp.use_vertex_colors else None
        return field_from_hex(self.hex_mesh, fp.sigma, fp.albedo, mesh)

    def validate(self) -> "ObjectFileContainer":
        try:
            self.material.validate()
        except MaterialError as exc:
            raise InconsistentContainerError(str(exc)) from exc
        smap = self.modal.surface_map
        if smap.indices.shape != (self.surface.n_vertices, 4):
            raise InconsistentContainerError("surface map does not match surface vertex count")
        if smap.indices.size and (smap.indices.min() < 0 or smap.indices.max() >= self.hex_mesh.n_nodes):
            raise InconsistentContainerError("surface map references missing hex nodes")
        if self.modal.gains.shape != (self.hex_mesh.n_nodes, 3, self.modal.n_modes):
            raise InconsistentContainerError("gain array does not match hex nodes and modes")
        if self.modal.material != self.material:
            raise InconsistentContainerError("modal model and container disagree on material")
        try:
            self.modal.check()
        except ValueError as exc:
            raise InconsistentContainerError(str(exc)) from exc
        return self


# -- encoding helpers -------------------------------------------------------

def _put_str(buf, s: str):
    b = s.encode("utf-8")
    buf.write(struct.pack("<I", len(b)))
    buf.write(b)


def _put_f8(buf, *vals):
    buf.write(struct.pack(f"<{len(vals)}d", *vals))


def _put_array(buf, arr, code: bytes):
    arr = np.ascontiguousarray(arr, dtype=_DTYPES[code])
    buf.write(code)
    buf.write(struct.pack("<B", arr.ndim))
    buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
    buf.write(arr.tobytes())


class _Reader:
    def __init__(self, data: bytes, tag: bytes):
        self.data = data
        self.pos = 0
        self.tag = tag.decode("ascii", "replace")

    def take(self, n):
        if self.pos + n > len(self.data):
            raise InconsistentContainerError(f"section {self.tag} is truncated")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt):
        s = struct.Struct(fmt)
        return s.unpack(self.take(s.size))

    def str(self):
        (n,) = self.unpack("<I")
        return self.take(n).decode("utf-8")

    def f8(self, count=1):
        vals = self.unpack(f"<{count}d")
        return vals[0] if count == 1 else vals

    def array(self):
        code = self.take(2)
        if code not in _DTYPES:
            raise InconsistentContainerError(f"section {self.tag}: unknown dtype {code!r}")
        (ndim,) = self.unpack("<B")
        shape = self.unpack(f"<{ndim}Q")
        dt = np.dtype(_DTYPES[code])
        count = int(np.prod(shape)) if ndim else 1
        raw = self.take(count * dt.itemsize)
        return np.frombuffer(raw, dtype=dt).reshape(shape).astype(dt.newbyteorder("="))


def _encode_sections(c: ObjectFileContainer):
    out = []

    b = io.BytesIO()
    _put_str(b, c.name)
    b.write(struct.pack("<II", c.build.resolution, c.build.n_modes))
    _put_f8(b, c.build.freq_cap)
    b.write(bytes(c.build.mesh_digest).ljust(32, b"\0")[:32])
    out.append((b"META", b.getvalue()))

    b = io.BytesIO()
    m = c.material
    _put_str(b, m.name)
    _put_f8(b, m.density, m.youngs_modulus, m.poisson_ratio, m.rayleigh_alpha, m.rayleigh_beta)
    out.append((b"MATL", b.getvalue()))

    b = io.BytesIO()
    hm = c.hex_mesh
    _put_f8(b, hm.voxel_edge, *np.asarray(hm.origin, dtype=np.float64))
    _put_array(b, hm.occupancy.astype(np.uint8), b"u1")
    out.append((b"HEXM", b.getvalue()))

    b = io.BytesIO()
    s = c.surface
    _put_array(b, s.vertices, b"f8")
    _put_array(b, s.triangles, b"u4")
    b.write(struct.pack("<B", 0 if s.colors is None else 1))
    if s.colors is not None:
        _put_array(b, s.colors, b"f8")
    out.append((b"SURF", b.getvalue()))

    b = io.BytesIO()
    _put_array(b, c.surface_map.indices, b"u4")
    _put_array(b, c.surface_map.weights, b"f8")
    out.append((b"SMAP", b.getvalue()))

    b = io.BytesIO()
    md = c.modal
    _put_array(b, md.eigenvalues, b"f8")
    _put_array(b, md.decay, b"f8")
    _put_array(b, md.frequency, b"f8")
    _put_array(b, md.gains, b"f8")
    out.append((b"MODE", b.getvalue()))

    b = io.BytesIO()
    t = c.tactile
    b.write(struct.pack("<II", t.width, t.height))
    _put_f8(b, t.field_width, t.field_height, t.press_depth)
    for d, rgb in t.lights:
        _put_f8(b, *d, *rgb)
    _put_f8(b, *t.background)
    out.append((b"TCFG", b.getvalue()))

    b = io.BytesIO()
    fp = c.field_params
    _put_f8(b, fp.sigma, *fp.albedo)
    b.write(struct.pack("<B", 1 if fp.use_vertex_colors else 0))
    out.append((b"RCFG", b.getvalue()))
    return out


def to_bytes(container: ObjectFileContainer) -> bytes:
    container.validate()
    payload = io.BytesIO()
    for tag, body in _encode_sections(container):
        payload.write(SECTION.pack(tag, len(body)))
        payload.write(body)
    p = payload.getvalue()
    digest = hashlib.blake2b(p, digest_size=8).digest()
    return HEADER.pack(MAGIC, VERSION, len(p)) + p + digest


def save(container: ObjectFileContainer, path) -> int:
    """Write the container; returns the number of bytes written."""
    blob = to_bytes(container)
    with open(os.fspath(path), "wb") as fh:
        fh.write(blob)
    return len(blob)


REQUIRED = (b"META", b"MATL", b"HEXM", b"SURF", b"SMAP", b"MODE", b"TCFG", b"RCFG")


def from_bytes(blob: bytes) -> ObjectFileContainer:
    if len(blob) < HEADER.size:
        raise TruncatedFileError("file shorter than the OBJF header")
    magic, version, length = HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported OBJF version {version} (supported: {VERSION})")
    end = HEADER.size + length
    if len(blob) != end + CHECKSUM.size:
        raise TruncatedFileError(
            f"payload length {length} does not match file size {len(blob)}"
        )
    payload = blob[HEADER.size:end]
    if hashlib.blake2b(payload, digest_size=8).digest() != blob[end:]:
        raise ChecksumError("payload checksum mismatch")

    sections = {}
    pos = 0
    while pos < len(payload):
        if pos + SECTION.size > len(payload):
            raise InconsistentContainerError("dangling bytes after last section")
        tag, n = SECTION.unpack_from(payload, pos)
        pos += SECTION.size
        if pos + n > len(payload):
            raise InconsistentContainerError(f"section {tag!r} overruns payload")
        sections[tag] = payload[pos:pos + n]
        pos += n
    missing = [t.decode() for t in REQUIRED if t not in sections]
    if missing:
        raise InconsistentContainerError(f"missing sections: {', '.join(missing)}")
    return _decode(sections).validate()


def _decode(sec) -> ObjectFileContainer:
    r = _Reader(sec[b"META"], b"META")
    name = r.str()
    resolution, n_modes = r.unpack("<II")
    freq_cap = r.f8()
    digest = r.take(32)
    build = BuildInfo(resolution, n_modes, freq_cap, digest)

    r = _Reader(sec[b"MATL"], b"MATL")
    mname = r.str()
    material = MaterialRecord(mname, *r.f8(5))

    r = _Reader(sec[b"HEXM"], b"HEXM")
    edge, ox, oy, oz = r.f8(4)
    occ = r.array().astype(bool)
    try:
        hex_mesh = hex_from_occupancy(occ, np.array([ox, oy, oz]), edge)
    except ValueError as exc:
        raise InconsistentContainerError(f"HEXM: {exc}") from exc

    r = _Reader(sec[b"SURF"], b"SURF")
    verts = r.array()
    tris = r.array().astype(np.int64)
    (has_col,) = r.unpack("<B")
    colors = r.array() if has_col else None
    try:
        surface = TriangleMesh.from_arrays(verts, tris, colors)
    except ValueError as exc:
        raise InconsistentContainerError(f"SURF: {exc}") from exc

    r = _Reader(sec[b"SMAP"], b"SMAP")
    smap = SurfaceToHexMap(r.array().astype(np.int64), r.array())

    r = _Reader(sec[b"MODE"], b"MODE")
    lam, decay, freq, gains = r.array(), r.array(), r.array(), r.array()
    if gains.ndim != 3:
        raise InconsistentContainerError("MODE: gains must be 3-D")
    modal = ModalModel(lam, decay, freq, gains, material, smap)

    r = _Reader(sec[b"TCFG"], b"TCFG")
    w, h = r.unpack("<II")
    fw, fh, depth = r.f8(3)
    lights = []
    for _ in range(3):
        vals = r.f8(6)
        lights.append((tuple(vals[:3]), tuple(vals[3:])))
    bg = r.f8(3)
    try:
        tactile = TactileConfig(w, h, fw, fh, depth, tuple(lights), tuple(bg))
    except ValueError as exc:
        raise InconsistentContainerError(f"TCFG: {exc}") from exc

    r = _Reader(sec[b"RCFG"], b"RCFG")
    vals = r.f8(4)
    (use_col,) = r.unpack("<B")
    fp = FieldParams(vals[0], tuple(vals[1:]), bool(use_col))

    return ObjectFileContainer(name, material, hex_mesh, surface, modal, tactile, fp, build)


def load(path) -> ObjectFileContainer:
    """Read and validate a container; no FEM or eigen solve is rerun."""
    try:
        with open(os.fspath(path), "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ObjectFileError(f"cannot read {path}: {exc.strerror}") from exc
    return from_bytes(blob)


def structurally_equal(a: ObjectFileContainer, b: ObjectFileContainer) -> bool:
    """Field-for-field equality (arrays compared exactly)."""
    def same(x, y):
        if x is None or y is None:
            return x is None and y is None
        x = np.asarray(x)
        y = np.asarray(y)
        return x.shape == y.shape and np.array_equal(x, y)

    hm_a, hm_b = a.hex_mesh, b.hex_mesh
    sa, sb = a.surface, b.surface
    ma, mb = a.modal, b.modal
    return (
        a.name == b.name
        and a.material == b.material
        and a.tactile == b.tactile
        and a.field_params == b.field_params
        and a.build == b.build
        and hm_a.voxel_edge == hm_b.voxel_edge
        and same(hm_a.origin, hm_b.origin)
        and same(hm_a.occupancy, hm_b.occupancy)
        and same(hm_a.nodes, hm_b.nodes)
        and same(hm_a.elements, hm_b.elements)
        and same(sa.vertices, sb.vertices)
        and same(sa.triangles, sb.triangles)
        and same(sa.colors, sb.colors)
        and same(a.surface_map.indices, b.surface_map.indices)
        and same(a.surface_map.weights, b.surface_map.weights)
        and same(ma.eigenvalues, mb.eigenvalues)
        and same(ma.decay, mb.decay)
        and same(ma.frequency, mb.frequency)
        and same(ma.gains, mb.gains)
    )


def storage_report(container: ObjectFileContainer, sample_rate: int = 44100,
                   duration: float = 3.0, container_bytes: int | None = None) -> dict:
    """Container size against raw per-vertex dumps of the same data.

    The audio dump holds one float32 mode signal per hex node and force axis;
    the touch dump holds one 8-bit RGB tactile image per surface vertex.
    """
    n_bytes = container_bytes if container_bytes is not None else len(to_bytes(container))
    n_samples = int(round(sample_rate * duration))
    audio = container.hex_mesh.n_nodes * 3 * n_samples * 4
    t = container.tactile
    touch_raw = container.surface.n_vertices * t.width * t.height * 3
    return {
        "container_bytes": n_bytes,
        "audio_dump_bytes": audio,
        "touch_dump_bytes": touch_raw,
        "audio_ratio": audio / n_bytes,
        "total_ratio": (audio + touch_raw) / n_bytes,
    }

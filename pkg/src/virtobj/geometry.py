"""Surface meshes, hexahedral voxelization and surface-to-hex mapping."""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import kernels

# Lattice-relative nudge of the parity rays off mesh edges and vertices.
_RAY_EPS_Y = 1.2345678e-7
_RAY_EPS_Z = 2.3456789e-7
# Squared-distance snapping quantum for nearest-node ties, relative to h**2.
_TIE_QUANTUM = 1e-9

# Corner offsets of an 8-node hexahedron, in the usual counter-clockwise
# bottom face then top face order.
HEX_CORNERS = np.array(
    [
        [0, 0, 0],
        [1, 0, 0],
        [1, 1, 0],
        [0, 1, 0],
        [0, 0, 1],
        [1, 0, 1],
        [1, 1, 1],
        [0, 1, 1],
    ],
    dtype=np.int64,
)


class MeshError(ValueError):
    """Malformed or unreadable mesh input."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class VoxelizationError(ValueError):
    """The mesh produced no occupied voxels."""


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Triangle surface in meters with area-weighted unit vertex normals.

    ``normal_valid`` is False for vertices without any non-degenerate incident
    triangle; their normal is set to +z so the unit-length invariant holds.
    ``colors`` carries optional per-vertex RGB in [0, 1].
    """

    vertices: np.ndarray
    triangles: np.ndarray
    vertex_normals: np.ndarray
    normal_valid: np.ndarray
    colors: np.ndarray | None = None

    @classmethod
    def from_arrays(cls, vertices, triangles, colors=None) -> "TriangleMesh":
        vertices = np.ascontiguousarray(vertices, dtype=np.float64).reshape(-1, 3)
        triangles = np.ascontiguousarray(triangles, dtype=np.int64).reshape(-1, 3)
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise MeshError("triangle index out of range")
        normals, valid = vertex_normals(vertices, triangles)
        if colors is not None:
            colors = np.ascontiguousarray(colors, dtype=np.float64).reshape(-1, 3)
        return cls(vertices, triangles, normals, valid, colors)

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    def bounds(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def triangle_coords(self) -> np.ndarray:
        return self.vertices[self.triangles]

    def transformed(self, rotation=None, translation=None, scale=1.0) -> "TriangleMesh":
        v = self.vertices * scale
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=np.float64).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=np.float64)
        return TriangleMesh.from_arrays(v, self.triangles, self.colors)


def vertex_normals(vertices, triangles):
    """Area-weighted vertex normals and a validity mask."""
    normals = np.zeros_like(vertices)
    if len(triangles):
        tri = vertices[triangles]
        fn = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        for c in range(3):
            np.add.at(normals, triangles[:, c], fn)
    length = np.linalg.norm(normals, axis=1)
    valid = length > 0.0
    normals[valid] /= length[valid, None]
    normals[~valid] = (0.0, 0.0, 1.0)
    return normals, valid


def mesh_volume_area(mesh: TriangleMesh):
    """Enclosed volume (divergence theorem) and total surface area."""
    tri = mesh.triangle_coords()
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    area = 0.5 * np.linalg.norm(cross, axis=1).sum()
    volume = np.einsum("ij,ij->i", tri[:, 0], np.cross(tri[:, 1], tri[:, 2])).sum() / 6.0
    return abs(float(volume)), float(area)


def _parse_index(token, n_vertices, path, line_no):
    head = token.split("/", 1)[0]
    try:
        idx = int(head)
    except ValueError:
        raise MeshError(f"bad face index {token!r}", path, line_no) from None
    if idx <= 0:
        raise MeshError(f"face index {idx} not supported (must be positive, 1-based)", path, line_no)
    if idx > n_vertices:
        raise MeshError(
            f"face index {idx} out of range ({n_vertices} vertices defined)", path, line_no
        )
    return idx - 1


def load_mesh(path) -> TriangleMesh:
    """Read an ASCII OBJ file.

    Only ``v`` and ``f`` records are used (``v`` may carry an RGB triple);
    polygons are fan-triangulated. Indices are 1-based and must refer to
    vertices already defined.
    """
    path = os.fspath(path)
    try:
        fh = open(path, "r", encoding="utf-8", errors="replace")
    except OSError as exc:
        raise MeshError(f"cannot read mesh: {exc.strerror}", path) from exc
    verts = []
    colors = []
    faces = []
    with fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            tag = parts[0]
            if tag == "v":
                if len(parts) not in (4, 7):
                    raise MeshError("vertex record needs 3 coordinates (optionally + RGB)", path, line_no)
                try:
                    vals = [float(p) for p in parts[1:]]
                except ValueError:
                    raise MeshError("non-numeric vertex coordinate", path, line_no) from None
                if not all(math.isfinite(x) for x in vals):
                    raise MeshError("non-finite vertex coordinate", path, line_no)
                verts.append(vals[:3])
                colors.append(vals[3:] if len(vals) == 6 else None)
            elif tag == "f":
                if len(parts) < 4:
                    raise MeshError("face needs at least 3 vertices", path, line_no)
                idx = [_parse_index(p, len(verts), path, line_no) for p in parts[1:]]
                for i in range(1, len(idx) - 1):
                    faces.append((idx[0], idx[i], idx[i + 1]))
    if not verts:
        raise MeshError("no vertices", path)
    if not faces:
        raise MeshError("no faces", path)
    col = None
    if all(c is not None for c in colors):
        col = np.clip(np.array(colors, dtype=np.float64), 0.0, 1.0)
    return TriangleMesh.from_arrays(np.array(verts), np.array(faces), col)


def save_obj(mesh: TriangleMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, v in enumerate(mesh.vertices.tolist()):
            rgb = "" if mesh.colors is None else " " + " ".join(repr(c) for c in mesh.colors[i].tolist())
            fh.write(f"v {v[0]!r} {v[1]!r} {v[2]!r}{rgb}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


@dataclass(frozen=True, eq=False)
class HexMesh:
    """Voxel hexahedra on a regular lattice.

    Nodes are the deduplicated lattice corners of occupied voxels, ordered by
    flat lattice index (x fastest). ``elements`` lists the 8 node ids of each
    occupied voxel in ``HEX_CORNERS`` order, voxels ordered by flat voxel
    index (x fastest).
    """

    nodes: np.ndarray
    elements: np.ndarray
    voxel_edge: float
    occupancy: np.ndarray
    origin: np.ndarray
    node_lattice: np.ndarray = field(repr=False)

    @property
    def n_elements(self) -> int:
        return int(self.elements.shape[0])

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def dims(self):
        return tuple(int(d) for d in self.occupancy.shape)

    def aabb(self):
        lo = np.asarray(self.origin, dtype=np.float64)
        return lo, lo + self.voxel_edge * np.array(self.dims, dtype=np.float64)


def grid_for(mesh: TriangleMesh, resolution: int):
    """Grid origin, voxel edge and dimensions for a mesh at a resolution."""
    if int(resolution) < 1:
        raise ValueError("resolution must be >= 1")
    lo, hi = mesh.bounds()
    extent = hi - lo
    longest = float(extent.max())
    if not longest > 0.0:
        raise VoxelizationError("mesh has zero extent; cannot voxelize")
    h = longest / int(resolution)
    dims = np.maximum(np.ceil(extent / h - 1e-9).astype(np.int64), 1)
    return lo.astype(np.float64), h, dims


def hex_from_occupancy(occupancy, origin, h) -> HexMesh:
    """Build nodes and elements from a boolean voxel grid."""
    occupancy = np.asarray(occupancy, dtype=np.bool_)
    dims = np.array(occupancy.shape, dtype=np.int64)
    if not occupancy.any():
        raise VoxelizationError("empty occupancy: mesh is degenerate or unvoxelizable")
    # x-fastest voxel order
    vk, vj, vi = np.nonzero(occupancy.transpose(2, 1, 0))
    vox = np.stack([vi, vj, vk], axis=1)
    corners = vox[:, None, :] + HEX_CORNERS[None, :, :]
    nd = dims + 1
    flat = corners[..., 0] + nd[0] * (corners[..., 1] + nd[1] * corners[..., 2])
    uniq, inverse = np.unique(flat.ravel(), return_inverse=True)
    elements = inverse.reshape(-1, 8).astype(np.int64)
    lat = np.empty((uniq.shape[0], 3), dtype=np.int64)
    lat[:, 0] = uniq % nd[0]
    lat[:, 1] = (uniq // nd[0]) % nd[1]
    lat[:, 2] = uniq // (nd[0] * nd[1])
    origin = np.asarray(origin, dtype=np.float64)
    nodes = origin + lat * h
    return HexMesh(nodes, elements, float(h), occupancy, origin, lat)


def voxelize(mesh: TriangleMesh, resolution: int = 32) -> HexMesh:
    """Voxelize a (near-)watertight surface.

    ``resolution`` voxels span the longest bounding-box axis and shorter axes
    are padded up to a whole voxel. A voxel is occupied when its center passes
    an even/odd ray test or its cube touches a surface triangle.
    """
    origin, h, dims = grid_for(mesh, resolution)
    tris = np.ascontiguousarray(mesh.triangle_coords())
    inside = kernels.parity_inside(
        tris, origin, h, dims, _RAY_EPS_Y * h, _RAY_EPS_Z * h
    )
    shell = kernels.surface_voxels(tris, origin, h, dims)
    return hex_from_occupancy(inside | shell, origin, h)


@dataclass(frozen=True, eq=False)
class SurfaceToHexMap:
    """Four hex-node indices per surface vertex, each weighted 1/4."""

    indices: np.ndarray
    weights: np.ndarray

    @property
    def n_vertices(self) -> int:
        return int(self.indices.shape[0])


def nearest_four(points, targets, length_scale: float) -> np.ndarray:
    """Indices of the 4 nearest ``targets`` per point, ties by ascending index.

    Squared distances closer than ``1e-9 * length_scale**2`` count as equal.
    """
    points = np.ascontiguousarray(points, dtype=np.float64).reshape(-1, 3)
    targets = np.ascontiguousarray(targets, dtype=np.float64).reshape(-1, 3)
    if targets.shape[0] < 4:
        raise ValueError("need at least 4 candidate points")
    return kernels.nearest4(points, targets, _TIE_QUANTUM * length_scale ** 2)


def nearest_nodes(points, hex_mesh: HexMesh) -> np.ndarray:
    return nearest_four(points, hex_mesh.nodes, hex_mesh.voxel_edge)


def map_surface_to_hex(mesh: TriangleMesh, hex_mesh: HexMesh) -> SurfaceToHexMap:
    """Nearest four hex nodes for every surface vertex.

    Distances within a relative 1e-9 of each other count as ties and are
    broken by ascending node index.
    """
    idx = nearest_nodes(mesh.vertices, hex_mesh)
    return SurfaceToHexMap(idx, np.full(idx.shape, 0.25))


def box_mesh(size=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Closed axis-aligned box with outward-facing triangles."""
    sx, sy, sz = 0.5 * np.broadcast_to(np.asarray(size, dtype=np.float64), (3,))
    c = np.asarray(center, dtype=np.float64)
    v = np.array(
        [
            [-sx, -sy, -sz], [sx, -sy, -sz], [sx, sy, -sz], [-sx, sy, -sz],
            [-sx, -sy, sz], [sx, -sy, sz], [sx, sy, sz], [-sx, sy, sz],
        ]
    ) + c
    t = np.array(
        [
            [0, 2, 1], [0, 3, 2],
            [4, 5, 6], [4, 6, 7],
            [0, 1, 5], [0, 5, 4],
            [1, 2, 6], [1, 6, 5],
            [2, 3, 7], [2, 7, 6],
            [3, 0, 4], [3, 4, 7],
        ]
    )
    return TriangleMesh.from_arrays(v, t)


def icosphere(radius=1.0, subdivisions=3, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    """Geodesic sphere with vertices on the true sphere and one vertex at +z."""
    p = (1.0 + 5.0 ** 0.5) / 2.0
    v = [
        [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
        [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
        [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
    ]
    f = [
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ]
    verts = [np.array(x, dtype=np.float64) / np.linalg.norm(x) for x in v]
    faces = f
    for _ in range(subdivisions):
        cache = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = new
    verts = np.array(verts)
    # rotate so that one vertex sits exactly on +z
    top = verts[0]
    rot = _rotation_between(top, np.array([0.0, 0.0, 1.0]))
    verts = verts @ rot.T
    verts[0] = (0.0, 0.0, 1.0)
    return TriangleMesh.from_arrays(verts * radius + np.asarray(center, dtype=np.float64), np.array(faces))


def _rotation_between(a, b):
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    v = np.cross(a, b)
    c = float(a @ b)
    if np.linalg.norm(v) < 1e-15:
        return np.eye(3) if c > 0 else -np.eye(3)
    vx = np.array([[0, -v[2], v[1]], [v[2], 0, -v[0]], [-v[1], v[0], 0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)

"""Compact per-object bundles that answer sound, touch and vision queries.

A watertight surface mesh is voxelized into trilinear hexahedra, its free
vibration modes are computed once, and the result is stored together with
the surface and a voxel scattering field in one binary object file.
"""
from .geometry import HexMesh, TriangleMesh, load_mesh, voxelize
from .materials import MaterialRecord, lookup
from .objectfile import ObjectFileContainer, load, save

__version__ = "0.1.0"

__all__ = [
    "HexMesh", "TriangleMesh", "load_mesh", "voxelize",
    "MaterialRecord", "lookup",
    "ObjectFileContainer", "load", "save",
]

"""Linear elasticity on voxel hexahedra: element matrices and global assembly.

Degrees of freedom are node-major with (x, y, z) inside each node, so node
``n`` owns rows ``3n, 3n+1, 3n+2``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .geometry import HEX_CORNERS, HexMesh
from .materials import MaterialRecord


class DisconnectedMeshWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class SystemMatrices:
    """Lumped mass diagonal ``M`` and sparse stiffness ``K`` (CSR)."""

    M: np.ndarray
    K: sp.csr_matrix
    n_components: int = 1

    @property
    def dof_count(self) -> int:
        return int(self.M.shape[0])


def elasticity_tensor(E: float, nu: float) -> np.ndarray:
    """Isotropic 6x6 constitutive matrix in Voigt order xx, yy, zz, yz, xz, xy."""
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[[0, 1, 2], [0, 1, 2]] += 2.0 * mu
    D[[3, 4, 5], [3, 4, 5]] = mu
    return D


def _strain_displacement(xi, eta, zeta, h):
    signs = 2.0 * HEX_CORNERS - 1.0
    sx, sy, sz = signs[:, 0], signs[:, 1], signs[:, 2]
    # derivatives of trilinear shape functions, mapped by the cube Jacobian h/2
    dN = np.empty((3, 8))
    dN[0] = sx * (1 + sy * eta) * (1 + sz * zeta) / 8.0
    dN[1] = sy * (1 + sx * xi) * (1 + sz * zeta) / 8.0
    dN[2] = sz * (1 + sx * xi) * (1 + sy * eta) / 8.0
    dN *= 2.0 / h
    B = np.zeros((6, 24))
    B[0, 0::3] = dN[0]
    B[1, 1::3] = dN[1]
    B[2, 2::3] = dN[2]
    B[3, 1::3] = dN[2]
    B[3, 2::3] = dN[1]
    B[4, 0::3] = dN[2]
    B[4, 2::3] = dN[0]
    B[5, 0::3] = dN[1]
    B[5, 1::3] = dN[0]
    return B


def element_stiffness(h: float, E: float, nu: float) -> np.ndarray:
    """24x24 trilinear hexahedron stiffness, 2x2x2 Gauss-Legendre."""
    if not h > 0:
        raise ValueError("voxel edge must be > 0")
    D = elasticity_tensor(E, nu)
    g = 1.0 / np.sqrt(3.0)
    detJ = (h / 2.0) ** 3
    Ke = np.zeros((24, 24))
    for xi in (-g, g):
        for eta in (-g, g):
            for zeta in (-g, g):
                B = _strain_displacement(xi, eta, zeta, h)
                Ke += B.T @ D @ B * detJ
    return 0.5 * (Ke + Ke.T)


def element_matrices(voxel_edge: float, material: MaterialRecord):
    """Element stiffness (24x24) and lumped mass (24,) for one voxel."""
    Ke = element_stiffness(voxel_edge, material.youngs_modulus, material.poisson_ratio)
    me = np.full(24, material.density * voxel_edge ** 3 / 8.0)
    return Ke, me


def _canonical_sum(rows, cols, vals, n):
    # sort duplicates by value so the summation order ignores element order
    order = np.lexsort((vals, cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    key = rows * n + cols
    starts = np.flatnonzero(np.r_[True, key[1:] != key[:-1]])
    summed = np.add.reduceat(vals, starts)
    return rows[starts], cols[starts], summed


def count_components(hex_mesh: HexMesh) -> int:
    e = hex_mesh.elements
    rows = np.repeat(e[:, 0], 7)
    cols = e[:, 1:].ravel()
    g = sp.coo_matrix((np.ones(rows.shape[0]), (rows, cols)), shape=(hex_mesh.n_nodes,) * 2)
    n, _ = connected_components(g, directed=False)
    return int(n)


def assemble(hex_mesh: HexMesh, material: MaterialRecord) -> SystemMatrices:
    """Global lumped mass and stiffness for a free (unconstrained) voxel body."""
    if hex_mesh.n_elements == 0:
        raise ValueError("hex mesh is empty")
    Ke, me = element_matrices(hex_mesh.voxel_edge, material)
    n_dof = 3 * hex_mesh.n_nodes
    dofs = (3 * hex_mesh.elements[:, :, None] + np.arange(3)[None, None, :]).reshape(-1, 24)
    rows = np.repeat(dofs, 24, axis=1).ravel()
    cols = np.tile(dofs, (1, 24)).ravel()
    vals = np.tile(Ke.ravel(), hex_mesh.n_elements)
    r, c, v = _canonical_sum(rows, cols, vals, n_dof)
    K = sp.csr_matrix((v, (r, c)), shape=(n_dof, n_dof))
    K.sort_indices()
    M = np.zeros(n_dof)
    # every element adds the same share, so accumulation order is irrelevant
    counts = np.bincount(dofs.ravel(), minlength=n_dof)
    M[:] = counts * me[0]
    n_comp = count_components(hex_mesh)
    if n_comp > 1:
        warnings.warn(
            f"hex mesh has {n_comp} disconnected parts ({6 * n_comp} rigid-body modes)",
            DisconnectedMeshWarning,
            stacklevel=2,
        )
    return SystemMatrices(M, K, n_comp)


def rigid_body_modes(nodes: np.ndarray) -> np.ndarray:
    """Six rigid-body displacement fields (3 translations, 3 rotations) as columns."""
    n = nodes.shape[0]
    R = np.zeros((3 * n, 6))
    c = nodes - nodes.mean(axis=0)
    for a in range(3):
        R[a::3, a] = 1.0
    x, y, z = c[:, 0], c[:, 1], c[:, 2]
    # rotations about x, y, z
    R[1::3, 3], R[2::3, 3] = -z, y
    R[0::3, 4], R[2::3, 4] = z, -x
    R[0::3, 5], R[1::3, 5] = -y, x
    return R

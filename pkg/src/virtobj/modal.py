"""Damped modal parameters and impact-sound synthesis.

Each retained eigenmode becomes a damped sinusoid
``a_i exp(-c_i t) sin(2 pi w_i t)`` with ``c_i = (alpha + beta lam_i) / 2`` and
``w_i = sqrt(lam_i - c_i^2) / (2 pi)``, starting from rest (zero phase).
Forces are impulses in N*s; the modal amplitude of an impulse ``f`` is
``(U^T f)_i / (2 pi w_i)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .eigensolver import RIGID_TOL, EigenSolution
from .geometry import SurfaceToHexMap
from .materials import MaterialRecord

log = logging.getLogger(__name__)

AUDIBLE_BAND = (20.0, 20000.0)
DEFAULT_SAMPLE_RATE = 44100
DEFAULT_DURATION = 3.0
PEAK_LEVEL = 0.9


class SynthesisError(ValueError):
    pass


def mode_params(lam, alpha, beta):
    """Decay rate ``c`` (1/s) and frequency ``w`` (Hz) of one mode.

    Returns ``(c, None)`` for an overdamped mode (``lam <= c**2``).
    """
    c = 0.5 * (alpha + beta * lam)
    disc = lam - c * c
    if not disc > 0.0:
        return c, None
    return c, math.sqrt(disc) / (2.0 * math.pi)


def mode_params_array(lam, alpha, beta):
    """Vectorized ``mode_params``; overdamped entries get frequency NaN."""
    lam = np.asarray(lam, dtype=np.float64)
    c = 0.5 * (alpha + beta * lam)
    disc = lam - c * c
    with np.errstate(invalid="ignore"):
        w = np.where(disc > 0.0, np.sqrt(disc) / (2.0 * math.pi), np.nan)
    return c, w


@dataclass(frozen=True, eq=False)
class ModalModel:
    """Retained modes and per-hex-node unit-force responses.

    ``gains[n, axis, i]`` is the response of mode ``i`` to a unit impulse on
    hex node ``n`` along ``axis``, i.e. that node's rows of the mass-normalized
    eigenvector matrix.
    """

    eigenvalues: np.ndarray
    decay: np.ndarray
    frequency: np.ndarray
    gains: np.ndarray
    material: MaterialRecord
    surface_map: SurfaceToHexMap

    @property
    def n_modes(self) -> int:
        return int(self.eigenvalues.shape[0])

    def check(self, rtol: float = 1e-12) -> None:
        a, b = self.material.rayleigh_alpha, self.material.rayleigh_beta
        c, w = mode_params_array(self.eigenvalues, a, b)
        if not np.allclose(self.decay, c, rtol=rtol, atol=0.0):
            raise ValueError("stored decay rates disagree with eigenvalues")
        if not np.allclose(self.frequency, w, rtol=rtol, atol=0.0):
            raise ValueError("stored frequencies disagree with eigenvalues")
        if self.gains.shape[1:] != (3, self.n_modes):
            raise ValueError("gain array shape does not match mode count")


def build_modal_model(
    solution: EigenSolution,
    material: MaterialRecord,
    surface_map: SurfaceToHexMap,
    band=AUDIBLE_BAND,
    rigid_tol: float = RIGID_TOL,
    max_modes: int | None = None,
) -> ModalModel:
    """Drop rigid, overdamped and out-of-band modes and keep the rest."""
    a, b = material.rayleigh_alpha, material.rayleigh_beta
    lam = solution.eigenvalues
    rigid = solution.rigid_mask(rigid_tol)
    c, w = mode_params_array(lam, a, b)
    over = np.isnan(w) & ~rigid
    with np.errstate(invalid="ignore"):
        out = ~np.isnan(w) & ((w < band[0]) | (w > band[1])) & ~rigid
    keep = ~(rigid | over | out)
    if rigid.any():
        log.info("dropped %d rigid-body modes", int(rigid.sum()))
    if over.any():
        log.info("dropped %d overdamped modes", int(over.sum()))
    if out.any():
        log.info("dropped %d modes outside %.0f-%.0f Hz", int(out.sum()), band[0], band[1])
    idx = np.flatnonzero(keep)
    if max_modes is not None:
        idx = idx[:max_modes]
    U = solution.eigenvectors[:, idx]
    gains = np.ascontiguousarray(U.reshape(-1, 3, U.shape[1]))
    return ModalModel(lam[idx].copy(), c[idx].copy(), w[idx].copy(), gains, material, surface_map)


def excitation_gains(model: ModalModel, surface_vertex: int, force) -> np.ndarray:
    """Per-mode amplitude excited by an impulse ``force`` at a surface vertex."""
    if not 0 <= int(surface_vertex) < model.surface_map.n_vertices:
        raise IndexError(
            f"surface vertex {surface_vertex} out of range (0..{model.surface_map.n_vertices - 1})"
        )
    k = np.asarray(force, dtype=np.float64).reshape(3)
    nodes = model.surface_map.indices[int(surface_vertex)]
    wts = model.surface_map.weights[int(surface_vertex)]
    g = np.zeros(model.n_modes)
    for node, wt in zip(nodes, wts):
        blk = model.gains[node]
        g += wt * (k[0] * blk[0] + k[1] * blk[1] + k[2] * blk[2])
    return g / (2.0 * math.pi * model.frequency)


@dataclass(frozen=True, eq=False)
class ImpactSignal:
    samples: np.ndarray
    sample_rate: int

    @property
    def duration(self) -> float:
        return self.samples.shape[0] / self.sample_rate


def synthesize_modes(amp, decay, freq, sample_rate, duration) -> ImpactSignal:
    n = int(round(sample_rate * duration))
    samples = kernels.damped_sine_bank(
        np.ascontiguousarray(amp, dtype=np.float64),
        np.ascontiguousarray(decay, dtype=np.float64),
        np.ascontiguousarray(freq, dtype=np.float64),
        float(sample_rate),
        n,
    )
    return ImpactSignal(samples, int(sample_rate))


def synthesize_impact(
    model: ModalModel,
    surface_vertex: int,
    force,
    sample_rate: int = DEFAULT_SAMPLE_RATE,
    duration: float = DEFAULT_DURATION,
    normalize: bool = False,
) -> ImpactSignal:
    """Impact sound at a surface vertex; optional peak normalization to 0.9."""
    if not duration > 0:
        raise SynthesisError("duration must be > 0")
    if model.n_modes and sample_rate < 2.0 * float(model.frequency.max()):
        raise SynthesisError(
            f"sample rate {sample_rate} Hz is below Nyquist for a {model.frequency.max():.1f} Hz mode"
        )
    amp = excitation_gains(model, surface_vertex, force)
    sig = synthesize_modes(amp, model.decay, model.frequency, sample_rate, duration)
    if normalize:
        peak = float(np.max(np.abs(sig.samples))) if sig.samples.size else 0.0
        if peak > 0:
            return ImpactSignal(sig.samples * (PEAK_LEVEL / peak), sig.sample_rate)
    return sig


def nearest_vertex(vertices, xyz) -> int:
    d = np.linalg.norm(np.asarray(vertices) - np.asarray(xyz, dtype=np.float64), axis=1)
    return int(np.argmin(d))

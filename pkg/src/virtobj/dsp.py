"""Short-time Fourier transforms and 16-bit PCM WAV files.

Frames start at multiples of ``hop`` from sample 0 and the tail is zero
padded, giving ``ceil(len / hop)`` frames. The analysis window is the Hann
window sampled at half-integer offsets, ``sin^2(pi (n + 1/2) / W)``, which
keeps the overlap-add constant at ``hop = W/4`` while staying nonzero at the
frame edges, so the first samples of a signal remain invertible.
"""
from __future__ import annotations

import logging
import math
import os
import wave
import warnings
from dataclasses import dataclass

import numpy as np

from .modal import ImpactSignal, PEAK_LEVEL

log = logging.getLogger(__name__)

DEFAULT_WINDOW = 1024
DEFAULT_HOP = 256


class ClippingWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """Complex STFT, ``data[f, t]`` with ``F = window_size // 2 + 1`` rows."""

    data: np.ndarray
    window_size: int
    hop: int
    sample_rate: int

    @property
    def shape(self):
        return self.data.shape

    def as_real(self) -> np.ndarray:
        """``F x T x 2`` array of real and imaginary parts."""
        return np.stack([self.data.real, self.data.imag], axis=-1)

    @classmethod
    def from_real(cls, arr, window_size, hop, sample_rate) -> "Spectrogram":
        arr = np.asarray(arr, dtype=np.float64)
        return cls(arr[..., 0] + 1j * arr[..., 1], window_size, hop, sample_rate)


def hann(window_size: int) -> np.ndarray:
    n = np.arange(window_size, dtype=np.float64)
    return np.sin(np.pi * (n + 0.5) / window_size) ** 2


def _check_params(window_size, hop):
    if window_size < 2 or window_size & (window_size - 1):
        raise ValueError("window_size must be a power of two >= 2")
    if not 0 < hop <= window_size:
        raise ValueError("hop must satisfy 0 < hop <= window_size")


def _samples(signal):
    if isinstance(signal, ImpactSignal):
        return signal.samples, signal.sample_rate
    return np.asarray(signal, dtype=np.float64), None


def stft(signal, window_size: int = DEFAULT_WINDOW, hop: int = DEFAULT_HOP, sample_rate=None) -> Spectrogram:
    """Hann-windowed STFT of an ``ImpactSignal`` (or a bare sample array)."""
    _check_params(window_size, hop)
    x, sr = _samples(signal)
    sr = sr if sr is not None else (sample_rate or 44100)
    n = x.shape[0]
    n_frames = max(1, math.ceil(n / hop))
    padded = np.zeros((n_frames - 1) * hop + window_size)
    padded[:n] = x
    idx = np.arange(window_size)[None, :] + hop * np.arange(n_frames)[:, None]
    frames = padded[idx] * hann(window_size)[None, :]
    data = np.fft.rfft(frames, axis=1).T
    return Spectrogram(data, window_size, hop, int(sr))


def _window_sum(window_size, hop, n_frames):
    w2 = hann(window_size) ** 2
    total = np.zeros((n_frames - 1) * hop + window_size)
    for t in range(n_frames):
        total[t * hop:t * hop + window_size] += w2
    return total


def check_overlap(window_size: int, hop: int, rtol: float = 1e-9) -> bool:
    """True when squared Hann windows spaced by ``hop`` sum to a constant."""
    if window_size % hop:
        return False
    w2 = hann(window_size) ** 2
    period = w2.reshape(-1, hop).sum(axis=0)
    return bool(np.ptp(period) <= rtol * period.max())


def istft(spec: Spectrogram, length: int) -> ImpactSignal:
    """Least-squares overlap-add inverse, truncated or zero padded to ``length``."""
    _check_params(spec.window_size, spec.hop)
    if not check_overlap(spec.window_size, spec.hop):
        raise ValueError(
            f"hop {spec.hop} does not give a constant overlap-add for window {spec.window_size}"
        )
    W, H = spec.window_size, spec.hop
    n_frames = spec.data.shape[1]
    frames = np.fft.irfft(spec.data.T, n=W, axis=1) * hann(W)[None, :]
    out = np.zeros((n_frames - 1) * H + W)
    for t in range(n_frames):
        out[t * H:t * H + W] += frames[t]
    norm = _window_sum(W, H, n_frames)
    out = out / norm
    y = np.zeros(int(length))
    m = min(int(length), out.shape[0])
    y[:m] = out[:m]
    return ImpactSignal(y, spec.sample_rate)


def frame_energy(spec: Spectrogram) -> np.ndarray:
    """Per-frame time-domain energy recovered from one-sided spectra (Parseval)."""
    W = spec.window_size
    mag2 = np.abs(spec.data) ** 2
    e = mag2[0] + mag2[-1] + 2.0 * mag2[1:-1].sum(axis=0)
    return e / W


def magnitude_image(spec: Spectrogram, floor_db: float = -100.0) -> np.ndarray:
    """Log-magnitude spectrogram scaled to [0, 1], low frequencies at the bottom."""
    mag = np.abs(spec.data)
    peak = mag.max()
    if peak <= 0:
        return np.zeros(mag.shape)
    db = 20.0 * np.log10(np.maximum(mag / peak, 1e-300))
    img = np.clip(1.0 - db / floor_db, 0.0, 1.0)
    return img[::-1]


def write_wav(signal: ImpactSignal, path, normalize: bool = False) -> None:
    """16-bit mono PCM WAV, little-endian; optional peak normalization to 0.9."""
    x = np.asarray(signal.samples, dtype=np.float64)
    peak = float(np.max(np.abs(x))) if x.size else 0.0
    if normalize and peak > 0:
        x = x * (PEAK_LEVEL / peak)
    elif peak > 1.0:
        warnings.warn(f"signal peak {peak:.3f} exceeds 1.0 and will clip", ClippingWarning, stacklevel=2)
    pcm = np.round(np.clip(x, -1.0, 1.0) * 32767.0).astype("<i2")
    with wave.open(os.fspath(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(int(signal.sample_rate))
        wf.writeframes(pcm.tobytes())


def read_wav(path) -> ImpactSignal:
    with wave.open(os.fspath(path), "rb") as wf:
        if wf.getnchannels() != 1 or wf.getsampwidth() != 2:
            raise ValueError("only 16-bit mono WAV is supported")
        sr = wf.getframerate()
        raw = wf.readframes(wf.getnframes())
    pcm = np.frombuffer(raw, dtype="<i2").astype(np.float64)
    return ImpactSignal(pcm / 32767.0, sr)

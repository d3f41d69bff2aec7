"""Spectral features per channel and the electrode montage graph."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import AsymmetricInput, BandOutOfRange, NegativeWeight, TooShort

DE_FLOOR = 1e-12
MIN_LENGTH = 16
DEFAULT_THETA = 0.6


@dataclass(frozen=True)
class BandDef:
    name: str
    lo_hz: float
    hi_hz: float

    def check(self, rate_hz: float) -> None:
        if not 0 < self.lo_hz < self.hi_hz < rate_hz / 2:
            raise BandOutOfRange(
                f"band {self.name} [{self.lo_hz}, {self.hi_hz}) must satisfy 0 < lo < hi < {rate_hz / 2}"
            )


DEFAULT_BANDS = (
    BandDef("delta", 1.0, 4.0),
    BandDef("theta", 4.0, 8.0),
    BandDef("alpha", 8.0, 14.0),
    BandDef("beta", 14.0, 31.0),
    BandDef("gamma", 31.0, 50.0),
)


def periodogram(signal, rate_hz: float):
    """One-sided Hann-windowed PSD.

    The mean is removed, the signal is multiplied by a periodic Hann window
    ``w`` and ``psd = |rfft(x w)|^2 / (rate * sum(w^2))``, with every bin
    except DC and Nyquist doubled.  With this normalisation
    ``sum(psd) * df`` equals the window-weighted mean square of the
    de-meaned signal, i.e. roughly its variance.
    """
    x = np.asarray(signal, dtype=np.float64)
    n = x.shape[-1]
    if n < MIN_LENGTH:
        raise TooShort(f"need at least {MIN_LENGTH} samples, got {n}")
    win = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
    spec = np.fft.rfft((x - x.mean(axis=-1, keepdims=True)) * win)
    psd = (spec.real ** 2 + spec.imag ** 2) / (rate_hz * np.sum(win ** 2))
    if n % 2 == 0:
        psd[..., 1:-1] *= 2
    else:
        psd[..., 1:] *= 2
    freqs = np.fft.rfftfreq(n, d=1.0 / rate_hz)
    return freqs, psd


def band_power(freqs, psd, band: BandDef) -> float:
    freqs = np.asarray(freqs)
    if freqs.size < 2:
        raise TooShort("need at least two frequency bins")
    nyquist = freqs[-1]
    if not 0 < band.lo_hz < band.hi_hz <= nyquist:
        raise BandOutOfRange(f"band {band.name} outside (0, {nyquist}]")
    df = freqs[1] - freqs[0]
    mask = (freqs >= band.lo_hz) & (freqs < band.hi_hz)
    return float(np.sum(np.asarray(psd)[..., mask], axis=-1) * df)


def diff_entropy(band_signal) -> float:
    """Gaussian differential entropy ``0.5 ln(2 pi e var)`` in nats (var floored at 1e-12)."""
    x = np.asarray(band_signal, dtype=np.float64)
    if x.shape[-1] < MIN_LENGTH:
        raise TooShort(f"need at least {MIN_LENGTH} samples, got {x.shape[-1]}")
    var = np.maximum(np.var(x, axis=-1), DE_FLOOR)
    out = 0.5 * np.log(2 * np.pi * np.e * var)
    return float(out) if np.ndim(out) == 0 else out


def bandpass_mask(data, rate_hz: float, band: BandDef) -> np.ndarray:
    """Zero every DFT bin outside ``[lo, hi)`` and transform back (last axis)."""
    x = np.asarray(data, dtype=np.float64)
    n = x.shape[-1]
    spec = np.fft.rfft(x, axis=-1)
    freqs = np.fft.rfftfreq(n, d=1.0 / rate_hz)
    spec[..., (freqs < band.lo_hz) | (freqs >= band.hi_hz)] = 0
    return np.fft.irfft(spec, n=n, axis=-1)


def extract_features(epoch, bands: Sequence[BandDef] = DEFAULT_BANDS) -> np.ndarray:
    """Differential entropy per (channel, band) of a frequency-masked epoch.

    Returns a ``(channels, len(bands))`` float64 array.
    """
    for b in bands:
        b.check(epoch.rate_hz)
    data = epoch.data
    if data.shape[1] < MIN_LENGTH:
        raise TooShort(f"need at least {MIN_LENGTH} samples")
    n = data.shape[1]
    spec = np.fft.rfft(data, axis=-1)
    freqs = np.fft.rfftfreq(n, d=1.0 / epoch.rate_hz)
    out = np.empty((data.shape[0], len(bands)))
    for k, b in enumerate(bands):
        masked = np.where((freqs >= b.lo_hz) & (freqs < b.hi_hz), spec, 0)
        out[:, k] = diff_entropy(np.fft.irfft(masked, n=n, axis=-1))
    return out


def band_powers(epoch, bands: Sequence[BandDef] = DEFAULT_BANDS) -> np.ndarray:
    """``(channels, bands)`` band powers from the periodogram."""
    freqs, psd = periodogram(epoch.data, epoch.rate_hz)
    return np.stack([
        np.array([band_power(freqs, psd[c], b) for b in bands]) for c in range(psd.shape[0])
    ])


# --------------------------------------------------------------------------
# montage graph
# --------------------------------------------------------------------------

# Unit-sphere scalp coordinates (x to the right ear, y to the nose, z up),
# from the spherical 10-20 angles: Fp1/Fp2 at +-18 deg off the midline on the
# equator, C3/C4 at 45 deg elevation on the coronal plane, P7/P8 at
# +-126 deg on the equator, O1/O2 at +-162 deg on the equator.
MONTAGE_8 = {
    "Fp1": (-0.309017, 0.951057, 0.0),
    "Fp2": (0.309017, 0.951057, 0.0),
    "C3": (-0.707107, 0.0, 0.707107),
    "C4": (0.707107, 0.0, 0.707107),
    "P7": (-0.809017, -0.587785, 0.0),
    "P8": (0.809017, -0.587785, 0.0),
    "O1": (-0.309017, -0.951057, 0.0),
    "O2": (0.309017, -0.951057, 0.0),
}


@dataclass(frozen=True)
class MontageGraph:
    names: tuple[str, ...]
    positions: np.ndarray
    adjacency: np.ndarray

    @property
    def n(self) -> int:
        return len(self.names)


def _fibonacci_cap(n: int) -> np.ndarray:
    # evenly spread points over the upper hemisphere
    i = np.arange(n) + 0.5
    z = 1.0 - i / n
    r = np.sqrt(1.0 - z * z)
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def default_montage(n: int = 8, theta: float = DEFAULT_THETA) -> MontageGraph:
    """Gaussian-kernel electrode graph, ``w_ij = exp(-d_ij^2 / theta^2)`` on chord distance."""
    if n < 2:
        raise ValueError("a montage needs at least two electrodes")
    if n == 8:
        names = tuple(MONTAGE_8)
        pos = np.array([MONTAGE_8[k] for k in names])
    else:
        names = tuple(f"E{i}" for i in range(n))
        pos = _fibonacci_cap(n)
    pos = pos / np.linalg.norm(pos, axis=1, keepdims=True)
    d2 = np.sum((pos[:, None, :] - pos[None, :, :]) ** 2, axis=-1)
    adj = np.exp(-d2 / theta ** 2)
    np.fill_diagonal(adj, 0.0)
    return MontageGraph(names, pos, adj)


def normalized_adjacency(adjacency) -> np.ndarray:
    """``D^-1/2 (A + I) D^-1/2`` with ``D`` the degree matrix of ``A + I``."""
    a = np.asarray(adjacency, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise AsymmetricInput("adjacency must be square")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12):
        raise AsymmetricInput("adjacency must be symmetric")
    if np.any(a < 0):
        raise NegativeWeight("adjacency weights must be nonnegative")
    a_hat = a + np.eye(a.shape[0])
    s = 1.0 / np.sqrt(a_hat.sum(axis=1))
    return a_hat * s[:, None] * s[None, :]

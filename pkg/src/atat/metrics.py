"""Reconstruction metrics: CC, temporal and spectral RRMSE, confidence intervals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import DegenerateSegment, InvalidInput, ShapeError
from .signal import RATE_HZ


@dataclass(frozen=True)
class PsdConfig:
    """Single Hamming-windowed periodogram of the whole segment, one-sided."""

    window: str = "hamming"
    fs: float = RATE_HZ


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"metric inputs must be equal-length vectors, got {a.shape} and {b.shape}")
    return a, b


def pearson_cc(a, b) -> float:
    a, b = _pair(a, b)
    if a.size < 2:
        raise InvalidInput("correlation needs at least two samples")
    ac, bc = a - a.mean(), b - b.mean()
    den = np.sqrt(np.dot(ac, ac) * np.dot(bc, bc))
    if den == 0:
        raise DegenerateSegment("correlation with a constant vector is undefined")
    return float(np.clip(np.dot(ac, bc) / den, -1.0, 1.0))


def trrmse(denoised, clean) -> float:
    d, c = _pair(denoised, clean)
    ref = np.sqrt(np.mean(c * c))
    if ref == 0:
        raise DegenerateSegment("clean reference has zero RMS")
    return float(np.sqrt(np.mean((d - c) ** 2)) / ref)


def psd(x, cfg: PsdConfig = PsdConfig()) -> np.ndarray:
    """One-sided power spectral density (n//2 + 1 bins) of a windowed segment."""
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    w = np.hamming(n) if cfg.window == "hamming" else np.ones(n)
    spec = np.abs(np.fft.rfft(x * w)) ** 2 / (cfg.fs * np.sum(w * w))
    spec[1:n // 2 + (n % 2)] *= 2.0  # fold negative frequencies; DC and Nyquist stay single
    return spec


def srrmse(denoised, clean, cfg: PsdConfig = PsdConfig()) -> float:
    d, c = _pair(denoised, clean)
    pc = psd(c, cfg)
    ref = np.sqrt(np.mean(pc * pc))
    if ref == 0:
        raise DegenerateSegment("clean reference has an all-zero spectrum")
    return float(np.sqrt(np.mean((psd(d, cfg) - pc) ** 2)) / ref)


def confidence_interval(values, level: float = 0.95) -> tuple[float, float]:
    """Student-t interval for the mean, n - 1 degrees of freedom."""
    v = np.asarray(values, dtype=np.float64)
    if v.size < 2:
        raise InvalidInput("a confidence interval needs at least two values")
    m = float(v.mean())
    half = float(stats.t.ppf(0.5 + level / 2.0, v.size - 1) * v.std(ddof=1) / np.sqrt(v.size))
    return m - half, m + half

"""Autoencoder-targeted masking: locate high-noise sites and build 1x2 tokens.

The noise proxy is the Pearson correlation, window by window, between the
normalized contaminated input and the autoencoder's output. Windows that
correlate below ``threshold`` are treated as high-noise and every sample they
cover becomes a target site for the transformer.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InvalidConfig, ShapeError
from .signal import SEGMENT_LEN, Segment, SegmentKind

WINDOW_LEN = 64
STRIDE = 32
THRESHOLD = 0.8
CROSSFADE = 8


@dataclass(frozen=True)
class NoiseProfile:
    window_len: int
    stride: int
    cc_per_window: np.ndarray
    threshold: float = THRESHOLD
    degenerate: np.ndarray | None = None  # windows with zero variance (CC forced to 0)
    length: int = SEGMENT_LEN

    @property
    def starts(self) -> np.ndarray:
        return np.arange(len(self.cc_per_window)) * self.stride

    def with_threshold(self, threshold: float) -> "NoiseProfile":
        return NoiseProfile(self.window_len, self.stride, self.cc_per_window, threshold,
                            self.degenerate, self.length)


@dataclass(frozen=True)
class NoiseMask:
    mask: np.ndarray
    source_profile: NoiseProfile | None = None

    @property
    def fraction(self) -> float:
        return float(self.mask.mean())


@dataclass(frozen=True)
class TokenStream:
    tokens: np.ndarray  # (512, 2): contaminated, autoencoder output; zero at masked sites
    mask: NoiseMask


def _vec(x) -> np.ndarray:
    return np.asarray(x.samples if isinstance(x, Segment) else x, dtype=np.float64)


def window_count(length: int, window_len: int, stride: int) -> int:
    return (length - window_len) // stride + 1


def windowed_cc(original, ae_output, window_len: int = WINDOW_LEN, stride: int = STRIDE,
                threshold: float = THRESHOLD) -> NoiseProfile:
    a, b = _vec(original), _vec(ae_output)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"windowed_cc needs equal-length vectors, got {a.shape} and {b.shape}")
    if stride <= 0 or window_len < 2 or window_len > a.size:
        raise InvalidConfig(f"invalid window geometry: window_len={window_len}, stride={stride}, length={a.size}")
    wa = sliding_window_view(a, window_len)[::stride]
    wb = sliding_window_view(b, window_len)[::stride]
    ca = wa - wa.mean(axis=1, keepdims=True)
    cb = wb - wb.mean(axis=1, keepdims=True)
    den = np.sqrt((ca * ca).sum(axis=1) * (cb * cb).sum(axis=1))
    degenerate = den == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        cc = np.where(degenerate, 0.0, (ca * cb).sum(axis=1) / np.where(degenerate, 1.0, den))
    return NoiseProfile(window_len, stride, np.clip(cc, -1.0, 1.0), threshold, degenerate, a.size)


def build_mask(profile: NoiseProfile) -> NoiseMask:
    mask = np.zeros(profile.length, dtype=bool)
    for start, cc in zip(profile.starts, profile.cc_per_window):
        if cc < profile.threshold:
            mask[start:start + profile.window_len] = True
    return NoiseMask(mask, profile)


def tokenize(original_norm, ae_output, mask: NoiseMask | np.ndarray) -> TokenStream:
    a, b = _vec(original_norm), _vec(ae_output)
    m = mask.mask if isinstance(mask, NoiseMask) else np.asarray(mask, dtype=bool)
    if not (a.shape == b.shape == m.shape) or a.ndim != 1:
        raise ShapeError(f"tokenize needs equal lengths, got {a.shape}, {b.shape}, {m.shape}")
    tokens = np.stack([a, b], axis=1)
    tokens[m] = 0.0
    return TokenStream(tokens, mask if isinstance(mask, NoiseMask) else NoiseMask(m))


def splice_weights(mask, crossfade: int = CROSSFADE) -> np.ndarray:
    """Weight of the transformer output per sample.

    1 on masked samples, 0 far from them, and a linear ramp over the
    ``crossfade`` unmasked samples next to each masked run. Works on a single
    mask or a stack of masks along the last axis.
    """
    if crossfade < 0:
        raise InvalidConfig(f"crossfade must be >= 0, got {crossfade}")
    m = np.asarray(mask, dtype=bool)
    if m.ndim > 1:
        return np.stack([splice_weights(row, crossfade) for row in m])
    w = m.astype(np.float64)
    if crossfade == 0 or not m.any() or m.all():
        return w
    n = m.size
    idx = np.arange(n)
    last = np.maximum.accumulate(np.where(m, idx, -n - crossfade - 1))
    nxt = np.minimum.accumulate(np.where(m, idx, 2 * n + crossfade + 1)[::-1])[::-1]
    dist = np.minimum(idx - last, nxt - idx)
    ramp = np.clip(1.0 - dist / (crossfade + 1.0), 0.0, 1.0)
    return np.where(m, 1.0, ramp)


def splice(ae_output, transformer_output, mask, crossfade: int = CROSSFADE) -> Segment:
    a, t = _vec(ae_output), _vec(transformer_output)
    m = mask.mask if isinstance(mask, NoiseMask) else np.asarray(mask, dtype=bool)
    if not (a.shape == t.shape == m.shape):
        raise ShapeError(f"splice needs equal lengths, got {a.shape}, {t.shape}, {m.shape}")
    w = splice_weights(m, crossfade)
    out = np.where(w == 1.0, t, np.where(w == 0.0, a, w * t + (1.0 - w) * a))
    seg_id = f"{ae_output.id}/spliced" if isinstance(ae_output, Segment) else "spliced"
    return Segment(out, SegmentKind.DENOISED, seg_id)


def profile_to_csv(profile: NoiseProfile, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "cc"])
        for i, cc in enumerate(profile.cc_per_window):
            w.writerow([i, repr(float(cc))])
    return path


def mask_to_csv(mask: NoiseMask, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "flag"])
        for i, flag in enumerate(mask.mask):
            w.writerow([i, int(flag)])
    return path

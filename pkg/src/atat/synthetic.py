"""Synthetic source pools for running the pipeline without external recordings.

None of this stands in for real EEG: the generators only reproduce the
coarse spectral shape of each source (1/f background plus rhythms for EEG,
broadband high-frequency bursts for EMG) so that every stage can be
exercised and tested offline.
"""

from __future__ import annotations

import numpy as np

from .signal import RATE_HZ, SEGMENT_LEN, Segment, SegmentKind

_FREQS = np.fft.rfftfreq(SEGMENT_LEN, d=1.0 / RATE_HZ)
_T = np.arange(SEGMENT_LEN) / RATE_HZ


def _shaped_noise(rng: np.random.Generator, gain: np.ndarray) -> np.ndarray:
    spec = (rng.standard_normal(gain.size) + 1j * rng.standard_normal(gain.size)) * gain
    x = np.fft.irfft(spec, n=SEGMENT_LEN)
    return x / x.std()


def eeg_like(rng: np.random.Generator) -> np.ndarray:
    """1/f background with a theta and an alpha rhythm, microvolt scale."""
    gain = np.zeros_like(_FREQS)
    band = (_FREQS >= 1.0) & (_FREQS <= 40.0)
    gain[band] = 1.0 / _FREQS[band]
    x = _shaped_noise(rng, gain)
    for lo, hi, amp in ((4.0, 7.0, 0.6), (8.0, 12.0, 1.0)):
        f = rng.uniform(lo, hi)
        env = 1.0 + 0.5 * np.sin(2 * np.pi * rng.uniform(0.2, 1.0) * _T + rng.uniform(0, 2 * np.pi))
        x += amp * rng.uniform(0.3, 1.2) * env * np.sin(2 * np.pi * f * _T + rng.uniform(0, 2 * np.pi))
    return 20.0 * x / x.std()


def emg_like(rng: np.random.Generator) -> np.ndarray:
    """Broadband 20-120 Hz activity with one to three contraction bursts."""
    gain = ((_FREQS >= 20.0) & (_FREQS <= 120.0)).astype(float)
    x = _shaped_noise(rng, gain)
    env = np.full(SEGMENT_LEN, 0.15)
    for _ in range(rng.integers(1, 4)):
        width = rng.integers(48, 200)
        start = rng.integers(0, SEGMENT_LEN - width)
        env[start:start + width] += rng.uniform(0.5, 2.0) * np.hanning(width)
    return rng.uniform(10.0, 60.0) * x * env


def eeg_pool(n: int, seed: int, prefix: str = "eeg") -> list[Segment]:
    rng = np.random.default_rng(seed)
    return [Segment(eeg_like(rng), SegmentKind.CLEAN_EEG, f"{prefix}{i:05d}") for i in range(n)]


def emg_pool(n: int, seed: int, prefix: str = "emg") -> list[Segment]:
    rng = np.random.default_rng(seed)
    return [Segment(emg_like(rng), SegmentKind.EMG_ARTIFACT, f"{prefix}{i:05d}") for i in range(n)]


def sinusoid(rng: np.random.Generator) -> np.ndarray:
    """A slow tone plus a weaker one an octave up, random phases; the fixture's clean signal.

    Slow enough that a burst-sized gap can be bridged from the surrounding context.
    """
    x = np.zeros(SEGMENT_LEN)
    for amp, (lo, hi) in ((1.0, (0.5, 1.5)), (0.5, (1.0, 3.0))):
        x += amp * np.sin(2 * np.pi * rng.uniform(lo, hi) * _T + rng.uniform(0, 2 * np.pi))
    return x


def burst(rng: np.random.Generator) -> np.ndarray:
    """A single localized 1-40 Hz burst, in band with the tones, so filtering alone cannot remove it."""
    gain = ((_FREQS >= 1.0) & (_FREQS <= 40.0)).astype(float)
    carrier = _shaped_noise(rng, gain)
    width = int(rng.integers(32, 96))
    start = int(rng.integers(0, SEGMENT_LEN - width))
    env = np.zeros(SEGMENT_LEN)
    env[start:start + width] = np.hanning(width)
    # tiny floor keeps rms > 0 and mixing well defined
    return carrier * (env + 1e-3)


def sinusoid_burst_pools(n: int, seed: int) -> tuple[list[Segment], list[Segment]]:
    """Paired clean tones and burst artifacts for the built-in learning fixture."""
    rng = np.random.default_rng(seed)
    clean = [Segment(sinusoid(rng), SegmentKind.CLEAN_EEG, f"sin{i:05d}") for i in range(n)]
    noise = [Segment(burst(rng), SegmentKind.EMG_ARTIFACT, f"burst{i:05d}") for i in range(n)]
    return clean, noise

"""Segments, semi-synthetic EMG contamination and per-segment normalization."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateNoise, DegenerateSegment, InvalidInput, ShapeError

SEGMENT_LEN = 512
RATE_HZ = 256
SNR_RANGE_DB = (-7.0, 2.0)


class SegmentKind(str, enum.Enum):
    CLEAN_EEG = "CleanEEG"
    EMG_ARTIFACT = "EMGArtifact"
    CONTAMINATED = "Contaminated"
    DENOISED = "Denoised"


class NormMode(str, enum.Enum):
    ZSCORE = "ZScore"
    MINMAX01 = "MinMax01"


@dataclass(frozen=True)
class Segment:
    """A 2 s single-channel recording: 512 samples at 256 Hz."""

    samples: np.ndarray
    kind: SegmentKind
    id: str
    rate_hz: int = RATE_HZ

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.shape[0] != SEGMENT_LEN:
            raise ShapeError(f"segment {self.id!r}: expected {SEGMENT_LEN} samples, got shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise InvalidInput(f"segment {self.id!r} contains non-finite samples")
        if self.rate_hz != RATE_HZ:
            raise InvalidInput(f"segment {self.id!r}: sampling rate must be {RATE_HZ} Hz")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "kind", SegmentKind(self.kind))

    def with_samples(self, samples, kind: SegmentKind | None = None, id: str | None = None) -> "Segment":
        return Segment(samples, kind or self.kind, id or self.id)


@dataclass(frozen=True)
class MixSpec:
    snr_db: float
    lam: float
    eeg_id: str
    emg_id: str
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidInput(f"mixing coefficient must be positive, got {self.lam}")


@dataclass(frozen=True)
class NormState:
    mode: NormMode
    offset: float
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise DegenerateSegment(f"normalization scale must be positive, got {self.scale}")
        object.__setattr__(self, "mode", NormMode(self.mode))


def _as_finite_vector(samples) -> np.ndarray:
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise InvalidInput("expected a non-empty 1-D vector")
    if not np.all(np.isfinite(x)):
        raise InvalidInput("vector contains non-finite values")
    return x


def rms(samples) -> float:
    x = _as_finite_vector(samples)
    return float(np.sqrt(np.mean(x * x)))


def mixing_coefficient(rms_clean: float, rms_noise: float, snr_db: float) -> float:
    """Scale for the artifact so that 10*log10(rms(x) / rms(lam*n)) == snr_db."""
    if rms_noise <= 0:
        raise DegenerateNoise("artifact segment has zero RMS")
    return rms_clean / (rms_noise * 10.0 ** (snr_db / 10.0))


def measured_snr_db(clean, scaled_noise) -> float:
    return 10.0 * np.log10(rms(clean) / rms(scaled_noise))


def contaminate(clean, noise, snr_db: float) -> tuple[np.ndarray, float]:
    """Raw mixture ``clean + lam * noise`` and the coefficient ``lam``."""
    x = _as_finite_vector(clean)
    n = _as_finite_vector(noise)
    if x.shape != n.shape:
        raise ShapeError(f"clean and noise lengths differ: {x.shape} vs {n.shape}")
    lam = mixing_coefficient(rms(x), rms(n), snr_db)
    return x + lam * n, lam


def normalize(samples, mode: NormMode = NormMode.MINMAX01) -> tuple[np.ndarray, NormState]:
    x = _as_finite_vector(samples)
    mode = NormMode(mode)
    if mode is NormMode.MINMAX01:
        offset = float(x.min())
        scale = float(x.max()) - offset
    else:
        offset = float(x.mean())
        scale = float(x.std())
    if not scale > 0:
        raise DegenerateSegment("cannot normalize a constant segment")
    return (x - offset) / scale, NormState(mode, offset, scale)


def denormalize(samples, state: NormState) -> np.ndarray:
    return np.asarray(samples, dtype=np.float64) * state.scale + state.offset


def mix(
    eeg: Segment,
    emg: Segment,
    snr_db: float,
    norm_mode: NormMode = NormMode.MINMAX01,
    *,
    seed: int = 0,
    snr_range: tuple[float, float] = SNR_RANGE_DB,
) -> tuple[Segment, MixSpec, NormState]:
    """Contaminate clean EEG with an EMG artifact at ``snr_db`` and normalize.

    The returned segment holds the normalized mixture; ``denormalize`` with
    the returned state recovers ``eeg + lam * emg``.
    """
    if eeg.kind is not SegmentKind.CLEAN_EEG:
        raise InvalidInput(f"expected CleanEEG, got {eeg.kind.value} for {eeg.id!r}")
    if emg.kind is not SegmentKind.EMG_ARTIFACT:
        raise InvalidInput(f"expected EMGArtifact, got {emg.kind.value} for {emg.id!r}")
    lo, hi = snr_range
    if not lo <= snr_db <= hi:
        raise InvalidInput(f"snr_db {snr_db} outside configured range [{lo}, {hi}]")
    y, lam = contaminate(eeg.samples, emg.samples, snr_db)
    y_norm, state = normalize(y, norm_mode)
    spec = MixSpec(float(snr_db), lam, eeg.id, emg.id, seed)
    seg = Segment(y_norm, SegmentKind.CONTAMINATED, f"{eeg.id}+{emg.id}@{snr_db:g}dB")
    return seg, spec, state


def select_high_variance(segments: list[Segment], quantile: float = 0.75) -> list[Segment]:
    """Artifacts whose variance lies in the top ``1 - quantile`` of the pool."""
    if not segments:
        return []
    var = np.array([np.var(s.samples) for s in segments])
    cut = np.quantile(var, quantile)
    return [s for s, v in zip(segments, var) if v >= cut]


def estimated_clean_std(contaminated_std: float, snr_db: float) -> float:
    """Clean-signal std implied by the mixture std at a known SNR.

    Assumes clean signal and artifact are uncorrelated, so the mixture
    variance is var(x) * (1 + 10**(-snr_db/5)).
    """
    return contaminated_std / np.sqrt(1.0 + 10.0 ** (-snr_db / 5.0))

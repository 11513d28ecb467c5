"""Inference path: gate -> autoencoder -> mask -> tokens -> generator -> splice -> rescale."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .adversarial import GeneratorModel, generate_batch
from .autoencoder import AutoencoderModel, denoise_batch
from .errors import ConfigError
from .gate import GateModel, choose_class, gate_probabilities
from .masking import CROSSFADE, STRIDE, THRESHOLD, WINDOW_LEN, TokenStream, build_mask, splice, tokenize, windowed_cc
from .signal import NormMode, estimated_clean_std, normalize


@dataclass(frozen=True)
class MaskConfig:
    window_len: int = WINDOW_LEN
    stride: int = STRIDE
    threshold: float = THRESHOLD
    crossfade: int = CROSSFADE


def ae_stream(ae_out: np.ndarray) -> np.ndarray:
    """Stretch each AE output row to [0, 1] before masking, tokenizing and splicing.

    The CC objective fixes only the shape of the AE output; its offset and
    spread drift freely (a trained model can sit in a band 0.02 wide). The
    generator fills masked sites in absolute values, so the unmasked AE stream
    is put on the same MinMax01 scale as the contaminated input. The windowed
    CC, and therefore the mask, is unchanged by this map. Flat rows are left
    as they are.
    """
    a = np.atleast_2d(np.asarray(ae_out, dtype=np.float64))
    lo, span = a.min(axis=1, keepdims=True), np.ptp(a, axis=1, keepdims=True)
    out = np.where(span > 0, (a - lo) / np.where(span > 0, span, 1.0), a)
    return out.reshape(np.shape(ae_out))


def prepare_tokens(contaminated_norm: np.ndarray, ae_out: np.ndarray, cfg: MaskConfig = MaskConfig()) -> TokenStream:
    profile = windowed_cc(contaminated_norm, ae_out, cfg.window_len, cfg.stride, cfg.threshold)
    return tokenize(contaminated_norm, ae_out, build_mask(profile))


def rescale(normalized: np.ndarray, contaminated_raw: np.ndarray, snr_db: float) -> np.ndarray:
    """Map a unitless reconstruction back to signal units.

    The shape comes from the reconstruction; the level is the contaminated
    mean and the clean spread implied by the (inferred) SNR.
    """
    sd = normalized.std()
    # a flat reconstruction has a rounding-level std; treat it as constant, not as signal
    flat = sd <= 1e-9 * max(1.0, float(np.abs(normalized).max()))
    centred = np.zeros_like(normalized) if flat else (normalized - normalized.mean()) / sd
    return centred * estimated_clean_std(contaminated_raw.std(), snr_db) + contaminated_raw.mean()


@dataclass
class DenoiseResult:
    output: np.ndarray          # (N, 512) full pipeline, signal units
    ae_only: np.ndarray         # (N, 512) autoencoder branch alone, same rescaling
    snr_class: np.ndarray       # (N,) level routed to
    probabilities: np.ndarray   # (N, classes)
    masks: np.ndarray           # (N, 512) bool


@dataclass
class AtatSystem:
    """A gate plus one autoencoder (and optionally one generator) per SNR class."""

    gate: GateModel | None
    autoencoders: dict[float, AutoencoderModel] = field(default_factory=dict)
    generators: dict[float, GeneratorModel] = field(default_factory=dict)
    mask: MaskConfig = MaskConfig()

    def route(self, raw: np.ndarray, fixed_snr: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        if fixed_snr is not None:
            return np.full(len(raw), float(fixed_snr)), np.ones((len(raw), 1))
        if self.gate is None:
            if len(self.autoencoders) == 1:
                only = next(iter(self.autoencoders))
                return np.full(len(raw), only), np.ones((len(raw), 1))
            raise ConfigError("no gate checkpoint and more than one SNR model: cannot route")
        z = np.stack([normalize(r, NormMode.ZSCORE)[0] for r in raw])
        probs = gate_probabilities(self.gate, z)
        return np.array([choose_class(self.gate.classes, p) for p in probs]), probs

    def denoise_batch(self, raw, fixed_snr: float | None = None) -> DenoiseResult:
        """Denoise (N, 512) raw contaminated segments. The gate only routes; it never touches samples."""
        raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
        classes, probs = self.route(raw, fixed_snr)
        out = np.empty_like(raw)
        ae_only = np.empty_like(raw)
        masks = np.zeros(raw.shape, dtype=bool)
        for level in np.unique(classes):
            level = float(level)
            if level not in self.autoencoders:
                raise ConfigError(f"no autoencoder for the inferred SNR class {level:g} dB")
            idx = np.flatnonzero(classes == level)
            norm = np.stack([normalize(r, NormMode.MINMAX01)[0] for r in raw[idx]])
            ae = ae_stream(denoise_batch(self.autoencoders[level], norm))
            streams = [prepare_tokens(n, a, self.mask) for n, a in zip(norm, ae)]
            masks[idx] = np.stack([s.mask.mask for s in streams])
            gen = self.generators.get(level)
            if gen is None:
                spliced = ae
            else:
                g = generate_batch(gen, streams)
                spliced = np.stack([splice(a, t, s.mask.mask, self.mask.crossfade).samples
                                    for a, t, s in zip(ae, g, streams)])
            for j, i in enumerate(idx):
                out[i] = rescale(spliced[j], raw[i], level)
                ae_only[i] = rescale(ae[j], raw[i], level)
        return DenoiseResult(out, ae_only, classes, probs, masks)

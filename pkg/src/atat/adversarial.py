"""Transformer generator, convolutional critic and the five-cycle adversarial loop."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autograd import (Adam, Conv1d, Dense, Dropout, Module, Parameter, Tensor, TransformerEncoderLayer,
                       bce, cc_loss, leaky_relu, no_grad, pearson_rows, reshape, sigmoid, standardize, swapaxes)
from .errors import DivergenceError, InvalidConfig, InvalidDataset, ShapeError
from .masking import CROSSFADE, TokenStream, splice_weights
from .signal import SEGMENT_LEN, Segment

PROB_FLOOR = 1e-12
CC_EPS = 1e-8  # lets a fully masked, still-flat splice score CC 0 rather than fail


def sinusoidal_positions(length: int, dim: int) -> np.ndarray:
    """Fixed sin/cos code used to initialize the learned positional table."""
    pos = np.arange(length)[:, None]
    freq = 1.0 / 10000.0 ** (np.arange(0, dim, 2) / dim)
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(pos * freq)
    table[:, 1::2] = np.cos(pos * freq)
    return table


class GeneratorModel(Module):
    """Dense 2->16 token embedding, learned position and mask embeddings, two
    encoder layers, a k=3 smoothing convolution and a per-position 16->1 head."""

    def __init__(self, seed: int = 0, dim: int = 16, heads: int = 4, ff_dim: int = 128, layers: int = 2,
                 length: int = SEGMENT_LEN, dtype=np.float32):
        super().__init__()
        rng = np.random.default_rng([seed, 2])
        self.length = length
        self.embed = Dense(2, dim, rng, dtype)
        self.position = Parameter(sinusoidal_positions(length, dim).astype(dtype))
        self.mask_embed = Parameter(rng.normal(0.0, 0.1, dim).astype(dtype))
        self.encoder = [TransformerEncoderLayer(dim, heads, ff_dim, rng, dtype) for _ in range(layers)]
        self.smooth = Conv1d(dim, dim, 3, rng, dtype)
        self.head = Dense(dim, 1, rng, dtype)
        # start as a flat fill at the MinMax01 midpoint instead of unit-variance noise
        self.head.weight.data[...] = 0.0
        self.head.bias.data[...] = 0.5

    def forward(self, tokens: Tensor, mask: np.ndarray) -> Tensor:
        """(B, L, 2) tokens and (B, L) mask -> (B, L) signal."""
        if tokens.ndim != 3 or tokens.shape[1:] != (self.length, 2):
            raise ShapeError(f"generator expects (batch, {self.length}, 2) tokens, got {tokens.shape}")
        flags = np.asarray(mask, dtype=tokens.dtype)[..., None]
        h = self.embed(tokens) + self.position + self.mask_embed * flags
        for layer in self.encoder:
            h = layer(h)
        h = swapaxes(self.smooth(swapaxes(h, 1, 2)), 1, 2)
        out = self.head(h)
        return reshape(out, out.shape[:2])


class DiscriminatorModel(Module):
    """Conv1D(64)-LeakyReLU-dropout, Conv1D(128)-LeakyReLU-dropout, dense -> 1, sigmoid."""

    def __init__(self, seed: int = 0, dropout: float = 0.3, slope: float = 0.2, length: int = SEGMENT_LEN,
                 dtype=np.float32):
        super().__init__()
        rng = np.random.default_rng([seed, 3])
        self.length, self.slope = length, slope
        self.conv1 = Conv1d(1, 64, 3, rng, dtype)
        self.drop1 = Dropout(dropout, np.random.default_rng([seed, 4]))
        self.conv2 = Conv1d(64, 128, 3, rng, dtype)
        self.drop2 = Dropout(dropout, np.random.default_rng([seed, 5]))
        self.out = Dense(128 * length, 1, rng, dtype)

    def forward(self, x: Tensor) -> Tensor:
        """(B, L) z-scored signals -> (B,) probability of being authentic."""
        if x.ndim != 2 or x.shape[1] != self.length:
            raise ShapeError(f"discriminator expects (batch, {self.length}), got {x.shape}")
        B = x.shape[0]
        h = self.drop1(leaky_relu(self.conv1(reshape(x, (B, 1, self.length))), self.slope))
        h = self.drop2(leaky_relu(self.conv2(h), self.slope))
        return reshape(sigmoid(self.out(reshape(h, (B, -1)))), (B,))


@dataclass(frozen=True)
class GanConfig:
    cycles_per_iteration: int = 5
    epochs: int = 10
    batch: int = 20
    lr: float = 1e-4
    adv_weight: float = 1.0
    recon_weight: float = 1.0
    crossfade: int = CROSSFADE
    seed: int = 0

    def __post_init__(self):
        if self.cycles_per_iteration < 1:
            raise InvalidConfig("cycles_per_iteration must be >= 1")
        if self.epochs < 0 or self.batch < 1 or self.lr <= 0:
            raise InvalidConfig("epochs >= 0, batch >= 1 and lr > 0 required")
        if self.adv_weight < 0 or self.recon_weight < 0:
            raise InvalidConfig("loss weights must be non-negative")
        if self.adv_weight == 0 and self.recon_weight == 0:
            raise InvalidConfig("adv_weight and recon_weight cannot both be zero")
        if self.crossfade < 0:
            raise InvalidConfig("crossfade must be >= 0")


@dataclass
class GanTrace:
    iteration: list[int] = field(default_factory=list)
    gen_loss: list[float] = field(default_factory=list)
    disc_loss: list[float] = field(default_factory=list)
    recon_cc: list[float] = field(default_factory=list)
    gen_steps: int = 0
    disc_steps: int = 0

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iteration", "gen_loss", "disc_loss", "recon_cc"])
            for row in zip(self.iteration, self.gen_loss, self.disc_loss, self.recon_cc):
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        return path


def _stack_tokens(streams) -> tuple[np.ndarray, np.ndarray]:
    return np.stack([s.tokens for s in streams]), np.stack([s.mask.mask for s in streams])


def gen_forward(model: GeneratorModel, tokens: TokenStream) -> np.ndarray:
    """Full-length reconstruction in infer mode; only masked sites are used downstream."""
    if tokens.tokens.shape != (model.length, 2):
        raise ShapeError(f"expected ({model.length}, 2) tokens, got {tokens.tokens.shape}")
    return generate_batch(model, [tokens])[0]


def generate_batch(model: GeneratorModel, streams, batch: int = 20) -> np.ndarray:
    streams = list(streams)
    dtype = model.position.dtype
    model.eval()
    outs = []
    with no_grad():
        for i in range(0, len(streams), batch):
            tok, mask = _stack_tokens(streams[i:i + batch])
            outs.append(model(Tensor(tok.astype(dtype)), mask).data)
    return np.concatenate(outs).astype(np.float64)


def disc_forward(model: DiscriminatorModel, signal) -> float:
    """Probability that a z-scored 512-sample signal is authentic, strictly inside (0, 1)."""
    x = signal.samples if isinstance(signal, Segment) else np.asarray(signal, dtype=np.float64)
    if x.shape != (model.length,):
        raise ShapeError(f"discriminator expects {model.length} samples, got {x.shape}")
    model.eval()
    with no_grad():
        p = float(model(Tensor(x[None].astype(model.conv1.kernel.dtype))).data[0])
    return float(np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR))


def _check_finite(name: str, value: float):
    if not np.isfinite(value):
        raise DivergenceError(f"{name} became {value}")


def gan_train(gen: GeneratorModel, disc: DiscriminatorModel, dataset, cfg: GanConfig = GanConfig()):
    """Adversarial training on precomputed (TokenStream, clean) pairs.

    The autoencoder is frozen upstream: its output is column 1 of each token
    stream, which is intact everywhere the splice weight is below one. Each
    batch runs ``cycles_per_iteration`` alternating discriminator/generator
    updates. Returns (gen, disc, GanTrace).
    """
    dataset = list(dataset)
    if len(dataset) < cfg.batch:
        raise InvalidDataset(f"need at least {cfg.batch} training pairs, got {len(dataset)}")
    dtype = gen.position.dtype
    tokens, masks = _stack_tokens([d[0] for d in dataset])
    clean = np.stack([d[1].samples if isinstance(d[1], Segment) else np.asarray(d[1]) for d in dataset])
    weights = splice_weights(masks, cfg.crossfade).astype(dtype)
    ae = tokens[..., 1].astype(dtype)
    tokens, clean = tokens.astype(dtype), clean.astype(dtype)
    clean_z = standardize(Tensor(clean)).data

    rng = np.random.default_rng([cfg.seed, 6])
    g_opt = Adam(gen.parameters(), lr=cfg.lr)
    d_opt = Adam(disc.parameters(), lr=cfg.lr)
    trace = GanTrace()
    gen.train()
    disc.train()
    it = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        for start in range(0, len(order), cfg.batch):
            idx = order[start:start + cfg.batch]
            w = weights[idx]
            g_losses, d_losses, ccs = [], [], []
            for _ in range(cfg.cycles_per_iteration):
                out = gen(Tensor(tokens[idx]), masks[idx])
                spliced = out * w + ae[idx] * (1.0 - w)

                d_opt.zero_grad()
                fake = standardize(Tensor(spliced.data))
                d_loss = bce(disc(Tensor(clean_z[idx])), 1.0) + bce(disc(fake), 0.0)
                _check_finite("discriminator loss", d_loss.item())
                d_loss.backward()
                d_opt.step()

                g_opt.zero_grad()
                g_loss = None
                cc = float(pearson_rows(Tensor(spliced.data), clean[idx], CC_EPS).data.mean())
                if cfg.recon_weight > 0:
                    g_loss = cc_loss(spliced, clean[idx], CC_EPS) * cfg.recon_weight
                if cfg.adv_weight > 0:
                    adv = bce(disc(standardize(spliced)), 1.0) * cfg.adv_weight
                    g_loss = adv if g_loss is None else g_loss + adv
                _check_finite("generator loss", g_loss.item())
                g_loss.backward()
                g_opt.step()

                g_losses.append(g_loss.item())
                d_losses.append(d_loss.item())
                ccs.append(cc)
            trace.iteration.append(it)
            trace.gen_loss.append(float(np.mean(g_losses)))
            trace.disc_loss.append(float(np.mean(d_losses)))
            trace.recon_cc.append(float(np.mean(ccs)))
            it += 1
    disc.zero_grad()
    trace.gen_steps, trace.disc_steps = g_opt.steps, d_opt.steps
    gen.eval()
    disc.eval()
    return gen, disc, trace


def expected_generator_count(dim: int = 16, heads: int = 4, ff_dim: int = 128, layers: int = 2,
                             length: int = SEGMENT_LEN) -> int:
    embed = 2 * dim + dim
    tables = length * dim + dim
    attn = 4 * (dim * dim + dim)
    block = attn + 2 * (2 * dim) + (dim * ff_dim + ff_dim) + (ff_dim * dim + dim)
    smooth = dim * dim * 3 + dim
    return embed + tables + layers * block + smooth + (dim + 1)


def expected_discriminator_count(length: int = SEGMENT_LEN) -> int:
    return (1 * 64 * 3 + 64) + (64 * 128 * 3 + 128) + (128 * length + 1)

"""Convolutional denoising autoencoder: the first filtration pass and noise proxy."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autograd import (Adam, BatchNorm, Conv1d, Dropout, Module, Tensor, cc_loss, maxpool1d,
                       no_grad, relu, reshape, sigmoid, upsample1d)
from .errors import DivergenceError, InvalidDataset, NormalizationError, ShapeError
from .signal import SEGMENT_LEN, NormMode, Segment, SegmentKind, normalize

RANGE_TOL = 1e-6


class AutoencoderModel(Module):
    """Conv1D(32)-pool, Conv1D(64)-pool, Conv1D(128), then the mirror with upsampling.

    Every hidden convolution is followed by batch norm and ReLU; the head is a
    single-filter convolution with a sigmoid, so outputs live in (0, 1).
    """

    def __init__(self, seed: int = 0, dropout: float = 0.3, dtype=np.float32):
        super().__init__()
        rng = np.random.default_rng(seed)
        self.enc1, self.bn1 = Conv1d(1, 32, 3, rng, dtype), BatchNorm(32, dtype=dtype)
        self.enc2, self.bn2 = Conv1d(32, 64, 3, rng, dtype), BatchNorm(64, dtype=dtype)
        self.mid, self.bn3 = Conv1d(64, 128, 3, rng, dtype), BatchNorm(128, dtype=dtype)
        self.drop = Dropout(dropout, np.random.default_rng([seed, 1]))
        self.dec1, self.bn4 = Conv1d(128, 64, 3, rng, dtype), BatchNorm(64, dtype=dtype)
        self.dec2, self.bn5 = Conv1d(64, 32, 3, rng, dtype), BatchNorm(32, dtype=dtype)
        self.head = Conv1d(32, 1, 3, rng, dtype)

    def forward(self, x: Tensor) -> Tensor:
        """(B, 512) normalized input -> (B, 512) reconstruction."""
        if x.ndim != 2 or x.shape[1] % 4:
            raise ShapeError(f"autoencoder expects (batch, length) with length divisible by 4, got {x.shape}")
        h = reshape(x, (x.shape[0], 1, x.shape[1]))
        h = maxpool1d(relu(self.bn1(self.enc1(h))))
        h = maxpool1d(relu(self.bn2(self.enc2(h))))
        h = self.drop(relu(self.bn3(self.mid(h))))
        h = upsample1d(relu(self.bn4(self.dec1(h))))
        h = upsample1d(relu(self.bn5(self.dec2(h))))
        out = sigmoid(self.head(h))
        return reshape(out, (x.shape[0], x.shape[1]))


def _check_normalized(x: np.ndarray):
    if x.min() < -RANGE_TOL or x.max() > 1 + RANGE_TOL:
        raise NormalizationError(
            f"autoencoder input must be MinMax01-normalized, got range [{x.min():.4g}, {x.max():.4g}]")


def denoise_batch(model: AutoencoderModel, x: np.ndarray, batch: int = 64) -> np.ndarray:
    """Inference over an (N, 512) array of normalized segments."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    _check_normalized(x)
    dtype = model.enc1.kernel.dtype
    model.eval()
    outs = []
    with no_grad():
        for i in range(0, len(x), batch):
            outs.append(model(Tensor(x[i:i + batch].astype(dtype))).data)
    return np.concatenate(outs).astype(np.float64)


def ae_forward(model: AutoencoderModel, contaminated: Segment) -> Segment:
    out = denoise_batch(model, contaminated.samples[None])[0]
    return Segment(out, SegmentKind.DENOISED, f"{contaminated.id}/ae")


@dataclass
class TrainTrace:
    batch_loss: list[float] = field(default_factory=list)
    epoch_loss: list[float] = field(default_factory=list)


def _as_matrix(items) -> np.ndarray:
    return np.stack([s.samples if isinstance(s, Segment) else np.asarray(s, dtype=np.float64) for s in items])


def ae_train(model: AutoencoderModel, pairs, epochs: int = 10, batch: int = 20, lr: float = 1e-4,
             seed: int = 0) -> tuple[AutoencoderModel, TrainTrace]:
    """Minimize 1 - CC(output, clean), averaged per segment within each batch.

    ``pairs`` is a sequence of (contaminated, clean) segments or arrays; the
    contaminated side must already be MinMax01-normalized. Clean targets are
    normalized per segment (the objective is invariant to that affine map).
    """
    pairs = list(pairs)
    if len(pairs) < batch:
        raise InvalidDataset(f"need at least {batch} training pairs, got {len(pairs)}")
    x = _as_matrix([p[0] for p in pairs])
    _check_normalized(x)
    y = np.stack([normalize(c, NormMode.MINMAX01)[0] for c in _as_matrix([p[1] for p in pairs])])
    dtype = model.enc1.kernel.dtype
    x, y = x.astype(dtype), y.astype(dtype)

    rng = np.random.default_rng(seed)
    opt = Adam(model.parameters(), lr=lr)
    trace = TrainTrace()
    model.train()
    for _ in range(epochs):
        order = rng.permutation(len(x))
        losses = []
        for start in range(0, len(order), batch):
            idx = order[start:start + batch]
            if len(idx) < 2:
                continue  # batch norm needs two samples
            opt.zero_grad()
            loss = cc_loss(model(Tensor(x[idx])), y[idx])
            if not np.isfinite(loss.item()):
                raise DivergenceError(f"autoencoder loss became {loss.item()}")
            loss.backward()
            opt.step()
            losses.append(loss.item())
        trace.batch_loss.extend(losses)
        trace.epoch_loss.append(float(np.mean(losses)))
    model.eval()
    return model, trace


def expected_parameter_count() -> int:
    """Trainable parameters implied by the layer list (weights + biases + BN scale/shift)."""
    convs = [(1, 32), (32, 64), (64, 128), (128, 64), (64, 32), (32, 1)]
    total = sum(cout * cin * 3 + cout for cin, cout in convs)
    total += sum(2 * c for c in (32, 64, 128, 64, 32))
    return total

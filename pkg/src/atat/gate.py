"""LSTM-CNN classifier that picks which per-SNR denoiser handles a segment."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .autograd import (LSTM, Adam, BatchNorm, Conv2d, Dense, Dropout, Module, Tensor, concat, cross_entropy,
                       maxpool2d, no_grad, relu, reshape, softmax)
from .errors import DivergenceError, InvalidConfig, InvalidDataset, ShapeError
from .signal import SEGMENT_LEN, SNR_RANGE_DB, Segment

BLOCK = (32, 16)


@dataclass(frozen=True)
class SnrClassSet:
    levels: tuple[float, ...] = (-7.0, 2.0)

    def __post_init__(self):
        lv = tuple(float(v) for v in self.levels)
        object.__setattr__(self, "levels", lv)
        if not lv:
            raise InvalidConfig("at least one SNR level is required")
        if any(b <= a for a, b in zip(lv, lv[1:])):
            raise InvalidConfig(f"SNR levels must be strictly increasing, got {lv}")
        lo, hi = SNR_RANGE_DB
        if lv[0] < lo or lv[-1] > hi:
            raise InvalidConfig(f"SNR levels must lie in [{lo}, {hi}] dB, got {lv}")

    def __len__(self):
        return len(self.levels)

    def index(self, snr_db: float) -> int:
        for i, v in enumerate(self.levels):
            if v == float(snr_db):
                return i
        raise InvalidDataset(f"label {snr_db} dB is not in the class set {self.levels}")


class GateModel(Module):
    """Three pathways over a 512-sample segment viewed as 32 blocks of 16.

    cnn: conv2d(16) + ReLU + BN + maxpool + dropout on the 32x16 image.
    lstm: two stacked LSTMs over the 32 blocks, flattened.
    lstm-cnn-mlp: a second LSTM pair whose 32x32 output is convolved
    (conv2d(8), ReLU, maxpool) then squeezed through dense(64).
    The three feature vectors are concatenated into a two-layer classifier.
    """

    def __init__(self, classes: SnrClassSet = SnrClassSet(), seed: int = 0, hidden: int = 32,
                 cnn_filters: int = 16, mlp_filters: int = 8, dense: int = 64, dropout: float = 0.3,
                 dtype=np.float32):
        super().__init__()
        rng = np.random.default_rng([seed, 7])
        self.classes = classes
        rows, cols = BLOCK
        self.conv, self.bn = Conv2d(1, cnn_filters, 3, rng, dtype), BatchNorm(cnn_filters, dtype=dtype)
        self.drop = Dropout(dropout, np.random.default_rng([seed, 8]))
        self.lstm1, self.lstm2 = LSTM(cols, hidden, rng, dtype), LSTM(hidden, hidden, rng, dtype)
        self.mlp_lstm1, self.mlp_lstm2 = LSTM(cols, hidden, rng, dtype), LSTM(hidden, hidden, rng, dtype)
        self.mlp_conv = Conv2d(1, mlp_filters, 3, rng, dtype)
        self.mlp_dense = Dense(mlp_filters * (rows // 2) * (hidden // 2), dense, rng, dtype)
        n_feat = cnn_filters * (rows // 2) * (cols // 2) + rows * hidden + dense
        self.meta1 = Dense(n_feat, dense, rng, dtype)
        self.meta2 = Dense(dense, len(classes), rng, dtype)

    def logits(self, x: Tensor) -> Tensor:
        if x.ndim != 2 or x.shape[1] != SEGMENT_LEN:
            raise ShapeError(f"gate expects (batch, {SEGMENT_LEN}), got {x.shape}")
        B = x.shape[0]
        rows, cols = BLOCK
        img = reshape(x, (B, 1, rows, cols))
        seq = reshape(x, (B, rows, cols))
        a = self.drop(maxpool2d(self.bn(relu(self.conv(img)))))
        b = self.lstm2(self.lstm1(seq))
        c = self.mlp_lstm2(self.mlp_lstm1(seq))
        c = maxpool2d(relu(self.mlp_conv(reshape(c, (B, 1) + c.shape[1:]))))
        c = relu(self.mlp_dense(reshape(c, (B, -1))))
        h = concat([reshape(a, (B, -1)), reshape(b, (B, -1)), c], axis=1)
        return self.meta2(relu(self.meta1(h)))

    def forward(self, x: Tensor) -> Tensor:
        return softmax(self.logits(x), axis=-1)


@dataclass
class GateTrace:
    epoch_loss: list[float] = field(default_factory=list)
    epoch_accuracy: list[float] = field(default_factory=list)

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss", "accuracy"])
            for i, (l, a) in enumerate(zip(self.epoch_loss, self.epoch_accuracy)):
                w.writerow([i, repr(l), repr(a)])
        return path


def _samples(x) -> np.ndarray:
    return x.samples if isinstance(x, Segment) else np.asarray(x, dtype=np.float64)


def gate_train(model: GateModel, examples, epochs: int = 100, batch: int = 100, lr: float = 1e-3,
               seed: int = 0) -> tuple[GateModel, GateTrace]:
    """Cross-entropy training on (z-scored contaminated segment, snr_db) examples."""
    examples = list(examples)
    if len(examples) < batch:
        raise InvalidDataset(f"need at least {batch} labelled segments, got {len(examples)}")
    dtype = model.meta2.weight.dtype
    x = np.stack([_samples(e[0]) for e in examples]).astype(dtype)
    y = np.array([model.classes.index(e[1]) for e in examples])
    rng = np.random.default_rng([seed, 9])
    opt = Adam(model.parameters(), lr=lr)
    trace = GateTrace()
    model.train()
    for _ in range(epochs):
        order = rng.permutation(len(x))
        losses, hits = [], 0
        for start in range(0, len(order), batch):
            idx = order[start:start + batch]
            if len(idx) < 2:
                continue
            opt.zero_grad()
            logits = model.logits(Tensor(x[idx]))
            loss = cross_entropy(logits, y[idx])
            if not np.isfinite(loss.item()):
                raise DivergenceError(f"gate loss became {loss.item()}")
            loss.backward()
            opt.step()
            losses.append(loss.item() * len(idx))
            hits += int(np.sum(np.argmax(logits.data, axis=1) == y[idx]))
        trace.epoch_loss.append(float(np.sum(losses) / len(x)))
        trace.epoch_accuracy.append(hits / len(x))
    model.eval()
    return model, trace


def gate_probabilities(model: GateModel, x, batch: int = 100) -> np.ndarray:
    """(N, 512) z-scored segments -> (N, classes) probabilities in float64."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    dtype = model.meta2.weight.dtype
    model.eval()
    logits = []
    with no_grad():
        for i in range(0, len(x), batch):
            logits.append(model.logits(Tensor(x[i:i + batch].astype(dtype))).data.astype(np.float64))
    z = np.concatenate(logits)
    # float64 softmax so the simplex holds to 1e-9 even for float32 weights
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def choose_class(classes: SnrClassSet, probs: np.ndarray) -> float:
    # levels are increasing and argmax returns the first maximum: ties go to the lower SNR
    return classes.levels[int(np.argmax(probs))]


def gate_infer(model: GateModel, contaminated) -> tuple[float, np.ndarray]:
    x = _samples(contaminated)
    if x.shape != (SEGMENT_LEN,):
        raise ShapeError(f"gate expects {SEGMENT_LEN} samples, got {x.shape}")
    probs = gate_probabilities(model, x[None])[0]
    return choose_class(model.classes, probs), probs


def expected_gate_count(classes: int = 2, hidden: int = 32, cnn_filters: int = 16, mlp_filters: int = 8,
                        dense: int = 64) -> int:
    rows, cols = BLOCK
    lstm = lambda n_in: 4 * hidden * (n_in + hidden + 1)
    cnn = cnn_filters * 9 + cnn_filters + 2 * cnn_filters
    lstm_path = lstm(cols) + lstm(hidden)
    mlp_in = mlp_filters * (rows // 2) * (hidden // 2)
    mlp = lstm(cols) + lstm(hidden) + (mlp_filters * 9 + mlp_filters) + (mlp_in * dense + dense)
    n_feat = cnn_filters * (rows // 2) * (cols // 2) + rows * hidden + dense
    meta = n_feat * dense + dense + dense * classes + classes
    return cnn + lstm_path + mlp + meta

"""Parameter registry and the layers the three networks are built from."""

from __future__ import annotations

from collections import OrderedDict
from typing import Iterator

import numpy as np

from ..errors import ShapeError
from . import functional as F
from .tensor import Tensor, matmul, relu, reshape, softmax, swapaxes, transpose


class Parameter(Tensor):
    def __init__(self, data, name: str | None = None):
        super().__init__(np.array(data), requires_grad=True, name=name)


class Module:
    """Base class: attributes that are Parameters, Modules or lists of Modules are registered."""

    training = True

    def __init__(self):
        self._buffers: "OrderedDict[str, np.ndarray]" = OrderedDict()

    def register_buffer(self, name: str, value: np.ndarray):
        if "_buffers" not in self.__dict__:
            self._buffers = OrderedDict()
        self._buffers[name] = value

    def _children(self) -> Iterator[tuple[str, object]]:
        for key, val in self.__dict__.items():
            if key.startswith("_"):
                continue
            if isinstance(val, (Parameter, Module)):
                yield key, val
            elif isinstance(val, (list, tuple)) and val and all(isinstance(v, Module) for v in val):
                for i, v in enumerate(val):
                    yield f"{key}.{i}", v

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, val in self._children():
            name = f"{prefix}.{key}" if prefix else key
            if isinstance(val, Parameter):
                yield name, val
            else:
                yield from val.named_parameters(name)

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for key, val in self.__dict__.get("_buffers", {}).items():
            yield (f"{prefix}.{key}" if prefix else key), val
        for key, val in self._children():
            if isinstance(val, Module):
                yield from val.named_buffers(f"{prefix}.{key}" if prefix else key)

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return int(sum(p.size for p in self.parameters()))

    def num_buffers(self) -> int:
        return int(sum(b.size for _, b in self.named_buffers()))

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, val in self._children():
            if isinstance(val, Module):
                yield from val.modules()

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self, prefix: str = "") -> "OrderedDict[str, np.ndarray]":
        state = OrderedDict((n, p.data.copy()) for n, p in self.named_parameters(prefix))
        state.update((n, b.copy()) for n, b in self.named_buffers(prefix))
        return state

    def load_state_dict(self, state: dict, prefix: str = ""):
        targets = dict(self.named_parameters(prefix))
        buffers = dict(self.named_buffers(prefix))
        expected = set(targets) | set(buffers)
        missing = expected - set(state)
        if missing:
            raise KeyError(f"state is missing entries: {sorted(missing)[:5]}")
        for name, p in targets.items():
            val = np.asarray(state[name])
            if val.shape != p.shape:
                raise ShapeError(f"{name}: checkpoint shape {val.shape} != model shape {p.shape}")
            p.data = val.astype(p.dtype).copy()
        for name, b in buffers.items():
            val = np.asarray(state[name])
            if val.shape != b.shape:
                raise ShapeError(f"{name}: checkpoint shape {val.shape} != model shape {b.shape}")
            b[...] = val

    def astype(self, dtype) -> "Module":
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        for m in self.modules():
            for key, b in list(m.__dict__.get("_buffers", {}).items()):
                m._buffers[key] = b.astype(dtype)
        return self

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


def _uniform(rng: np.random.Generator, shape, limit: float, dtype) -> np.ndarray:
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def fan_in_limit(fan_in: int) -> float:
    # unit-variance preserving uniform: var = limit**2 / 3 = 1 / fan_in
    return float(np.sqrt(3.0 / fan_in))


class Dense(Module):
    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.weight = Parameter(_uniform(rng, (n_in, n_out), fan_in_limit(n_in), dtype))
        self.bias = Parameter(np.zeros(n_out, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return F.dense(x, self.weight, self.bias)


class Conv1d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.kernel = Parameter(_uniform(rng, (c_out, c_in, kernel), fan_in_limit(c_in * kernel), dtype))
        self.bias = Parameter(np.zeros(c_out, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return F.conv1d(x, self.kernel, self.bias)


class Conv2d(Module):
    def __init__(self, c_in: int, c_out: int, kernel: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        fan = c_in * kernel * kernel
        self.kernel = Parameter(_uniform(rng, (c_out, c_in, kernel, kernel), fan_in_limit(fan), dtype))
        self.bias = Parameter(np.zeros(c_out, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.kernel, self.bias)


class BatchNorm(Module):
    """Channel-wise batch norm (axis 1). Running statistics are non-trainable buffers."""

    def __init__(self, channels: int, momentum: float = 0.9, eps: float = 1e-5, dtype=np.float32):
        super().__init__()
        self.gamma = Parameter(np.ones(channels, dtype=dtype))
        self.beta = Parameter(np.zeros(channels, dtype=dtype))
        self.register_buffer("running_mean", np.zeros(channels, dtype=dtype))
        self.register_buffer("running_var", np.ones(channels, dtype=dtype))
        self.momentum = momentum
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return F.batchnorm(x, self.gamma, self.beta, self._buffers["running_mean"],
                           self._buffers["running_var"], self.training, self.momentum, self.eps)


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5, dtype=np.float32):
        super().__init__()
        self.gamma = Parameter(np.ones(dim, dtype=dtype))
        self.beta = Parameter(np.zeros(dim, dtype=dtype))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gamma, self.beta, self.eps)


class Dropout(Module):
    def __init__(self, rate: float, rng: np.random.Generator):
        super().__init__()
        self.rate = rate
        self._rng = rng

    def forward(self, x: Tensor) -> Tensor:
        return F.dropout(x, self.rate, self._rng, self.training)


class LSTM(Module):
    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        lim = 1.0 / np.sqrt(hidden)
        self.hidden = hidden
        self.w_input = Parameter(_uniform(rng, (n_in, 4 * hidden), lim, dtype))
        self.w_hidden = Parameter(_uniform(rng, (hidden, 4 * hidden), lim, dtype))
        b = np.zeros(4 * hidden, dtype=dtype)
        b[hidden:2 * hidden] = 1.0  # forget-gate bias
        self.bias = Parameter(b)

    def forward(self, x: Tensor, return_sequence: bool = True) -> Tensor:
        seq = F.lstm(x, self.w_input, self.w_hidden, self.bias)
        return seq if return_sequence else seq[:, -1]


class MultiHeadSelfAttention(Module):
    """Scaled dot-product self-attention over (B, L, D) with ``heads`` heads."""

    def __init__(self, dim: int, heads: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        if dim % heads:
            raise ShapeError(f"model width {dim} not divisible by {heads} heads")
        self.dim, self.heads = dim, heads
        self.query = Dense(dim, dim, rng, dtype)
        self.key = Dense(dim, dim, rng, dtype)
        self.value = Dense(dim, dim, rng, dtype)
        self.out = Dense(dim, dim, rng, dtype)
        self.last_weights: np.ndarray | None = None

    def _split(self, x: Tensor) -> Tensor:
        B, L, _ = x.shape
        return transpose(reshape(x, (B, L, self.heads, self.dim // self.heads)), (0, 2, 1, 3))

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[-1] != self.dim:
            raise ShapeError(f"attention expects (B, L, {self.dim}), got {x.shape}")
        B, L, _ = x.shape
        # scale q rather than the (L, L) score map: same result, one less full-size pass
        q = self._split(self.query(x)) * (1.0 / np.sqrt(self.dim // self.heads))
        k, v = self._split(self.key(x)), self._split(self.value(x))
        scores = matmul(q, swapaxes(k, -1, -2))
        weights = softmax(scores, axis=-1)
        self.last_weights = weights.data
        ctx = transpose(matmul(weights, v), (0, 2, 1, 3))
        return self.out(reshape(ctx, (B, L, self.dim)))


class TransformerEncoderLayer(Module):
    """Post-norm encoder block: LN(x + MHA(x)), then LN(h + FF(h))."""

    def __init__(self, dim: int, heads: int, ff_dim: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.attn = MultiHeadSelfAttention(dim, heads, rng, dtype)
        self.norm1 = LayerNorm(dim, dtype=dtype)
        self.ff1 = Dense(dim, ff_dim, rng, dtype)
        self.ff2 = Dense(ff_dim, dim, rng, dtype)
        self.norm2 = LayerNorm(dim, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        h = self.norm1(x + self.attn(x))
        return self.norm2(h + self.ff2(relu(self.ff1(h))))


"""Layer primitives with hand-written backward passes.

Layouts: 1-D convolutions take (batch, channels, length); 2-D convolutions
take (batch, channels, height, width); sequence ops (LSTM, attention,
layer norm) take (batch, time, features).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DegenerateSegment, InvalidBatch, ShapeError
from .tensor import Tensor, as_tensor, clip, log, log_softmax, make, mean, sqrt, tsum


def dense(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map over the last axis; ``weight`` is (in, out)."""
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"dense: input features {x.shape[-1]} != weight rows {weight.shape[0]}")
    out = x @ weight
    return out if bias is None else out + bias


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Stride-1 convolution (cross-correlation) with zero 'same' padding.

    x: (B, C_in, L); weight: (C_out, C_in, K) with K odd; bias: (C_out,).
    """
    if x.ndim != 3 or weight.ndim != 3:
        raise ShapeError(f"conv1d expects 3-D input and kernel, got {x.shape} and {weight.shape}")
    B, C, L = x.shape
    O, Ck, K = weight.shape
    if Ck != C:
        raise ShapeError(f"conv1d: input has {C} channels, kernel expects {Ck}")
    if K % 2 == 0:
        raise ShapeError("conv1d: kernel size must be odd for same padding")
    p = K // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (p, p)))
    cols = sliding_window_view(xp, K, axis=2).transpose(0, 1, 3, 2).reshape(B, C * K, L)
    w2 = weight.data.reshape(O, C * K)
    out = np.matmul(w2, cols)
    if bias is not None:
        out = out + bias.data[:, None]

    def backward(g):
        gx = gw = gb = None
        if x.requires_grad:
            gcols = np.matmul(w2.T, g).reshape(B, C, K, L)
            gxp = np.zeros_like(xp)
            for k in range(K):
                gxp[:, :, k:k + L] += gcols[:, :, k, :]
            gx = gxp[:, :, p:p + L]
        if weight.requires_grad:
            gw = np.tensordot(g, cols, axes=([0, 2], [0, 2])).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2))
        return (gx, gw, gb) if bias is not None else (gx, gw)

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return make(out, parents, backward)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Stride-1 2-D convolution with zero 'same' padding.

    x: (B, C_in, H, W); weight: (C_out, C_in, KH, KW), both kernel sides odd.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d expects 4-D input and kernel, got {x.shape} and {weight.shape}")
    B, C, H, W = x.shape
    O, Ck, KH, KW = weight.shape
    if Ck != C:
        raise ShapeError(f"conv2d: input has {C} channels, kernel expects {Ck}")
    if KH % 2 == 0 or KW % 2 == 0:
        raise ShapeError("conv2d: kernel sides must be odd for same padding")
    ph, pw = KH // 2, KW // 2
    xp = np.pad(x.data, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    win = sliding_window_view(xp, (KH, KW), axis=(2, 3))  # B, C, H, W, KH, KW
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(B, C * KH * KW, H * W)
    w2 = weight.data.reshape(O, -1)
    out = np.matmul(w2, cols).reshape(B, O, H, W)
    if bias is not None:
        out = out + bias.data[:, None, None]

    def backward(g):
        g2 = g.reshape(B, O, H * W)
        gx = gw = gb = None
        if x.requires_grad:
            gcols = np.matmul(w2.T, g2).reshape(B, C, KH, KW, H, W)
            gxp = np.zeros_like(xp)
            for i in range(KH):
                for j in range(KW):
                    gxp[:, :, i:i + H, j:j + W] += gcols[:, :, i, j]
            gx = gxp[:, :, ph:ph + H, pw:pw + W]
        if weight.requires_grad:
            gw = np.tensordot(g2, cols, axes=([0, 2], [0, 2])).reshape(weight.shape)
        if bias is not None and bias.requires_grad:
            gb = g.sum(axis=(0, 2, 3))
        return (gx, gw, gb) if bias is not None else (gx, gw)

    parents = (x, weight, bias) if bias is not None else (x, weight)
    return make(out, parents, backward)


def maxpool1d(x: Tensor, factor: int = 2) -> Tensor:
    """Non-overlapping max pooling over the last axis; ties route to the first index."""
    *lead, L = x.shape
    if L % factor:
        raise ShapeError(f"maxpool1d: length {L} not divisible by {factor}")
    xr = x.data.reshape(*lead, L // factor, factor)
    idx = xr.argmax(axis=-1)[..., None]
    out = np.take_along_axis(xr, idx, axis=-1)[..., 0]

    def backward(g):
        full = np.zeros_like(xr)
        np.put_along_axis(full, idx, g[..., None], axis=-1)
        return (full.reshape(x.shape),)

    return make(out, (x,), backward)


def maxpool2d(x: Tensor, factor: int = 2) -> Tensor:
    B, C, H, W = x.shape
    if H % factor or W % factor:
        raise ShapeError(f"maxpool2d: {H}x{W} not divisible by {factor}")
    f = factor
    xr = x.data.reshape(B, C, H // f, f, W // f, f).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, H // f, W // f, f * f)
    idx = xr.argmax(axis=-1)[..., None]
    out = np.take_along_axis(xr, idx, axis=-1)[..., 0]

    def backward(g):
        full = np.zeros_like(xr)
        np.put_along_axis(full, idx, g[..., None], axis=-1)
        full = full.reshape(B, C, H // f, W // f, f, f).transpose(0, 1, 2, 4, 3, 5)
        return (full.reshape(x.shape),)

    return make(out, (x,), backward)


def upsample1d(x: Tensor, factor: int = 2) -> Tensor:
    """Nearest-neighbour upsampling over the last axis."""
    out = np.repeat(x.data, factor, axis=-1)
    return make(out, (x,), lambda g: (g.reshape(*x.shape, factor).sum(axis=-1),))


def batchnorm(x: Tensor, gamma: Tensor, beta: Tensor, running_mean: np.ndarray,
              running_var: np.ndarray, training: bool, momentum: float = 0.9,
              eps: float = 1e-5) -> Tensor:
    """Batch normalization over every axis except axis 1 (channels).

    In training mode the batch statistics are used and the running
    statistics (modified in place) follow an exponential moving average:
    ``running = momentum * running + (1 - momentum) * batch``.
    """
    axes = (0,) + tuple(range(2, x.ndim))
    shape = [1] * x.ndim
    shape[1] = x.shape[1]
    if training:
        if x.shape[0] < 2:
            raise InvalidBatch("batchnorm in training mode needs a batch of at least 2")
        n = x.size // x.shape[1]
        mu = x.data.mean(axis=axes)
        var = x.data.var(axis=axes)
        running_mean *= momentum
        running_mean += (1 - momentum) * mu
        running_var *= momentum
        running_var += (1 - momentum) * var * (n / max(n - 1, 1))
    else:
        mu, var = running_mean, running_var
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu.reshape(shape)) * inv.reshape(shape)
    out = xhat * gamma.data.reshape(shape) + beta.data.reshape(shape)

    def backward(g):
        gg = (g * xhat).sum(axis=axes)
        gbeta = g.sum(axis=axes)
        gxhat = g * gamma.data.reshape(shape)
        if training:
            m = x.size // x.shape[1]
            gx = (inv.reshape(shape) / m) * (
                m * gxhat
                - gxhat.sum(axis=axes).reshape(shape)
                - xhat * (gxhat * xhat).sum(axis=axes).reshape(shape)
            )
        else:
            gx = gxhat * inv.reshape(shape)
        return gx, gg, gbeta

    return make(out.astype(x.dtype, copy=False), (x, gamma, beta), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each row over the last axis, then scale and shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out = xhat * gamma.data + beta.data
    red = tuple(range(x.ndim - 1))

    def backward(g):
        d = x.shape[-1]
        gxhat = g * gamma.data
        gx = (inv / d) * (d * gxhat - gxhat.sum(-1, keepdims=True) - xhat * (gxhat * xhat).sum(-1, keepdims=True))
        return gx, (g * xhat).sum(axis=red), g.sum(axis=red)

    return make(out, (x, gamma, beta), backward)


def dropout(x: Tensor, rate: float, rng: np.random.Generator, training: bool) -> Tensor:
    """Inverted dropout: kept units are scaled by 1/(1-rate) so E[out] == x."""
    if not training or rate <= 0:
        return x
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return make(x.data * keep, (x,), lambda g: (g * keep,))


def _sig(z):
    return 0.5 * (np.tanh(0.5 * z) + 1.0)


def lstm(x: Tensor, w_input: Tensor, w_hidden: Tensor, bias: Tensor) -> Tensor:
    """Single LSTM layer from a zero initial state, returning every hidden state.

    x: (B, T, F); w_input: (F, 4H); w_hidden: (H, 4H); bias: (4H,).
    Gate blocks along the 4H axis are ordered input, forget, cell, output.
    """
    B, T, F = x.shape
    if w_input.shape[0] != F or w_input.shape[1] % 4:
        raise ShapeError(f"lstm: input weight {w_input.shape} incompatible with {F} features")
    H = w_input.shape[1] // 4
    if w_hidden.shape != (H, 4 * H) or bias.shape != (4 * H,):
        raise ShapeError(f"lstm: hidden weight {w_hidden.shape} / bias {bias.shape} do not match H={H}")
    dt = x.dtype
    zx = (x.data.reshape(B * T, F) @ w_input.data + bias.data).reshape(B, T, 4 * H)
    hs = np.zeros((B, T + 1, H), dtype=dt)
    cs = np.zeros((B, T + 1, H), dtype=dt)
    gates = np.empty((B, T, 4 * H), dtype=dt)
    for t in range(T):
        z = zx[:, t] + hs[:, t] @ w_hidden.data
        i = _sig(z[:, :H])
        f = _sig(z[:, H:2 * H])
        c_hat = np.tanh(z[:, 2 * H:3 * H])
        o = _sig(z[:, 3 * H:])
        cs[:, t + 1] = f * cs[:, t] + i * c_hat
        hs[:, t + 1] = o * np.tanh(cs[:, t + 1])
        gates[:, t] = np.concatenate([i, f, c_hat, o], axis=1)

    def backward(g):
        dz_all = np.empty_like(gates)
        dh_next = np.zeros((B, H), dtype=dt)
        dc_next = np.zeros((B, H), dtype=dt)
        gwh = np.zeros_like(w_hidden.data)
        for t in reversed(range(T)):
            i, f, c_hat, o = (gates[:, t, k * H:(k + 1) * H] for k in range(4))
            tc = np.tanh(cs[:, t + 1])
            dh = g[:, t] + dh_next
            dc = dh * o * (1.0 - tc * tc) + dc_next
            dz = np.concatenate([
                dc * c_hat * i * (1.0 - i),
                dc * cs[:, t] * f * (1.0 - f),
                dc * i * (1.0 - c_hat * c_hat),
                dh * tc * o * (1.0 - o),
            ], axis=1)
            dz_all[:, t] = dz
            gwh += hs[:, t].T @ dz
            dh_next = dz @ w_hidden.data.T
            dc_next = dc * f
        flat = dz_all.reshape(B * T, 4 * H)
        gx = (flat @ w_input.data.T).reshape(B, T, F) if x.requires_grad else None
        gwi = x.data.reshape(B * T, F).T @ flat
        return gx, gwi, gwh, flat.sum(axis=0)

    return make(hs[:, 1:].copy(), (x, w_input, w_hidden, bias), backward)


# -- losses --------------------------------------------------------------------
BCE_CLAMP = 1e-7


def bce(pred: Tensor, target) -> Tensor:
    """Mean binary cross-entropy with predictions clamped to [1e-7, 1 - 1e-7]."""
    t = as_tensor(target, pred)
    p = clip(pred, BCE_CLAMP, 1.0 - BCE_CLAMP)
    return -mean(t * log(p) + (1.0 - t) * log(1.0 - p))


def pearson_rows(pred: Tensor, target, eps: float = 0.0) -> Tensor:
    """Pearson correlation along the last axis, one value per row.

    With ``eps > 0`` the denominator becomes sqrt(ss_pred * ss_target + eps),
    so a constant prediction row scores 0 instead of raising; training loops
    use this, metrics keep the strict form.
    """
    t = as_tensor(target, pred)
    checks = (("target", t.data),) if eps > 0 else (("prediction", pred.data), ("target", t.data))
    for name, arr in checks:
        if np.any(arr.std(axis=-1) == 0):
            raise DegenerateSegment(f"correlation of a constant {name} row is undefined")
    pc = pred - mean(pred, axis=-1, keepdims=True)
    tc = t - mean(t, axis=-1, keepdims=True)
    num = tsum(pc * tc, axis=-1)
    prod = tsum(pc * pc, axis=-1) * tsum(tc * tc, axis=-1)
    den = sqrt(prod + eps) if eps > 0 else sqrt(prod)
    return num / den


def cc_loss(pred: Tensor, target, eps: float = 0.0) -> Tensor:
    """1 - Pearson CC, computed per row then averaged over rows."""
    return 1.0 - mean(pearson_rows(pred, target, eps))


def cross_entropy(logits: Tensor, labels) -> Tensor:
    labels = np.asarray(labels, dtype=int)
    lp = log_softmax(logits, axis=-1)
    picked = lp[np.arange(len(labels)), labels]
    return -mean(picked)


def standardize(x: Tensor, eps: float = 1e-8) -> Tensor:
    """Differentiable per-row z-score over the last axis."""
    xc = x - mean(x, axis=-1, keepdims=True)
    sd = sqrt(mean(xc * xc, axis=-1, keepdims=True) + eps)
    return xc / sd

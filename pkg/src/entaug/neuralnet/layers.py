"""Differentiable layers: convolutions, normalization, fully connected.

Convolution is cross-correlation with reflect padding, evaluated as an
im2col gather followed by a matmul. The transposed convolution is the
exact adjoint of conv2d's linear map (same weights, same stride, same
reflect padding), so its forward pass reuses conv2d's input-backward
routine and doubles spatial dims at stride 2 with kernel 2p + 2.
"""

from __future__ import annotations

import numpy as np

from .tensor import (
    Tensor,
    reflect_fold_hw_array,
    reflect_pad_hw_array,
)

_INDEX_CACHE: dict = {}


def _col_indices(c: int, hp: int, wp: int, kh: int, kw: int, stride: int):
    key = (c, hp, wp, kh, kw, stride)
    hit = _INDEX_CACHE.get(key)
    if hit is not None:
        return hit
    oh = (hp - kh) // stride + 1
    ow = (wp - kw) // stride + 1
    k = np.repeat(np.arange(c), kh * kw).reshape(-1, 1)
    i0 = np.tile(np.repeat(np.arange(kh), kw), c).reshape(-1, 1)
    j0 = np.tile(np.tile(np.arange(kw), kh), c).reshape(-1, 1)
    i1 = (stride * np.repeat(np.arange(oh), ow)).reshape(1, -1)
    j1 = (stride * np.tile(np.arange(ow), oh)).reshape(1, -1)
    out = (k, i0 + i1, j0 + j1, oh, ow)
    _INDEX_CACHE[key] = out
    return out


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int):
    n, c, hp, wp = xp.shape
    v = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    v = v[:, :, ::stride, ::stride]
    oh, ow = v.shape[2], v.shape[3]
    cols = np.ascontiguousarray(v.transpose(0, 1, 4, 5, 2, 3)).reshape(n, c * kh * kw, oh * ow)
    return cols, oh, ow


def _col2im(dcols: np.ndarray, xp_shape, kh: int, kw: int, stride: int) -> np.ndarray:
    n, c, hp, wp = xp_shape
    k, i, j = _col_indices(c, hp, wp, kh, kw, stride)[:3]
    out = np.zeros(xp_shape, dtype=dcols.dtype)
    np.add.at(out, (np.arange(n)[:, None, None], k, i, j), dcols)
    return out


def _conv_core_forward(x: np.ndarray, w: np.ndarray, stride: int, padding: int):
    """Returns (out, cols, padded_shape); out has no bias."""
    o, c, kh, kw = w.shape
    xp = reflect_pad_hw_array(x, padding)
    cols, oh, ow = _im2col(xp, kh, kw, stride)
    out = np.matmul(w.reshape(o, c * kh * kw), cols)  # (n, o, oh*ow)
    return out.reshape(x.shape[0], o, oh, ow), cols, xp.shape


def _conv_core_backward_input(
    g_out: np.ndarray, w: np.ndarray, x_shape, stride: int, padding: int
) -> np.ndarray:
    """Adjoint of _conv_core_forward in its input argument."""
    n, c, h, wdt = x_shape
    o, _, kh, kw = w.shape
    g_flat = g_out.reshape(n, o, -1)
    dcols = np.matmul(w.reshape(o, -1).T, g_flat)
    hp, wp = h + 2 * padding, wdt + 2 * padding
    dxp = _col2im(dcols, (n, c, hp, wp), kh, kw, stride)
    return reflect_fold_hw_array(dxp, h, wdt, padding)


def _conv_core_backward_weight(g_out: np.ndarray, cols: np.ndarray, w_shape) -> np.ndarray:
    o = w_shape[0]
    g_flat = g_out.reshape(g_out.shape[0], o, -1)
    dw = np.matmul(g_flat, cols.transpose(0, 2, 1)).sum(axis=0)
    return dw.reshape(w_shape)


def conv2d(x: Tensor, w: Tensor, b: Tensor | None, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlation over NCHW input with reflect padding.

    x: (N,C,H,W), w: (O,C,kh,kw), b: (O,) or None.
    """
    if x.data.ndim != 4 or w.data.ndim != 4:
        raise ValueError(f"conv2d expects 4-d input/weight, got {x.shape} / {w.shape}")
    if x.data.shape[1] != w.data.shape[1]:
        raise ValueError(f"channel mismatch: input {x.shape} vs weight {w.shape}")
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    out_data, cols, _ = _conv_core_forward(x.data, w.data, stride, padding)
    if b is not None:
        out_data = out_data + b.data[None, :, None, None]
    parents = (x, w, b) if b is not None else (x, w)
    out = Tensor(out_data, parents=parents)

    def bw(g):
        if x.requires_grad:
            x.accumulate_grad(_conv_core_backward_input(g, w.data, x.data.shape, stride, padding))
        if w.requires_grad:
            w.accumulate_grad(_conv_core_backward_weight(g, cols, w.data.shape))
        if b is not None and b.requires_grad:
            b.accumulate_grad(g.sum(axis=(0, 2, 3)))

    out._backward = bw
    return out


def conv_transpose2d(x: Tensor, w: Tensor, b: Tensor | None, stride: int = 2, padding: int = 1) -> Tensor:
    """Adjoint of conv2d with the same weights/stride/padding.

    x: (N,O,h,w), w: (O,C,kh,kw), output: (N,C,H,W) with
    H = (h-1)*stride + kh - 2*padding. With kh = 2*padding + 2 and
    stride 2 the spatial dims double exactly.
    """
    n, o, h, wdt = x.data.shape
    if w.data.shape[0] != o:
        raise ValueError(f"channel mismatch: input {x.shape} vs weight {w.shape}")
    _, c, kh, kw = w.data.shape
    out_h = (h - 1) * stride + kh - 2 * padding
    out_w = (wdt - 1) * stride + kw - 2 * padding
    out_shape = (n, c, out_h, out_w)
    out_data = _conv_core_backward_input(x.data, w.data, out_shape, stride, padding)
    if b is not None:
        out_data = out_data + b.data[None, :, None, None]
    parents = (x, w, b) if b is not None else (x, w)
    out = Tensor(out_data, parents=parents)

    def bw(g):
        if x.requires_grad:
            gx, _, _ = _conv_core_forward(g, w.data, stride, padding)
            x.accumulate_grad(gx)
        if w.requires_grad:
            cols_g, _, _ = _im2col(reflect_pad_hw_array(g, padding), kh, kw, stride)
            w.accumulate_grad(_conv_core_backward_weight(x.data, cols_g, w.data.shape))
        if b is not None and b.requires_grad:
            b.accumulate_grad(g.sum(axis=(0, 2, 3)))

    out._backward = bw
    return out


def instance_norm(x: Tensor, eps: float = 1e-5) -> Tensor:
    """Zero mean, unit std per (sample, channel) over the spatial axes."""
    mu = x.data.mean(axis=(2, 3), keepdims=True)
    var = ((x.data - mu) ** 2).mean(axis=(2, 3), keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = (x.data - mu) * inv
    out = Tensor(y, parents=(x,))

    def bw(g):
        gm = g.mean(axis=(2, 3), keepdims=True)
        gym = (g * y).mean(axis=(2, 3), keepdims=True)
        x.accumulate_grad(inv * (g - gm - y * gym))

    out._backward = bw
    return out


def adain(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Adaptive instance normalization: gamma * instance_norm(x) + beta.

    gamma/beta: (N, C), broadcast over the spatial axes.
    """
    n, c = x.data.shape[:2]
    g4 = gamma.reshape(n, c, 1, 1)
    b4 = beta.reshape(n, c, 1, 1)
    return g4 * instance_norm(x, eps=eps) + b4


def linear(x: Tensor, w: Tensor, b: Tensor | None) -> Tensor:
    """Affine map: x (N,K) @ w (K,M) + b (M,)."""
    if x.data.shape[-1] != w.data.shape[0]:
        raise ValueError(f"inner dims disagree: {x.shape} @ {w.shape}")
    out = x @ w
    if b is not None:
        out = out + b
    return out


def he_normal(rng: np.random.Generator, shape, fan_in: int, dtype=np.float32) -> np.ndarray:
    """Zero-mean Gaussian with std sqrt(2/fan_in)."""
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)

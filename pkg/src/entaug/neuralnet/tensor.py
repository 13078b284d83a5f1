"""Reverse-mode automatic differentiation over numpy arrays.

A Tensor wraps an ndarray plus an optional gradient buffer. Ops build a
graph of parent links and backward closures; Tensor.backward() runs the
closures in reverse topological order. The op set is exactly what the
translation network needs, nothing more.

Dtype follows the inputs (float32 for training, float64 for gradient
verification). Python scalars never promote the dtype.
"""

from __future__ import annotations

import numpy as np

Scalar = (int, float)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum-reduce a gradient back to `shape` (adjoint of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None, name=None):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad) or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward
        self.name = name

    # -- bookkeeping ----------------------------------------------------

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def accumulate_grad(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError(f"backward() needs a scalar output, got shape {self.shape}")
        topo: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen and p.requires_grad:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    def __repr__(self):
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}, grad={self.requires_grad}{tag})"

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Scalar):
            out = Tensor(self.data + other, parents=(self,))
            out._backward = lambda g: self.accumulate_grad(g)
            return out
        out = Tensor(self.data + other.data, parents=(self, other))

        def bw(g):
            self.accumulate_grad(_unbroadcast(g, self.shape))
            other.accumulate_grad(_unbroadcast(g, other.shape))

        out._backward = bw
        return out

    __radd__ = __add__

    def __neg__(self):
        out = Tensor(-self.data, parents=(self,))
        out._backward = lambda g: self.accumulate_grad(-g)
        return out

    def __sub__(self, other):
        if isinstance(other, Scalar):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Scalar):
            out = Tensor(self.data * other, parents=(self,))
            out._backward = lambda g: self.accumulate_grad(g * other)
            return out
        out = Tensor(self.data * other.data, parents=(self, other))

        def bw(g):
            self.accumulate_grad(_unbroadcast(g * other.data, self.shape))
            other.accumulate_grad(_unbroadcast(g * self.data, other.shape))

        out._backward = bw
        return out

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Scalar):
            return self * (1.0 / other)
        out = Tensor(self.data / other.data, parents=(self, other))

        def bw(g):
            self.accumulate_grad(_unbroadcast(g / other.data, self.shape))
            other.accumulate_grad(
                _unbroadcast(-g * self.data / (other.data * other.data), other.shape)
            )

        out._backward = bw
        return out

    def __matmul__(self, other):
        out = Tensor(self.data @ other.data, parents=(self, other))

        def bw(g):
            self.accumulate_grad(g @ other.data.T)
            other.accumulate_grad(self.data.T @ g)

        out._backward = bw
        return out

    # -- reductions and shaping -----------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out = Tensor(self.data.sum(axis=axis, keepdims=keepdims), parents=(self,))

        def bw(g):
            if axis is None:
                self.accumulate_grad(np.broadcast_to(g, self.shape))
            else:
                ge = g if keepdims else np.expand_dims(g, axis)
                self.accumulate_grad(np.broadcast_to(ge, self.shape))

        out._backward = bw
        return out

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        if axis is None:
            denom = self.data.size
        else:
            axes = axis if isinstance(axis, tuple) else (axis,)
            denom = 1
            for a in axes:
                denom *= self.data.shape[a]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / denom)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        out = Tensor(self.data.reshape(shape), parents=(self,))
        out._backward = lambda g: self.accumulate_grad(g.reshape(self.shape))
        return out


def tensor(data, requires_grad: bool = False, dtype=None, name=None) -> Tensor:
    arr = np.array(data, dtype=dtype) if dtype is not None else np.asarray(data, dtype=np.float64)
    return Tensor(arr, requires_grad=requires_grad, name=name)


# -- elementwise functions ------------------------------------------------


def absolute(x: Tensor) -> Tensor:
    out = Tensor(np.abs(x.data), parents=(x,))
    # subgradient 0 at exactly 0
    out._backward = lambda g: x.accumulate_grad(g * np.sign(x.data))
    return out


def tanh(x: Tensor) -> Tensor:
    y = np.tanh(x.data)
    out = Tensor(y, parents=(x,))
    out._backward = lambda g: x.accumulate_grad(g * (1.0 - y * y))
    return out


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, 0.0).astype(x.data.dtype, copy=False), parents=(x,))
    out._backward = lambda g: x.accumulate_grad(g * mask)
    return out


def lrelu(x: Tensor, alpha: float = 0.2) -> Tensor:
    mask = x.data > 0
    out = Tensor(np.where(mask, x.data, alpha * x.data).astype(x.data.dtype, copy=False), parents=(x,))
    out._backward = lambda g: x.accumulate_grad(g * np.where(mask, 1.0, alpha))
    return out


def sqrt_safe(x: Tensor) -> Tensor:
    """Exact sqrt value; subgradient 0 at x == 0 so constants stay finite."""
    y = np.sqrt(np.maximum(x.data, 0.0))
    out = Tensor(y, parents=(x,))

    def bw(g):
        d = np.zeros_like(y)
        np.divide(0.5, y, out=d, where=y > 0)
        x.accumulate_grad(g * d)

    out._backward = bw
    return out


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    inside = (x.data > lo) & (x.data < hi)
    out = Tensor(np.clip(x.data, lo, hi), parents=(x,))
    out._backward = lambda g: x.accumulate_grad(g * inside)
    return out


def safe_div(num: Tensor, den: Tensor) -> Tensor:
    """num/den where den > 0 else 0, with matching zero gradients."""
    ok = den.data > 0
    val = np.zeros_like(num.data)
    np.divide(num.data, den.data, out=val, where=ok)
    out = Tensor(val, parents=(num, den))

    def bw(g):
        inv = np.zeros_like(den.data)
        np.divide(1.0, den.data, out=inv, where=ok)
        num.accumulate_grad(_unbroadcast(g * inv, num.shape))
        den.accumulate_grad(_unbroadcast(-g * val * inv, den.shape))

    out._backward = bw
    return out


# -- channel ops over NCHW maps -------------------------------------------


def channel_select(x: Tensor, index: int) -> Tensor:
    out = Tensor(np.ascontiguousarray(x.data[:, index]), parents=(x,))

    def bw(g):
        gx = np.zeros_like(x.data)
        gx[:, index] = g
        x.accumulate_grad(gx)

    out._backward = bw
    return out


def _channel_arg_reduce(x: Tensor, arg_fn, val_fn) -> Tensor:
    idx = arg_fn(x.data, axis=1)  # first occurrence wins ties
    out = Tensor(val_fn(x.data, axis=1), parents=(x,))

    def bw(g):
        gx = np.zeros_like(x.data)
        onehot = idx[:, None] == np.arange(x.data.shape[1])[None, :, None, None]
        gx += g[:, None] * onehot
        x.accumulate_grad(gx)

    out._backward = bw
    return out


def channel_max(x: Tensor) -> Tensor:
    """Max over the channel axis; ties resolve to the lowest channel index."""
    return _channel_arg_reduce(x, np.argmax, np.max)


def channel_min(x: Tensor) -> Tensor:
    """Min over the channel axis; ties resolve to the lowest channel index."""
    return _channel_arg_reduce(x, np.argmin, np.min)


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    """Columns [start, stop) of a rank-2 tensor."""
    out = Tensor(np.ascontiguousarray(x.data[:, start:stop]), parents=(x,))

    def bw(g):
        gx = np.zeros_like(x.data)
        gx[:, start:stop] = g
        x.accumulate_grad(gx)

    out._backward = bw
    return out


def stack_scalars(parts: list[Tensor]) -> Tensor:
    """Stack scalar tensors into one rank-1 tensor."""
    out = Tensor(np.array([p.data.reshape(()) for p in parts]), parents=tuple(parts))

    def bw(g):
        for i, p in enumerate(parts):
            p.accumulate_grad(np.asarray(g[i]).reshape(p.shape))

    out._backward = bw
    return out


# -- reflect padding over the spatial axes of NCHW ------------------------


def reflect_index(n: int, p: int) -> np.ndarray:
    """Source index per padded position for mirror padding without the edge."""
    if p > n - 1:
        raise ValueError(f"reflect padding {p} too large for size {n}")
    idx = np.empty(n + 2 * p, dtype=np.intp)
    idx[p : p + n] = np.arange(n)
    idx[:p] = np.arange(p, 0, -1)
    idx[p + n :] = np.arange(n - 2, n - 2 - p, -1)
    return idx


def _scatter_add_axis(g: np.ndarray, idx: np.ndarray, n: int, axis: int) -> np.ndarray:
    """Adjoint of a take() along one axis: out[idx[i]] += g[i]."""
    shape = list(g.shape)
    shape[axis] = n
    out = np.zeros(shape, dtype=g.dtype)
    np.add.at(np.moveaxis(out, axis, 0), idx, np.moveaxis(g, axis, 0))
    return out


def _fold_axis(g: np.ndarray, n: int, p: int, axis: int) -> np.ndarray:
    if p == 0:
        return g
    return _scatter_add_axis(g, reflect_index(n, p), n, axis)


def reflect_pad_hw_array(x: np.ndarray, p: int) -> np.ndarray:
    if p == 0:
        return x
    ih = reflect_index(x.shape[2], p)
    iw = reflect_index(x.shape[3], p)
    return np.ascontiguousarray(x[:, :, ih][:, :, :, iw])


def reflect_fold_hw_array(g: np.ndarray, h: int, w: int, p: int) -> np.ndarray:
    return _fold_axis(_fold_axis(g, w, p, axis=3), h, p, axis=2)


def reflect_pad_hw(x: Tensor, p: int) -> Tensor:
    out = Tensor(reflect_pad_hw_array(x.data, p), parents=(x,))
    h, w = x.data.shape[2], x.data.shape[3]
    out._backward = lambda g: x.accumulate_grad(reflect_fold_hw_array(g, h, w, p))
    return out


def tail_even_index(n: int) -> np.ndarray | None:
    """Index map appending one mirrored row/col when n is odd, else None."""
    if n % 2 == 0:
        return None
    return np.concatenate([np.arange(n), [n - 2 if n >= 2 else 0]]).astype(np.intp)


def reflect_pad_to_even(x: Tensor) -> Tensor:
    n, c, h, w = x.data.shape
    ih = tail_even_index(h)
    iw = tail_even_index(w)
    if ih is None and iw is None:
        return x
    data = x.data
    if ih is not None:
        data = data[:, :, ih]
    if iw is not None:
        data = data[:, :, :, iw]
    out = Tensor(np.ascontiguousarray(data), parents=(x,))

    def bw(g):
        if iw is not None:
            g = _scatter_add_axis(g, iw, w, axis=3)
        if ih is not None:
            g = _scatter_add_axis(g, ih, h, axis=2)
        x.accumulate_grad(g)

    out._backward = bw
    return out


def avg_pool2(x: Tensor) -> Tensor:
    """2x2 non-overlapping average pooling; odd dims reflect-pad first."""
    x = reflect_pad_to_even(x)
    n, c, h, w = x.data.shape
    y = x.data.reshape(n, c, h // 2, 2, w // 2, 2).mean(axis=(3, 5))
    out = Tensor(y, parents=(x,))

    def bw(g):
        gx = np.repeat(np.repeat(g, 2, axis=2), 2, axis=3) * 0.25
        x.accumulate_grad(gx)

    out._backward = bw
    return out

"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

Every operation used by the fusion model has a hand-derived backward rule;
graph construction is skipped entirely when no input requires gradients, so
forward-only evaluation (e.g. under finite differencing) runs at plain numpy
speed.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_backward", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, np.ndarray) and data.dtype == np.float64:
            self.data = data
        else:
            self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._backward = None
        self._parents: tuple[Tensor, ...] = ()

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def backward(self, seed: np.ndarray | None = None):
        if seed is None:
            if self.data.size != 1:
                raise ValueError("backward() without seed requires a scalar")
            seed = np.ones_like(self.data)
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.asarray(seed, dtype=np.float64)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return mul(self, -1.0)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _accumulate(t: Tensor, g: np.ndarray):
    if not t.requires_grad and t._backward is None:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    for p in parents:
        if p.requires_grad:
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
            break
    return out


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data + b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a, b) -> Tensor:
    if isinstance(b, (int, float)):
        a = as_tensor(a)
        scale = float(b)
        data = a.data * scale

        def backward_scalar(g):
            _accumulate(a, g * scale)

        return _make(data, (a,), backward_scalar)
    a, b = as_tensor(a), as_tensor(b)
    data = a.data * b.data

    def backward(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape))
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    data = a.data @ b.data

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        _accumulate(a, _unbroadcast(ga, a.data.shape))
        _accumulate(b, _unbroadcast(gb, b.data.shape))

    return _make(data, (a, b), backward)


def reshape(a, shape) -> Tensor:
    a = as_tensor(a)
    data = a.data.reshape(shape)

    def backward(g):
        _accumulate(a, g.reshape(a.data.shape))

    return _make(data, (a,), backward)


def transpose(a, axes) -> Tensor:
    a = as_tensor(a)
    data = a.data.transpose(axes)
    inverse = tuple(sorted(range(len(axes)), key=axes.__getitem__))

    def backward(g):
        _accumulate(a, g.transpose(inverse))

    return _make(data, (a,), backward)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is None:
            _accumulate(a, np.broadcast_to(g, a.data.shape).copy())
            return
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(a, np.broadcast_to(g, a.data.shape).copy())

    return _make(data, (a,), backward)


def tmean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    if axis is None:
        count = a.data.size
    else:
        count = a.data.shape[axis]
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, s, e in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(s, e)
            _accumulate(t, g[tuple(sl)])

    return _make(data, tuple(tensors), backward)


def softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        dot = (g * y).sum(axis=axis, keepdims=True)
        _accumulate(a, y * (g - dot))

    return _make(y, (a,), backward)


def gelu(a) -> Tensor:
    a = as_tensor(a)
    cdf = 0.5 * (1.0 + erf(a.data / _SQRT2))
    y = a.data * cdf

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * a.data ** 2)
        _accumulate(a, g * (cdf + a.data * pdf))

    return _make(y, (a,), backward)


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    y = np.sqrt(np.maximum(a.data, 0.0))

    def backward(g):
        safe = np.where(y > 0, y, 1.0)
        _accumulate(a, np.where(y > 0, g / (2.0 * safe), 0.0))

    return _make(y, (a,), backward)


def layer_norm(x, gain, bias, eps: float = 1e-5) -> Tensor:
    """Layer normalization over the last axis."""
    x, gain, bias = as_tensor(x), as_tensor(gain), as_tensor(bias)
    n = x.data.shape[-1]
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    y = gain.data * xhat + bias.data

    def backward(g):
        dxhat = g * gain.data
        dvar = (dxhat * xc).sum(axis=-1, keepdims=True) * (-0.5) * inv ** 3
        dmu = (-dxhat * inv).sum(axis=-1, keepdims=True) + dvar * (-2.0 / n) * xc.sum(
            axis=-1, keepdims=True)
        dx = dxhat * inv + dvar * (2.0 / n) * xc + dmu / n
        _accumulate(x, dx)
        lead = tuple(range(g.ndim - 1))
        _accumulate(gain, _unbroadcast((g * xhat).sum(axis=lead) if lead else g * xhat,
                                       gain.data.shape))
        _accumulate(bias, _unbroadcast(g.sum(axis=lead) if lead else g,
                                       bias.data.shape))

    return _make(y, (x, gain, bias), backward)


def l2_normalize(a, eps: float = 1e-12) -> Tensor:
    """Normalize the last axis to unit Euclidean norm."""
    a = as_tensor(a)
    norm = np.sqrt((a.data ** 2).sum(axis=-1, keepdims=True))
    norm = np.maximum(norm, eps)
    y = a.data / norm

    def backward(g):
        dot = (g * y).sum(axis=-1, keepdims=True)
        _accumulate(a, (g - y * dot) / norm)

    return _make(y, (a,), backward)


def linear(v, w, b=None) -> Tensor:
    """Fused vector-matrix product with optional bias: v (n,) @ w (n, m) + b."""
    v, w = as_tensor(v), as_tensor(w)
    b = as_tensor(b) if b is not None else None
    data = v.data @ w.data
    if b is not None:
        data = data + b.data

    def backward(g):
        _accumulate(v, w.data @ g)
        _accumulate(w, np.outer(v.data, g))
        if b is not None:
            _accumulate(b, g)

    parents = (v, w, b) if b is not None else (v, w)
    return _make(data, parents, backward)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = as_tensor(a)
    m = a.data.max(axis=axis, keepdims=True)
    shifted = a.data - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    y = shifted - lse

    def backward(g):
        p = np.exp(y)
        _accumulate(a, g - p * g.sum(axis=axis, keepdims=True))

    return _make(y, (a,), backward)


def take(a, indices) -> Tensor:
    """Gather elements along the first axis of a 1-D tensor."""
    a = as_tensor(a)
    idx = list(indices) if not isinstance(indices, int) else [indices]
    data = a.data[idx]

    def backward(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        _accumulate(a, out)

    return _make(data, (a,), backward)


def weighted_cross_entropy(logits, label: int, weight: float) -> Tensor:
    """weight * (-log softmax(logits)[label]) for a 1-D logits tensor."""
    logits = as_tensor(logits)
    z = logits.data
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    loss = weight * (lse - z[label])

    def backward(g):
        p = np.exp(z - lse)
        onehot = np.zeros_like(z)
        onehot[label] = 1.0
        _accumulate(logits, g * weight * (p - onehot))

    return _make(np.array(loss), (logits,), backward)


def conv1d_same(x, weight, bias) -> Tensor:
    """1-D convolution over time with 'same' zero padding and stride 1.

    x: (C_in, T); weight: (C_out, C_in, K); bias: (C_out,) -> (C_out, T).
    """
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    c_in, t = x.data.shape
    c_out, c_in_w, k = weight.data.shape
    if c_in_w != c_in:
        raise ValueError(f"channel mismatch: x has {c_in}, weight expects {c_in_w}")
    pad_l = (k - 1) // 2
    pad_r = k - 1 - pad_l
    xp = np.zeros((c_in, t + pad_l + pad_r))
    xp[:, pad_l : pad_l + t] = x.data
    # im2col: (C_in*K, T)
    cols = np.empty((c_in * k, t))
    for j in range(k):
        cols[j * c_in : (j + 1) * c_in, :] = xp[:, j : j + t]
    w_mat = weight.data.transpose(2, 1, 0).reshape(c_in * k, c_out)  # (K*C_in, C_out)
    y = (cols.T @ w_mat).T + bias.data[:, None]

    def backward(g):
        gw_mat = cols @ g.T  # (C_in*K, C_out)
        gw = gw_mat.reshape(k, c_in, c_out).transpose(2, 1, 0)
        _accumulate(weight, gw)
        _accumulate(bias, g.sum(axis=1))
        gcols = w_mat @ g  # (C_in*K, T)
        gxp = np.zeros_like(xp)
        for j in range(k):
            gxp[:, j : j + t] += gcols[j * c_in : (j + 1) * c_in, :]
        _accumulate(x, gxp[:, pad_l : pad_l + t])

    return _make(y, (x, weight, bias), backward)

"""Differentiable operations.

Every op evaluates eagerly with numpy and, when an input lives on a tape,
records a backward rule.  Backward rules receive the upstream gradient and a
tuple saying which inputs need a gradient, and return one entry per input
(``None`` where not needed).
"""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import IndexOutOfRange, NonIntegralOutput, ShapeMismatch
from .tensor import Tensor

LEAKY_ALPHA = 0.2


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dtype = like.dtype if like is not None else None
    return Tensor(np.asarray(x, dtype=dtype) if dtype is not None else x)


def _emit(data, inputs, backward):
    tape = None
    for t in inputs:
        if t.tape is not None:
            if tape is not None and t.tape is not tape:
                raise ValueError("inputs recorded on different tapes")
            tape = t.tape
    if tape is None:
        return Tensor(data)
    return tape.record(data, inputs, backward)


# --------------------------------------------------------------------------
# elementwise arithmetic
# --------------------------------------------------------------------------

def _pair(a, b):
    like = a if isinstance(a, Tensor) else b if isinstance(b, Tensor) else None
    a, b = as_tensor(a, like), as_tensor(b, like)
    if a.shape != b.shape and a.size != 1 and b.size != 1:
        raise ShapeMismatch(f"shapes {a.shape} and {b.shape} differ and neither is a scalar")
    if a.shape != b.shape and np.broadcast_shapes(a.shape, b.shape) not in (a.shape, b.shape):
        raise ShapeMismatch(f"scalar operand would change the result shape ({a.shape} vs {b.shape})")
    return a, b


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    return np.sum(g).reshape(shape)


def add(a, b) -> Tensor:
    a, b = _pair(a, b)

    def bw(g, needs):
        return (_unbroadcast(g, a.shape) if needs[0] else None,
                _unbroadcast(g, b.shape) if needs[1] else None)

    return _emit(a.data + b.data, (a, b), bw)


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)

    def bw(g, needs):
        return (_unbroadcast(g, a.shape) if needs[0] else None,
                _unbroadcast(-g, b.shape) if needs[1] else None)

    return _emit(a.data - b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    ad, bd = a.data, b.data

    def bw(g, needs):
        return (_unbroadcast(g * bd, a.shape) if needs[0] else None,
                _unbroadcast(g * ad, b.shape) if needs[1] else None)

    return _emit(ad * bd, (a, b), bw)


def elementwise(op: str, a, b) -> Tensor:
    try:
        fn = {"add": add, "sub": sub, "mul": mul}[op]
    except KeyError:
        raise ValueError(f"unknown elementwise op {op!r}") from None
    return fn(a, b)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"cannot multiply {a.shape} by {b.shape}")
    ad, bd = a.data, b.data

    def bw(g, needs):
        return (g @ bd.T if needs[0] else None, ad.T @ g if needs[1] else None)

    return _emit(ad @ bd, (a, b), bw)


def bias_add(x, b) -> Tensor:
    """Add a per-feature bias along axis 1 (dense ``(N, F)`` or conv ``(N, F, H, W)``)."""
    x, b = as_tensor(x), as_tensor(b)
    if b.ndim != 1 or x.ndim < 2 or x.shape[1] != b.shape[0]:
        raise ShapeMismatch(f"bias {b.shape} does not match features of {x.shape}")
    view = (1, -1) + (1,) * (x.ndim - 2)
    axes = (0,) + tuple(range(2, x.ndim))

    def bw(g, needs):
        return (g if needs[0] else None, g.sum(axis=axes) if needs[1] else None)

    return _emit(x.data + b.data.reshape(view), (x, b), bw)


# --------------------------------------------------------------------------
# shape manipulation and reductions
# --------------------------------------------------------------------------

def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    src = x.shape

    def bw(g, needs):
        return (g.reshape(src),)

    return _emit(x.data.reshape(shape), (x,), bw)


def transpose(x, axes=None) -> Tensor:
    x = as_tensor(x)
    axes = tuple(reversed(range(x.ndim))) if axes is None else tuple(axes)
    inv = tuple(np.argsort(axes))

    def bw(g, needs):
        return (g.transpose(inv),)

    return _emit(np.ascontiguousarray(x.data.transpose(axes)), (x,), bw)


def concat(tensors, axis: int = 0) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = np.cumsum([t.shape[axis] for t in ts])[:-1]

    def bw(g, needs):
        parts = np.split(g, sizes, axis=axis)
        return tuple(p if n else None for p, n in zip(parts, needs))

    return _emit(np.concatenate([t.data for t in ts], axis=axis), tuple(ts), bw)


def take(x, index) -> Tensor:
    """Gather ``x.ravel()[index]``; the output has ``index``'s shape."""
    x = as_tensor(x)
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= x.size):
        raise IndexOutOfRange("gather index out of range")

    def bw(g, needs):
        flat = np.bincount(index.ravel(), weights=g.ravel().astype(np.float64), minlength=x.size)
        return (flat.astype(x.dtype).reshape(x.shape),)

    return _emit(x.data.reshape(-1)[index], (x,), bw)


def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001 - mirrors numpy
    x = as_tensor(x)
    shape = x.shape

    def bw(g, needs):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return _emit(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), bw)


def mean(x) -> Tensor:
    x = as_tensor(x)
    return mul(sum(x), 1.0 / x.size)


# --------------------------------------------------------------------------
# nonlinearities
# --------------------------------------------------------------------------

def leaky_relu(x, alpha: float = LEAKY_ALPHA) -> Tensor:
    x = as_tensor(x)
    pos = x.data > 0
    slope = np.where(pos, 1.0, alpha).astype(x.dtype)

    def bw(g, needs):
        return (g * slope,)

    return _emit(x.data * slope, (x,), bw)


def relu(x) -> Tensor:
    x = as_tensor(x)
    pos = (x.data > 0).astype(x.dtype)

    def bw(g, needs):
        return (g * pos,)

    return _emit(x.data * pos, (x,), bw)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)

    def bw(g, needs):
        return (g * (1 - y * y),)

    return _emit(y, (x,), bw)


def _sigmoid(v):
    e = np.exp(-np.abs(v))
    return np.where(v >= 0, 1 / (1 + e), e / (1 + e)).astype(v.dtype)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid(x.data)

    def bw(g, needs):
        return (g * y * (1 - y),)

    return _emit(y, (x,), bw)


def activation(kind: str, x) -> Tensor:
    try:
        fn = {"leaky_relu": leaky_relu, "tanh": tanh, "sigmoid": sigmoid, "relu": relu}[kind]
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}") from None
    return fn(x)


def abs(x) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    sign = np.sign(x.data)

    def bw(g, needs):
        return (g * sign,)

    return _emit(np.abs(x.data), (x,), bw)


def power(x, p: float) -> Tensor:
    """``x ** p`` for positive ``x``."""
    x = as_tensor(x)
    y = x.data ** p

    def bw(g, needs):
        return (g * p * x.data ** (p - 1),)

    return _emit(y, (x,), bw)


def clip(x, lo: float, hi: float) -> Tensor:
    x = as_tensor(x)
    inside = ((x.data >= lo) & (x.data <= hi)).astype(x.dtype)

    def bw(g, needs):
        return (g * inside,)

    return _emit(np.clip(x.data, lo, hi), (x,), bw)


# --------------------------------------------------------------------------
# losses
# --------------------------------------------------------------------------

def softplus(x) -> Tensor:
    """``ln(1 + e^x)`` evaluated as ``max(x, 0) + log1p(e^-|x|)``."""
    x = as_tensor(x)
    v = x.data
    y = np.maximum(v, 0) + np.log1p(np.exp(-np.abs(v)))

    def bw(g, needs):
        return (g * _sigmoid(v),)

    return _emit(y.astype(v.dtype), (x,), bw)


def softmax(logits) -> np.ndarray:
    z = np.asarray(logits.data if isinstance(logits, Tensor) else logits)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_cross_entropy(logits, labels) -> Tensor:
    """Mean over rows of ``-log softmax(logits)[label]``."""
    logits = as_tensor(logits)
    if logits.ndim == 1:
        logits = reshape(logits, (1, -1))
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    n, k = logits.shape
    if labels.shape != (n,):
        raise ShapeMismatch(f"{labels.shape[0]} labels for {n} rows")
    if np.any((labels < 0) | (labels >= k)):
        raise IndexOutOfRange(f"class index outside [0, {k})")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    loss = np.mean(lse - z[np.arange(n), labels])
    probs = softmax(logits.data)

    def bw(g, needs):
        d = probs.copy()
        d[np.arange(n), labels] -= 1
        return (d * (g / n),)

    return _emit(np.asarray(loss, dtype=logits.dtype), (logits,), bw)


def losses(kind: str, *args) -> Tensor:
    try:
        fn = {"softmax_cross_entropy": softmax_cross_entropy, "softplus": softplus, "mean": mean}[kind]
    except KeyError:
        raise ValueError(f"unknown loss {kind!r}") from None
    return fn(*args)


# --------------------------------------------------------------------------
# convolution
# --------------------------------------------------------------------------

def _out_size(size, k, stride, pad):
    span = size + 2 * pad - k
    if span < 0 or span % stride:
        raise NonIntegralOutput(f"(size {size} + 2*{pad} - {k}) / {stride} is not a nonnegative integer")
    return span // stride + 1


def _pad(a, pad):
    if pad == 0:
        return a
    return np.pad(a, ((0, 0), (0, 0), (pad, pad), (pad, pad)))


def conv2d(x, w, stride: int = 1, pad: int = 0) -> Tensor:
    """Cross-correlation of ``x (N, C, H, W)`` with ``w (F, C, kh, kw)``."""
    x, w = as_tensor(x), as_tensor(w)
    if x.ndim != 4 or w.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeMismatch(f"conv2d input {x.shape} incompatible with kernel {w.shape}")
    n, c, h, wd = x.shape
    f, _, kh, kw = w.shape
    ho, wo = _out_size(h, kh, stride, pad), _out_size(wd, kw, stride, pad)
    cols = kernels.im2col(_pad(x.data, pad), kh, kw, stride, ho, wo)
    wm = w.data.reshape(f, -1)
    out = (wm @ cols).reshape(f, n, ho, wo).transpose(1, 0, 2, 3)

    def bw(g, needs):
        gm = np.ascontiguousarray(g.transpose(1, 0, 2, 3)).reshape(f, -1)
        dx = dw = None
        if needs[0]:
            dxp = kernels.col2im(wm.T @ gm, n, c, h + 2 * pad, wd + 2 * pad, kh, kw, stride, ho, wo)
            dx = dxp[:, :, pad:pad + h, pad:pad + wd]
        if needs[1]:
            dw = (gm @ cols.T).reshape(w.shape)
        return dx, dw

    return _emit(np.ascontiguousarray(out), (x, w), bw)


def conv_transpose2d(y, w, stride: int = 1, pad: int = 0) -> Tensor:
    """Adjoint of :func:`conv2d` in its input: ``y (N, F, H', W')`` to ``(N, C, H, W)``.

    ``w`` has the conv2d layout ``(F, C, kh, kw)``; ``H = (H' - 1) stride - 2 pad + kh``.
    """
    y, w = as_tensor(y), as_tensor(w)
    if y.ndim != 4 or w.ndim != 4 or y.shape[1] != w.shape[0]:
        raise ShapeMismatch(f"conv_transpose2d input {y.shape} incompatible with kernel {w.shape}")
    n, f, ho, wo = y.shape
    _, c, kh, kw = w.shape
    h = (ho - 1) * stride - 2 * pad + kh
    wd = (wo - 1) * stride - 2 * pad + kw
    if h <= 0 or wd <= 0:
        raise ShapeMismatch("conv_transpose2d output would be empty")
    wm = w.data.reshape(f, -1)
    ym = np.ascontiguousarray(y.data.transpose(1, 0, 2, 3)).reshape(f, -1)
    xp = kernels.col2im(wm.T @ ym, n, c, h + 2 * pad, wd + 2 * pad, kh, kw, stride, ho, wo)
    out = xp[:, :, pad:pad + h, pad:pad + wd]

    def bw(g, needs):
        cols = kernels.im2col(_pad(g, pad), kh, kw, stride, ho, wo)
        dy = dw = None
        if needs[0]:
            dy = np.ascontiguousarray((wm @ cols).reshape(f, n, ho, wo).transpose(1, 0, 2, 3))
        if needs[1]:
            dw = (ym @ cols.T).reshape(w.shape)
        return dy, dw

    return _emit(np.ascontiguousarray(out), (y, w), bw)

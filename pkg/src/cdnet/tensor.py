"""Minimal reverse-mode autodiff over float64 numpy arrays.

A ``DiffTensor`` owns a value array and a same-shaped gradient buffer. Ops are
plain functions; while a ``Tape`` is active (``with Tape() as t:``) every op
whose inputs participate in gradient computation records an adjoint closure.
``backward(root, tape)`` seeds the scalar root with 1 and replays the closures
in exact reverse recording order, accumulating into ``.grad``.

Ops accept single samples or leading-batch shapes (conv1d takes [C, L] or
[B, C, L], dense takes [n] or [B, n]); elementwise arithmetic follows numpy
broadcasting, with gradients summed back down to each operand's shape.
A tape is single-use: replaying it twice raises TapeReuseError.
"""

import numpy as np

from .errors import ShapeMismatchError, TapeReuseError
from . import kernels as _kernels

_TAPES = []


def _active_tape():
    return _TAPES[-1] if _TAPES else None


class Tape:
    """Records adjoint closures during the forward pass. Single use."""

    def __init__(self):
        self._entries = []  # (op name, adjoint closure), in recording order
        self._spent = False

    def __enter__(self):
        _TAPES.append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _TAPES.pop()
        return False

    def record(self, name, fn):
        self._entries.append((name, fn))

    def operation_names(self):
        return [name for name, _ in self._entries]

    def backward(self, root):
        if self._spent:
            raise TapeReuseError("tape has already been replayed; build a new forward pass")
        if root.values.size != 1:
            raise ValueError(f"backward root must be scalar-shaped, got shape {root.shape}")
        if root._tape is not self:
            raise ValueError("root tensor was not produced on this tape")
        self._spent = True
        root.grad[...] = 1.0
        for _, fn in reversed(self._entries):
            fn()


def backward(root, tape):
    """Replay ``tape`` from scalar ``root``, accumulating gradients."""
    tape.backward(root)


class DiffTensor:
    """float64 array with a gradient buffer of the same shape."""

    __slots__ = ("values", "grad", "requires_gradient", "_tape")

    def __init__(self, values, requires_gradient=False):
        self.values = np.array(values, dtype=np.float64)
        self.grad = np.zeros_like(self.values)
        self.requires_gradient = bool(requires_gradient)
        self._tape = None

    @property
    def shape(self):
        return self.values.shape

    def zero_grad(self):
        self.grad.fill(0.0)

    def item(self):
        if self.values.size != 1:
            raise ValueError(f"item() needs a scalar tensor, got shape {self.shape}")
        return float(self.values.reshape(()))

    def __repr__(self):
        return f"DiffTensor(shape={self.shape}, requires_gradient={self.requires_gradient})"

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return subtract(self, other)

    def __rsub__(self, other):
        return subtract(other, self)

    def __mul__(self, other):
        return multiply(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return divide(self, other)

    def __neg__(self):
        return multiply(self, -1.0)


def as_tensor(x):
    if isinstance(x, DiffTensor):
        return x
    return DiffTensor(np.asarray(x, dtype=np.float64))


def _make(values, inputs, name, backward_fn):
    out = DiffTensor.__new__(DiffTensor)
    out.values = values
    out.grad = np.zeros_like(values)
    out.requires_gradient = any(t.requires_gradient for t in inputs)
    out._tape = None
    tape = _active_tape()
    if tape is not None and out.requires_gradient:
        out._tape = tape
        tape.record(name, backward_fn)
    return out


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (the adjoint of numpy broadcasting)."""
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _check_broadcast(a, b, op):
    try:
        np.broadcast_shapes(a.values.shape, b.values.shape)
    except ValueError:
        raise ShapeMismatchError(
            f"{op}: shapes {a.values.shape} and {b.values.shape} do not broadcast"
        ) from None


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    vals = a.values + b.values

    def bw():
        if a.requires_gradient:
            a.grad += _unbroadcast(out.grad, a.values.shape)
        if b.requires_gradient:
            b.grad += _unbroadcast(out.grad, b.values.shape)

    out = _make(vals, (a, b), "add", bw)
    return out


def subtract(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "subtract")
    vals = a.values - b.values

    def bw():
        if a.requires_gradient:
            a.grad += _unbroadcast(out.grad, a.values.shape)
        if b.requires_gradient:
            b.grad -= _unbroadcast(out.grad, b.values.shape)

    out = _make(vals, (a, b), "subtract", bw)
    return out


def multiply(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "multiply")
    vals = a.values * b.values

    def bw():
        if a.requires_gradient:
            a.grad += _unbroadcast(out.grad * b.values, a.values.shape)
        if b.requires_gradient:
            b.grad += _unbroadcast(out.grad * a.values, b.values.shape)

    out = _make(vals, (a, b), "multiply", bw)
    return out


def divide(a, b):
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "divide")
    vals = a.values / b.values

    def bw():
        if a.requires_gradient:
            a.grad += _unbroadcast(out.grad / b.values, a.values.shape)
        if b.requires_gradient:
            b.grad -= _unbroadcast(out.grad * a.values / (b.values * b.values), b.values.shape)

    out = _make(vals, (a, b), "divide", bw)
    return out


def exp(a):
    a = as_tensor(a)
    vals = np.exp(a.values)

    def bw():
        if a.requires_gradient:
            a.grad += out.grad * out.values

    out = _make(vals, (a,), "exp", bw)
    return out


def log(a):
    a = as_tensor(a)
    vals = np.log(a.values)

    def bw():
        if a.requires_gradient:
            a.grad += out.grad / a.values

    out = _make(vals, (a,), "log", bw)
    return out


def sqrt(a):
    a = as_tensor(a)
    vals = np.sqrt(a.values)

    def bw():
        if a.requires_gradient:
            a.grad += out.grad * 0.5 / out.values

    out = _make(vals, (a,), "sqrt", bw)
    return out


def relu(a):
    a = as_tensor(a)
    vals = np.maximum(a.values, 0.0)

    def bw():
        if a.requires_gradient:
            # subgradient at 0 is 0
            a.grad += out.grad * (a.values > 0.0)

    out = _make(vals, (a,), "relu", bw)
    return out


def clamp_min(a, floor):
    a = as_tensor(a)
    floor = float(floor)
    vals = np.maximum(a.values, floor)

    def bw():
        if a.requires_gradient:
            a.grad += out.grad * (a.values > floor)

    out = _make(vals, (a,), "clamp_min", bw)
    return out


def sum_all(a):
    a = as_tensor(a)
    vals = np.asarray(a.values.sum())

    def bw():
        if a.requires_gradient:
            a.grad += out.grad

    out = _make(vals, (a,), "sum_all", bw)
    return out


def mean_all(a):
    a = as_tensor(a)
    if a.values.size == 0:
        raise ValueError("mean_all of an empty tensor")
    vals = np.asarray(a.values.mean())
    scale = 1.0 / a.values.size

    def bw():
        if a.requires_gradient:
            a.grad += out.grad * scale

    out = _make(vals, (a,), "mean_all", bw)
    return out


def sum_last(a):
    a = as_tensor(a)
    if a.values.ndim == 0:
        raise ShapeMismatchError("sum_last needs at least one axis")
    vals = a.values.sum(axis=-1)

    def bw():
        if a.requires_gradient:
            a.grad += out.grad[..., None]

    out = _make(vals, (a,), "sum_last", bw)
    return out


def mean_last(a):
    a = as_tensor(a)
    if a.values.ndim == 0 or a.values.shape[-1] == 0:
        raise ShapeMismatchError("mean_last needs a non-empty last axis")
    vals = a.values.mean(axis=-1)
    scale = 1.0 / a.values.shape[-1]

    def bw():
        if a.requires_gradient:
            a.grad += out.grad[..., None] * scale

    out = _make(vals, (a,), "mean_last", bw)
    return out


def reshape(a, shape):
    a = as_tensor(a)
    shape = tuple(int(s) for s in shape)
    vals = a.values.reshape(shape)
    if vals.base is not None:
        vals = vals.copy()

    def bw():
        if a.requires_gradient:
            a.grad += out.grad.reshape(a.values.shape)

    out = _make(vals, (a,), "reshape", bw)
    return out


def take_rows(a, indices):
    """Gather rows of a 2-D (or higher) tensor along axis 0; repeats allowed."""
    a = as_tensor(a)
    idx = np.asarray(indices, dtype=np.intp)
    if idx.ndim != 1:
        raise ShapeMismatchError("take_rows indices must be 1-D")
    if idx.size and (idx.min() < 0 or idx.max() >= a.values.shape[0]):
        raise IndexError("take_rows index out of range")
    vals = a.values[idx]

    def bw():
        if a.requires_gradient:
            np.add.at(a.grad, idx, out.grad)

    out = _make(vals, (a,), "take_rows", bw)
    return out


def take_per_row(a, column_indices):
    """Pick one column per row of a 2-D tensor: out[i] = a[i, idx[i]]."""
    a = as_tensor(a)
    if a.values.ndim != 2:
        raise ShapeMismatchError(f"take_per_row needs a 2-D tensor, got shape {a.shape}")
    idx = np.asarray(column_indices, dtype=np.intp)
    n = a.values.shape[0]
    if idx.shape != (n,):
        raise ShapeMismatchError(f"take_per_row needs {n} indices, got shape {idx.shape}")
    if idx.size and (idx.min() < 0 or idx.max() >= a.values.shape[1]):
        raise IndexError("take_per_row column index out of range")
    rows = np.arange(n)
    vals = a.values[rows, idx]

    def bw():
        if a.requires_gradient:
            np.add.at(a.grad, (rows, idx), out.grad)

    out = _make(vals, (a,), "take_per_row", bw)
    return out


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.values.ndim != 2 or b.values.ndim != 2:
        raise ShapeMismatchError("matmul expects 2-D operands")
    if a.values.shape[1] != b.values.shape[0]:
        raise ShapeMismatchError(
            f"matmul: inner dimensions differ, {a.values.shape} @ {b.values.shape}"
        )
    vals = a.values @ b.values

    def bw():
        if a.requires_gradient:
            a.grad += out.grad @ b.values.T
        if b.requires_gradient:
            b.grad += a.values.T @ out.grad

    out = _make(vals, (a, b), "matmul", bw)
    return out


def transpose2d(a):
    a = as_tensor(a)
    if a.values.ndim != 2:
        raise ShapeMismatchError("transpose2d expects a 2-D tensor")
    vals = np.ascontiguousarray(a.values.T)

    def bw():
        if a.requires_gradient:
            a.grad += out.grad.T

    out = _make(vals, (a,), "transpose2d", bw)
    return out


def softmax(a):
    """Softmax over the last axis, computed with a max shift for stability."""
    a = as_tensor(a)
    if a.values.ndim == 0 or a.values.shape[-1] == 0:
        raise ShapeMismatchError("softmax needs a non-empty last axis")
    shifted = a.values - a.values.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    vals = e / e.sum(axis=-1, keepdims=True)

    def bw():
        if a.requires_gradient:
            inner = (out.grad * out.values).sum(axis=-1, keepdims=True)
            a.grad += (out.grad - inner) * out.values

    out = _make(vals, (a,), "softmax", bw)
    return out


def conv1d(x, kernels, bias, padding="same"):
    """1-d cross-correlation: x [C, L] or [B, C, L], kernels [O, C, K], bias [O].

    padding 'same' keeps the output length at L; 'valid' gives L - K + 1.
    """
    x, kernels, bias = as_tensor(x), as_tensor(kernels), as_tensor(bias)
    if kernels.values.ndim != 3:
        raise ShapeMismatchError(f"conv1d kernels must be [out, in, width], got {kernels.shape}")
    out_ch, in_ch, k_width = kernels.values.shape
    if bias.values.shape != (out_ch,):
        raise ShapeMismatchError(f"conv1d bias must have shape ({out_ch},), got {bias.shape}")
    single = x.values.ndim == 2
    if single:
        x3 = x.values[None, :, :]
    elif x.values.ndim == 3:
        x3 = x.values
    else:
        raise ShapeMismatchError(f"conv1d input must be [C, L] or [B, C, L], got {x.shape}")
    if x3.shape[1] != in_ch:
        raise ShapeMismatchError(
            f"conv1d: input has {x3.shape[1]} channels, kernels expect {in_ch}"
        )
    length = x3.shape[2]
    if padding == "same":
        pad_left = (k_width - 1) // 2
        pad_right = k_width - 1 - pad_left
    elif padding == "valid":
        pad_left = pad_right = 0
        if k_width > length:
            raise ShapeMismatchError(
                f"conv1d: kernel width {k_width} exceeds input length {length}"
            )
    else:
        raise ValueError(f"conv1d padding must be 'same' or 'valid', got {padding!r}")
    xp = np.pad(x3, ((0, 0), (0, 0), (pad_left, pad_right)))
    out3 = _kernels.conv1d_forward(xp, kernels.values)
    out3 += bias.values[None, :, None]
    vals = out3[0] if single else out3
    out_len = out3.shape[2]

    def bw():
        g3 = np.ascontiguousarray(out.grad[None] if single else out.grad)
        if x.requires_gradient or kernels.requires_gradient:
            gxp, gk = _kernels.conv1d_backward(g3, xp, kernels.values)
            if kernels.requires_gradient:
                kernels.grad += gk
            if x.requires_gradient:
                gx = gxp[:, :, pad_left:pad_left + length]
                x.grad += gx[0] if single else gx
        if bias.requires_gradient:
            bias.grad += g3.sum(axis=(0, 2))

    out = _make(vals, (x, kernels, bias), "conv1d", bw)
    return out


def dense(x, weights, bias):
    """Affine map: x [n] or [B, n], weights [m, n], bias [m] -> [m] or [B, m]."""
    x, weights, bias = as_tensor(x), as_tensor(weights), as_tensor(bias)
    if weights.values.ndim != 2:
        raise ShapeMismatchError(f"dense weights must be 2-D, got shape {weights.shape}")
    m, n = weights.values.shape
    if bias.values.shape != (m,):
        raise ShapeMismatchError(f"dense bias must have shape ({m},), got {bias.shape}")
    if x.values.ndim not in (1, 2) or x.values.shape[-1] != n:
        raise ShapeMismatchError(
            f"dense: input shape {x.shape} does not match weights {weights.values.shape}"
        )
    vals = x.values @ weights.values.T + bias.values

    def bw():
        g = out.grad
        if x.values.ndim == 1:
            if weights.requires_gradient:
                weights.grad += np.outer(g, x.values)
            if x.requires_gradient:
                x.grad += g @ weights.values
            if bias.requires_gradient:
                bias.grad += g
        else:
            if weights.requires_gradient:
                weights.grad += g.T @ x.values
            if x.requires_gradient:
                x.grad += g @ weights.values
            if bias.requires_gradient:
                bias.grad += g.sum(axis=0)

    out = _make(vals, (x, weights, bias), "dense", bw)
    return out


def uniform_init(rng, shape, fan_in):
    """Parameter tensor drawn uniformly from ±sqrt(1/fan_in)."""
    bound = float(fan_in) ** -0.5
    return DiffTensor(rng.uniform(-bound, bound, size=shape), requires_gradient=True)

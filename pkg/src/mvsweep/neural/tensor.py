"""Reverse-mode autodiff on numpy arrays.

Tensors wrap float32/float64 arrays of up to four axes (batch, channels,
height, width). Operations record a closure-based tape; backward() walks
it in reverse topological order, accumulates gradients into leaves, and
releases the graph. Gradients are plain numpy arrays in .grad.
"""
import contextlib

import numpy as np

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable tape recording inside the block (inference / parameter updates)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        if isinstance(data, Tensor):
            raise TypeError("wrap arrays, not Tensors")
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        if arr.ndim > 4:
            raise ValueError(f"tensors support at most 4 axes, got {arr.ndim}")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self):
        return Tensor(self.data)

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}{flag})"

    def backward(self):
        """Reverse-mode gradient accumulation from a scalar tensor.

        The recorded graph is released afterwards; calling backward twice on
        the same result (or on a tensor produced under no_grad) errors.
        """
        if self.data.size != 1:
            raise ValueError("backward requires a scalar tensor")
        if self._backward is None and not self._parents:
            raise RuntimeError("backward on a detached tensor: no recorded graph")
        order = _topological_order(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
        for node in order:
            interior = node._backward is not None or bool(node._parents)
            node._parents = ()
            node._backward = None
            if interior and node is not self:
                node.grad = None

    # operator sugar -----------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_coerce(other, self), self)


def _topological_order(root):
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, emit = stack.pop()
        if emit:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def _coerce(value, like):
    if isinstance(value, Tensor):
        return value
    return Tensor(np.asarray(value, dtype=like.dtype))


def _pair(a, b):
    if isinstance(a, Tensor):
        return a, _coerce(b, a)
    if isinstance(b, Tensor):
        return _coerce(a, b), b
    raise TypeError("at least one operand must be a Tensor")


def _make(data, parents, backward):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
    return out


def accumulate_grad(tensor, grad):
    if not tensor.requires_grad:
        return
    if grad.dtype != tensor.dtype:
        grad = grad.astype(tensor.dtype)
    if tensor.grad is None:
        tensor.grad = grad
    else:
        tensor.grad = tensor.grad + grad


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# elementwise ------------------------------------------------------------

def add(a, b):
    a, b = _pair(a, b)
    data = a.data + b.data

    def backward(g):
        accumulate_grad(a, _unbroadcast(g, a.data.shape))
        accumulate_grad(b, _unbroadcast(g, b.data.shape))

    return _make(data, (a, b), backward)


def sub(a, b):
    a, b = _pair(a, b)
    data = a.data - b.data

    def backward(g):
        accumulate_grad(a, _unbroadcast(g, a.data.shape))
        accumulate_grad(b, _unbroadcast(-g, b.data.shape))

    return _make(data, (a, b), backward)


def mul(a, b):
    a, b = _pair(a, b)
    data = a.data * b.data

    def backward(g):
        accumulate_grad(a, _unbroadcast(g * b.data, a.data.shape))
        accumulate_grad(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), backward)


def neg(a):
    def backward(g):
        accumulate_grad(a, -g)

    return _make(-a.data, (a,), backward)


def relu(a):
    mask = a.data > 0
    data = np.where(mask, a.data, 0)

    def backward(g):
        accumulate_grad(a, g * mask)

    return _make(data, (a,), backward)


def leaky_relu(a, negative_slope=0.1):
    mask = a.data > 0
    data = np.where(mask, a.data, a.data * a.dtype.type(negative_slope))

    def backward(g):
        slope = a.dtype.type(negative_slope)
        accumulate_grad(a, np.where(mask, g, g * slope))

    return _make(data, (a,), backward)


def sigmoid(a):
    x = a.data
    data = np.empty_like(x)
    pos = x >= 0
    data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    data[~pos] = ex / (1.0 + ex)

    def backward(g):
        accumulate_grad(a, g * data * (1.0 - data))

    return _make(data, (a,), backward)


def log(a):
    data = np.log(a.data)

    def backward(g):
        accumulate_grad(a, g / a.data)

    return _make(data, (a,), backward)


def absolute(a):
    data = np.abs(a.data)

    def backward(g):
        accumulate_grad(a, g * np.sign(a.data))

    return _make(data, (a,), backward)


def clip(a, lo, hi):
    data = np.clip(a.data, lo, hi)
    inside = (a.data >= lo) & (a.data <= hi)

    def backward(g):
        accumulate_grad(a, g * inside)

    return _make(data, (a,), backward)


# reductions and shape ops ------------------------------------------------

def tsum(a):
    data = a.data.sum()

    def backward(g):
        accumulate_grad(a, np.broadcast_to(g, a.data.shape).astype(a.dtype, copy=False))

    return _make(np.asarray(data), (a,), backward)


def tmean(a):
    scale = a.dtype.type(1.0 / a.data.size)
    data = a.data.sum() * scale

    def backward(g):
        accumulate_grad(
            a, np.broadcast_to(g * scale, a.data.shape).astype(a.dtype, copy=False)
        )

    return _make(np.asarray(data), (a,), backward)


def concat(tensors, axis=1):
    tensors = list(tensors)
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            index = [slice(None)] * g.ndim
            index[axis] = slice(start, stop)
            accumulate_grad(t, g[tuple(index)])

    return _make(data, tuple(tensors), backward)


def crop2d(a, height, width):
    """Keep the top-left height x width window of a (n, c, h, w) tensor."""
    data = a.data[:, :, :height, :width]

    def backward(g):
        full = np.zeros_like(a.data)
        full[:, :, :height, :width] = g
        accumulate_grad(a, full)

    return _make(data.copy(), (a,), backward)


def reshape(a, shape):
    data = a.data.reshape(shape)

    def backward(g):
        accumulate_grad(a, g.reshape(a.data.shape))

    return _make(data, (a,), backward)


def upsample_nearest2(a):
    """Double height and width by pixel replication."""
    data = np.repeat(np.repeat(a.data, 2, axis=2), 2, axis=3)

    def backward(g):
        n, c, h2, w2 = g.shape
        folded = g.reshape(n, c, h2 // 2, 2, w2 // 2, 2).sum(axis=(3, 5))
        accumulate_grad(a, folded)

    return _make(data, (a,), backward)


def avg_pool2d(a, kernel):
    """Non-overlapping kernel x kernel mean pooling; dims must divide evenly."""
    n, c, h, w = a.data.shape
    if h % kernel or w % kernel:
        raise ValueError(f"avg_pool2d needs dims divisible by {kernel}, got {h}x{w}")
    oh, ow = h // kernel, w // kernel
    scale = a.dtype.type(1.0 / (kernel * kernel))
    data = a.data.reshape(n, c, oh, kernel, ow, kernel).sum(axis=(3, 5)) * scale

    def backward(g):
        expanded = np.repeat(np.repeat(g * scale, kernel, axis=2), kernel, axis=3)
        accumulate_grad(a, expanded)

    return _make(data, (a,), backward)

"""Dense fp64 tensors with reverse-mode gradients.

Every operation records its parents and a backward closure on the output
tensor; ``backward()`` on a scalar replays the closures in exact reverse
construction order. Graphs are rebuilt per forward pass, which keeps
variable-length sequence models simple. Gradients accumulate additively,
so a weight reused at every sequence step collects contributions from
all of them.
"""

import itertools
from contextlib import contextmanager

import numpy as np


class ShapeError(ValueError):
    """Raised when an operation is constructed with incompatible shapes."""


_ids = itertools.count()
_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (inference fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def grad_enabled():
    return _grad_enabled


class Tensor:
    """A row-major fp64 array plus its slot in the computation graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op", "_id")

    def __init__(self, data, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None
        self._op = "leaf"
        self._id = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    def item(self):
        if self.data.size != 1:
            raise ShapeError(f"item: tensor has shape {self.shape}, not scalar")
        return float(self.data.reshape(()))

    def assert_finite(self, what="tensor"):
        if not np.all(np.isfinite(self.data)):
            raise FloatingPointError(f"{what} contains NaN or Inf")
        return self

    def zero_grad(self):
        self.grad = None

    def detach(self):
        """Stop-gradient: a constant copy that backward never reaches."""
        return Tensor(self.data.copy())

    def backward(self):
        """Accumulate d(self)/d(leaf) into ``grad`` of every reachable tensor.

        ``self`` must hold a single element. Visits nodes in exact reverse
        construction order, which is a valid topological order because an
        op's inputs always exist before its output.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward: loss must be scalar, got shape {self.shape}")
        nodes = []
        seen = set()
        stack = [self]
        while stack:
            node = stack.pop()
            if id(node) in seen:
                continue
            seen.add(id(node))
            nodes.append(node)
            stack.extend(node._parents)
        nodes.sort(key=lambda n: n._id, reverse=True)
        self.grad = np.ones_like(self.data)
        for node in nodes:
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ------------------------------------------------

    def __add__(self, other):
        return add(self, _lift(other))

    def __radd__(self, other):
        return add(_lift(other), self)

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scalar_mul(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scalar_mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op!r})"


def _lift(value):
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data, parents, backward, op):
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward
        out._op = op
    return out


def _accum(tensor, grad):
    if not tensor.requires_grad:
        return
    if tensor.grad is None:
        tensor.grad = np.zeros_like(tensor.data)
    tensor.grad += grad


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to the original shape."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _check_broadcast(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}") from None


# -- primitive ops -----------------------------------------------------


def add(a, b):
    """Elementwise sum; the smaller operand broadcasts over leading dims."""
    _check_broadcast("add", a, b)

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), backward, "add")


def sub(a, b):
    _check_broadcast("sub", a, b)

    def backward(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(-g, b.shape))

    return _make(a.data - b.data, (a, b), backward, "sub")


def mul(a, b):
    """Elementwise product with broadcasting."""
    _check_broadcast("mul", a, b)
    a_data, b_data = a.data, b.data

    def backward(g):
        _accum(a, _unbroadcast(g * b_data, a.shape))
        _accum(b, _unbroadcast(g * a_data, b.shape))

    return _make(a_data * b_data, (a, b), backward, "mul")


def scalar_mul(a, c):
    c = float(c)

    def backward(g):
        _accum(a, g * c)

    return _make(a.data * c, (a,), backward, "scalar_mul")


def matmul(a, b):
    """Matrix product for 1-D and 2-D operands."""
    if a.data.ndim not in (1, 2) or b.data.ndim not in (1, 2):
        raise ShapeError(f"matmul: operands must be 1-D or 2-D, got {a.shape} @ {b.shape}")
    if a.data.shape[-1] != b.data.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    a_data, b_data = a.data, b.data

    def backward(g):
        if a_data.ndim == 2 and b_data.ndim == 2:
            _accum(a, g @ b_data.T)
            _accum(b, a_data.T @ g)
        elif a_data.ndim == 2 and b_data.ndim == 1:
            _accum(a, np.outer(g, b_data))
            _accum(b, a_data.T @ g)
        elif a_data.ndim == 1 and b_data.ndim == 2:
            _accum(a, b_data @ g)
            _accum(b, np.outer(a_data, g))
        else:
            _accum(a, g * b_data)
            _accum(b, g * a_data)

    return _make(a_data @ b_data, (a, b), backward, "matmul")


def sigmoid(a):
    out_data = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        _accum(a, g * out_data * (1.0 - out_data))

    return _make(out_data, (a,), backward, "sigmoid")


def tanh(a):
    out_data = np.tanh(a.data)

    def backward(g):
        _accum(a, g * (1.0 - out_data * out_data))

    return _make(out_data, (a,), backward, "tanh")


def relu(a):
    mask = a.data > 0

    def backward(g):
        _accum(a, g * mask)

    return _make(np.where(mask, a.data, 0.0), (a,), backward, "relu")


def exp(a):
    out_data = np.exp(a.data)

    def backward(g):
        _accum(a, g * out_data)

    return _make(out_data, (a,), backward, "exp")


def softplus(a):
    """log(1 + e^x), computed stably; derivative is sigmoid(x)."""
    out_data = np.logaddexp(0.0, a.data)
    sig = 1.0 / (1.0 + np.exp(-a.data))

    def backward(g):
        _accum(a, g * sig)

    return _make(out_data, (a,), backward, "softplus")


def square(a):
    a_data = a.data

    def backward(g):
        _accum(a, g * 2.0 * a_data)

    return _make(a_data * a_data, (a,), backward, "square")


def mean(a):
    n = a.data.size
    if n == 0:
        raise ShapeError("mean: empty tensor")

    def backward(g):
        _accum(a, np.full(a.data.shape, float(g) / n))

    return _make(a.data.mean(), (a,), backward, "mean")


def total_sum(a):
    def backward(g):
        _accum(a, np.full(a.data.shape, float(g)))

    return _make(a.data.sum(), (a,), backward, "sum")


def max_over_axis(a, axis):
    """Maximum along one axis; gradient routes to the first argmax."""
    if a.data.ndim == 0:
        raise ShapeError("max_over_axis: tensor has no axes")
    idx = np.argmax(a.data, axis=axis)

    def backward(g):
        full = np.zeros_like(a.data)
        grid = list(np.indices(idx.shape))
        grid.insert(axis if axis >= 0 else a.data.ndim + axis, idx)
        full[tuple(grid)] = g
        _accum(a, full)

    return _make(np.max(a.data, axis=axis), (a,), backward, "max")


def concat(tensors, axis=0):
    tensors = list(tensors)
    if not tensors:
        raise ShapeError("concat: empty input list")
    base = list(tensors[0].shape)
    for t in tensors[1:]:
        other = list(t.shape)
        if len(other) != len(base) or any(
            i != axis and other[i] != base[i] for i in range(len(base))
        ):
            raise ShapeError(f"concat: mismatched shapes {tensors[0].shape} vs {t.shape}")
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            _accum(t, g[tuple(sl)])

    return _make(
        np.concatenate([t.data for t in tensors], axis=axis), tensors, backward, "concat"
    )


def slice_axis(a, start, stop, axis=0):
    """Contiguous slice [start:stop) along one axis."""
    dim = a.data.shape[axis] if a.data.ndim > 0 else 0
    if not (0 <= start < stop <= dim):
        raise ShapeError(f"slice: [{start}:{stop}) invalid for axis {axis} of {a.shape}")
    sl = [slice(None)] * a.data.ndim
    sl[axis] = slice(start, stop)
    sl = tuple(sl)

    def backward(g):
        full = np.zeros_like(a.data)
        full[sl] = g
        _accum(a, full)

    return _make(a.data[sl].copy(), (a,), backward, "slice")


def stop_gradient(a):
    return a.detach()


def stack_rows(tensors):
    """Concatenate (1, d) row tensors into an (n, d) matrix."""
    return concat(tensors, axis=0)

"""Dense tensors with reverse-mode automatic differentiation.

A ``Tape`` records every operation whose inputs are grad-relevant; calling
``Tape.gradients`` on a scalar loss replays the records in reverse and
accumulates gradients by summation in deterministic tape order.  Tensors
not attached to any tape are plain immutable value holders and are safe to
share across threads; a tape itself is single-threaded.
"""

from __future__ import annotations

import threading

import numpy as np

DTYPE = np.float64


class ShapeError(ValueError):
    """Raised when operand shapes do not conform to an op's rule."""


class GradCheckRefused(RuntimeError):
    """Raised when a graph contains stochastic ops and cannot be checked."""


def _shape_error(op, *shapes):
    return ShapeError(f"{op}: incompatible shapes {' and '.join(str(tuple(s)) for s in shapes)}")


class Tensor:
    """Dense n-dimensional float array, optionally attached to a tape."""

    __slots__ = ("data", "requires_grad", "_tape", "_node")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data, dtype=DTYPE)
        self.data = arr
        self.requires_grad = requires_grad
        self._tape = None
        self._node = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def detach(self):
        return Tensor(self.data.copy())

    def numpy(self):
        return self.data

    def __repr__(self):
        return f"Tensor(shape={self.shape}, tracked={self._tape is not None})"

    # arithmetic sugar; scalars and arrays are wrapped as constants
    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __rsub__(self, other):
        return sub(_as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other))

    def __rmul__(self, other):
        return mul(_as_tensor(other), self)

    def __neg__(self):
        return mul(self, _as_tensor(-1.0))

    def __truediv__(self, other):
        return div(self, _as_tensor(other))

    def __rtruediv__(self, other):
        return div(_as_tensor(other), self)

    def __matmul__(self, other):
        return matmul(self, _as_tensor(other))

    @property
    def T(self):
        return transpose(self)

    def tanh(self):
        return tanh(self)

    def sigmoid(self):
        return sigmoid(self)

    def log(self):
        return log(self)

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def clip(self, lo, hi):
        return clip(self, lo, hi)


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)


class Record:
    """One tape entry: op kind, input/output node ids, backward closure."""

    __slots__ = ("op", "inputs", "output", "backward")

    def __init__(self, op, inputs, output, backward):
        self.op = op
        self.inputs = inputs
        self.output = output
        self.backward = backward


_STATE = threading.local()


def active_tape():
    stack = getattr(_STATE, "tapes", None)
    return stack[-1] if stack else None


class Tape:
    """Ordered record of operations; inputs always precede their outputs."""

    def __init__(self):
        self.records = []
        self._next_node = 0
        self._leaf_nodes = {}   # id(tensor) -> node id
        self._leaf_tensors = {}  # node id -> tensor (kept alive for grad lookup)

    def __enter__(self):
        stack = getattr(_STATE, "tapes", None)
        if stack is None:
            stack = _STATE.tapes = []
        stack.append(self)
        return self

    def __exit__(self, *exc):
        _STATE.tapes.pop()
        return False

    def _new_node(self):
        n = self._next_node
        self._next_node += 1
        return n

    def node_of(self, tensor):
        """Node id of ``tensor`` on this tape, registering leaves lazily."""
        if tensor._tape is self:
            return tensor._node
        key = id(tensor)
        node = self._leaf_nodes.get(key)
        if node is None:
            node = self._new_node()
            self._leaf_nodes[key] = node
            self._leaf_tensors[node] = tensor
        return node

    def node_for_leaf(self, tensor):
        """Node id of a leaf tensor, or None if it never touched this tape."""
        if tensor._tape is self:
            return tensor._node
        return self._leaf_nodes.get(id(tensor))

    def op_kinds(self):
        return {r.op for r in self.records}

    def gradients(self, loss):
        """Gradient arrays for every node reachable from ``loss``.

        Accumulation is plain summation in reverse tape order, so repeated
        calls on the same tape are bitwise identical.
        """
        if loss._tape is not self:
            raise ValueError("loss tensor is not an output of this tape")
        if loss.data.ndim != 0 and loss.data.size != 1:
            raise ShapeError(f"backward: loss must be scalar, got shape {loss.shape}")
        grads = {loss._node: np.ones_like(loss.data)}
        for rec in reversed(self.records):
            g_out = grads.get(rec.output)
            if g_out is None:
                continue
            for node, g in zip(rec.inputs, rec.backward(g_out)):
                if g is None:
                    continue
                if node in grads:
                    grads[node] = grads[node] + g
                else:
                    grads[node] = g
        return grads


# test hook: map op kind -> scale factor applied to its input gradients
_CORRUPTION = {}


def _apply(op, inputs, out_data, backward):
    """Create the output tensor and record the op if grad-relevant."""
    tape = active_tape()
    out = Tensor(out_data)
    if tape is not None and any(
        x.requires_grad or x._tape is tape for x in inputs
    ):
        nodes = [tape.node_of(x) for x in inputs]
        out._tape = tape
        out._node = tape._new_node()
        if op in _CORRUPTION:
            factor = _CORRUPTION[op]
            inner = backward

            def backward(g, _inner=inner, _f=factor):
                return tuple(None if gi is None else gi * _f for gi in _inner(g))

        tape.records.append(Record(op, nodes, out._node, backward))
    return out


def _unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` (inverse of numpy broadcasting)."""
    if grad.shape == tuple(shape):
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# ---------------------------------------------------------------------------
# elementwise and arithmetic ops
# ---------------------------------------------------------------------------

def add(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data + b.data
    except ValueError:
        raise _shape_error("add", a.shape, b.shape) from None
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return _apply("add", [a, b], out, backward)


def sub(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data - b.data
    except ValueError:
        raise _shape_error("sub", a.shape, b.shape) from None
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(-g, sb)

    return _apply("sub", [a, b], out, backward)


def mul(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data * b.data
    except ValueError:
        raise _shape_error("mul", a.shape, b.shape) from None
    sa, sb = a.shape, b.shape
    da, db = a.data, b.data

    def backward(g):
        return _unbroadcast(g * db, sa), _unbroadcast(g * da, sb)

    return _apply("mul", [a, b], out, backward)


def div(a, b):
    a, b = _as_tensor(a), _as_tensor(b)
    try:
        out = a.data / b.data
    except ValueError:
        raise _shape_error("div", a.shape, b.shape) from None
    sa, sb = a.shape, b.shape
    da, db = a.data, b.data

    def backward(g):
        return _unbroadcast(g / db, sa), _unbroadcast(-g * da / (db * db), sb)

    return _apply("div", [a, b], out, backward)


def sqrt(x):
    x = _as_tensor(x)
    out = np.sqrt(x.data)

    def backward(g, _y=out):
        return (g * 0.5 / _y,)

    return _apply("sqrt", [x], out, backward)


def matmul(a, b):
    """Matrix product for 2D@2D, 1D@2D and 2D@1D operands."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim not in (1, 2) or b.ndim not in (1, 2) or (a.ndim == 1 and b.ndim == 1):
        raise _shape_error("matmul", a.shape, b.shape)
    if a.shape[-1] != b.shape[0]:
        raise _shape_error("matmul", a.shape, b.shape)
    out = a.data @ b.data
    da, db = a.data, b.data

    def backward(g):
        if da.ndim == 2 and db.ndim == 2:
            return g @ db.T, da.T @ g
        if da.ndim == 1:  # [k] @ [k,n] -> [n]
            return db @ g, np.outer(da, g)
        return np.outer(g, db), da.T @ g  # [m,k] @ [k] -> [m]

    return _apply("matmul", [a, b], out, backward)


def tanh(x):
    x = _as_tensor(x)
    out = np.tanh(x.data)

    def backward(g, _y=out):
        return (g * (1.0 - _y * _y),)

    return _apply("tanh", [x], out, backward)


def sigmoid(x):
    x = _as_tensor(x)
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ez = np.exp(d[~pos])
    out[~pos] = ez / (1.0 + ez)

    def backward(g, _y=out):
        return (g * _y * (1.0 - _y),)

    return _apply("sigmoid", [x], out, backward)


def log(x):
    x = _as_tensor(x)
    out = np.log(x.data)
    d = x.data

    def backward(g):
        return (g / d,)

    return _apply("log", [x], out, backward)


def clip(x, lo, hi):
    x = _as_tensor(x)
    out = np.clip(x.data, lo, hi)
    inside = (x.data > lo) & (x.data < hi)

    def backward(g):
        return (g * inside,)

    return _apply("clip", [x], out, backward)


# ---------------------------------------------------------------------------
# softmax
# ---------------------------------------------------------------------------

def softmax(x):
    """Numerically stabilized softmax over the last axis."""
    x = _as_tensor(x)
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g, _y=out):
        return (_y * (g - (g * _y).sum(axis=-1, keepdims=True)),)

    return _apply("softmax", [x], out, backward)


def masked_softmax(x, mask):
    """Softmax over the last axis restricted to positions where mask == 1.

    Masked positions get exactly zero weight.  ``mask`` is a constant array.
    """
    x = _as_tensor(x)
    m = np.asarray(mask, dtype=DTYPE)
    if m.shape != x.shape:
        raise _shape_error("masked_softmax", x.shape, m.shape)
    if not (m.sum(axis=-1) > 0).all():
        raise ShapeError("masked_softmax: at least one unmasked position required per row")
    z = np.where(m > 0, x.data, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z) * m
    out = e / e.sum(axis=-1, keepdims=True)

    def backward(g, _y=out):
        return (_y * (g - (g * _y).sum(axis=-1, keepdims=True)),)

    return _apply("masked_softmax", [x], out, backward)


# ---------------------------------------------------------------------------
# shape ops
# ---------------------------------------------------------------------------

def transpose(x):
    x = _as_tensor(x)
    if x.ndim != 2:
        raise _shape_error("transpose", x.shape)
    out = x.data.T.copy()

    def backward(g):
        return (g.T,)

    return _apply("transpose", [x], out, backward)


def reshape(x, shape):
    x = _as_tensor(x)
    orig = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise _shape_error("reshape", x.shape, shape) from None

    def backward(g):
        return (g.reshape(orig),)

    return _apply("reshape", [x], out, backward)


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: need at least one input")
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError:
        raise _shape_error("concat", *[t.shape for t in tensors]) from None
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return _apply("concat", tensors, out, backward)


def split(x, sizes, axis=0):
    """Inverse of concat: returns a list of tensors with the given sizes."""
    x = _as_tensor(x)
    if sum(sizes) != x.shape[axis]:
        raise _shape_error("split", x.shape, (sum(sizes),))
    offsets = np.cumsum([0] + list(sizes))
    parts = []
    for i, size in enumerate(sizes):
        sl = [slice(None)] * x.ndim
        sl[axis] = slice(offsets[i], offsets[i + 1])
        sl = tuple(sl)
        piece = x.data[sl].copy()
        full_shape = x.shape

        def backward(g, _sl=sl, _shape=full_shape):
            buf = np.zeros(_shape, dtype=DTYPE)
            buf[_sl] = g
            return (buf,)

        parts.append(_apply("split", [x], piece, backward))
    return parts


def sum_(x, axis=None, keepdims=False):
    x = _as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)
    shape = x.shape

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, shape).copy(),)

    return _apply("sum", [x], out, backward)


def mean(x, axis=None, keepdims=False):
    x = _as_tensor(x)
    out = x.data.mean(axis=axis, keepdims=keepdims)
    shape = x.shape
    count = x.size if axis is None else shape[axis]

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g / count, shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg / count, shape).copy(),)

    return _apply("mean", [x], out, backward)


def expand_dims(x, axis):
    x = _as_tensor(x)
    return reshape(x, np.expand_dims(x.data, axis).shape)


# ---------------------------------------------------------------------------
# gathers
# ---------------------------------------------------------------------------

def gather(table, indices):
    """Row gather: ``table[indices]`` for an index array of any rank."""
    table = _as_tensor(table)
    idx = np.asarray(indices, dtype=np.int64)
    if table.ndim != 2:
        raise _shape_error("gather", table.shape)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError(
            f"gather: index out of range [0, {table.shape[0]}) in {sorted({int(idx.min()), int(idx.max())})}"
        )
    out = table.data[idx]
    vshape = table.shape

    def backward(g):
        buf = np.zeros(vshape, dtype=DTYPE)
        np.add.at(buf, idx.reshape(-1), g.reshape(-1, vshape[1]))
        return (buf,)

    return _apply("gather", [table], out, backward)


def gather_rows(x, rows):
    """Select rows of a 2D tensor; gradient scatters back by row."""
    return gather(x, rows)


# ---------------------------------------------------------------------------
# dropout (stochastic; refused by grad_check)
# ---------------------------------------------------------------------------

def dropout(x, p, rng):
    """Inverted dropout: scales kept entries by 1/(1-p) at train time."""
    x = _as_tensor(x)
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout: p must be in [0, 1), got {p}")
    if p == 0.0:
        return x
    keep = (rng.random(x.shape) >= p).astype(DTYPE) / (1.0 - p)
    out = x.data * keep

    def backward(g):
        return (g * keep,)

    return _apply("dropout", [x], out, backward)


# ---------------------------------------------------------------------------
# parameters and module-level backward
# ---------------------------------------------------------------------------

class Parameter:
    """Named trainable tensor with gradient and Adam moment buffers."""

    __slots__ = ("name", "value", "grad", "m", "v")

    def __init__(self, name, data):
        self.name = name
        self.value = Tensor(data, requires_grad=True)
        self.grad = np.zeros_like(self.value.data)
        self.m = np.zeros_like(self.value.data)
        self.v = np.zeros_like(self.value.data)

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad[...] = 0.0

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.shape})"


def backward(tape, loss, params):
    """Gradients of a scalar loss for every parameter, keyed by name.

    Parameters unreachable from the loss get a zero gradient of their own
    shape.  Each parameter's ``grad`` buffer is overwritten.
    """
    params = list(params)
    names = [p.name for p in params]
    if len(set(names)) != len(names):
        raise ValueError("parameter names must be unique")
    node_grads = tape.gradients(loss)
    out = {}
    for p in params:
        node = tape.node_for_leaf(p.value)
        g = node_grads.get(node) if node is not None else None
        if g is None:
            g = np.zeros_like(p.value.data)
        p.grad = g
        out[p.name] = g
    return out

"""Dense float64 tensors with reverse-mode automatic differentiation.

The computation graph is recorded implicitly: every primitive that touches a
tensor with ``requires_grad=True`` creates a node holding references to its
operands and a backward rule. ``backward(loss)`` replays the recorded graph in
reverse topological order exactly once; a second call on the same graph raises
``StateError``.

Shape discipline is deliberately strict. Elementwise ``mul`` requires equal
shapes or a scalar operand; ``add`` additionally accepts a trailing-dimension
bias (``bias.shape == x.shape[-bias.ndim:]``). Any other mismatch raises
``ShapeError``. Explicit ``broadcast_to`` covers the remaining cases so that
every expansion is visible at the call site.
"""

from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, ShapeError, StateError

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference / finite differences)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """A dense float64 array plus optional participation in the gradient tape.

    ``data`` is never mutated by any primitive; optimizers may overwrite the
    buffer of a leaf parameter between training steps.
    """

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_consumed")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], Sequence[np.ndarray | None]] | None = None
        self._consumed = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a single-element tensor, got shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __neg__(self):
        return neg(self)

    def __sub__(self, other):
        return add(self, neg(_as_tensor(other)))

    def __rsub__(self, other):
        return add(neg(self), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)


def _as_tensor(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


def _is_scalar(t: Tensor) -> bool:
    return t.data.size == 1 and t.ndim <= 1


# ---------------------------------------------------------------------------
# elementwise arithmetic


def add(a, b) -> Tensor:
    """Sum with strict shapes: equal, scalar, or trailing-dimension bias."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape == b.shape:
        reduce_a = reduce_b = None
    elif _is_scalar(b):
        reduce_b = "scalar"
        reduce_a = None
    elif _is_scalar(a):
        reduce_a = "scalar"
        reduce_b = None
    elif b.ndim < a.ndim or (b.ndim == a.ndim and a.shape[-b.ndim:] == b.shape):
        if a.shape[a.ndim - b.ndim:] != b.shape:
            raise ShapeError(f"add: cannot combine shapes {a.shape} and {b.shape}")
        reduce_b = tuple(range(a.ndim - b.ndim))
        reduce_a = None
    elif a.ndim < b.ndim and b.shape[b.ndim - a.ndim:] == a.shape:
        reduce_a = tuple(range(b.ndim - a.ndim))
        reduce_b = None
    else:
        raise ShapeError(f"add: cannot combine shapes {a.shape} and {b.shape}")

    def backward(g):
        ga = _reduce_grad(g, a, reduce_a)
        gb = _reduce_grad(g, b, reduce_b)
        return ga, gb

    return _node(a.data + b.data, (a, b), backward)


def _reduce_grad(g, t: Tensor, how):
    if how is None:
        return g
    if how == "scalar":
        return np.sum(g).reshape(t.shape)
    return np.sum(g, axis=how).reshape(t.shape)


def neg(a) -> Tensor:
    a = _as_tensor(a)
    return _node(-a.data, (a,), lambda g: (-g,))


def mul(a, b) -> Tensor:
    """Elementwise product; shapes must match exactly or one operand is scalar."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape == b.shape:
        def backward(g):
            return g * b.data, g * a.data
    elif _is_scalar(b):
        def backward(g):
            return g * b.data, np.sum(g * a.data).reshape(b.shape)
    elif _is_scalar(a):
        def backward(g):
            return np.sum(g * b.data).reshape(a.shape), g * a.data
    else:
        raise ShapeError(f"mul: cannot combine shapes {a.shape} and {b.shape}")
    return _node(a.data * b.data, (a, b), backward)


def square(a) -> Tensor:
    a = _as_tensor(a)
    return _node(a.data * a.data, (a,), lambda g: (2.0 * a.data * g,))


def absolute(a) -> Tensor:
    a = _as_tensor(a)
    return _node(np.abs(a.data), (a,), lambda g: (np.sign(a.data) * g,))


# ---------------------------------------------------------------------------
# nonlinearities


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0  # subgradient at 0 is 0
    return _node(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    with np.errstate(over="ignore"):
        y = np.where(a.data >= 0, 1.0 / (1.0 + np.exp(-a.data)),
                     np.exp(a.data) / (1.0 + np.exp(a.data)))
    return _node(y, (a,), lambda g: (g * y * (1.0 - y),))


def cos(a) -> Tensor:
    a = _as_tensor(a)
    return _node(np.cos(a.data), (a,), lambda g: (-np.sin(a.data) * g,))


def sin(a) -> Tensor:
    a = _as_tensor(a)
    return _node(np.sin(a.data), (a,), lambda g: (np.cos(a.data) * g,))


# ---------------------------------------------------------------------------
# matrix products


def matmul(a, b) -> Tensor:
    """Matrix product of two rank-2 tensors [m,k] @ [k,n] -> [m,n]."""
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects rank-2 operands, got {a.shape} @ {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: inner dimensions disagree for {a.shape} @ {b.shape}")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return _node(a.data @ b.data, (a, b), backward)


def bmm(a, b) -> Tensor:
    """Batched matrix product.

    Accepted shapes: [B,m,k]@[B,k,n], [m,k]@[B,k,n] (left shared across the
    batch) and [B,m,k]@[k,n] (right shared). Result is [B,m,n].
    """
    a, b = _as_tensor(a), _as_tensor(b)
    if a.ndim == 3 and b.ndim == 3:
        if a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
            raise ShapeError(f"bmm: incompatible shapes {a.shape} @ {b.shape}")

        def backward(g):
            return g @ np.swapaxes(b.data, 1, 2), np.swapaxes(a.data, 1, 2) @ g
    elif a.ndim == 2 and b.ndim == 3:
        if a.shape[1] != b.shape[1]:
            raise ShapeError(f"bmm: incompatible shapes {a.shape} @ {b.shape}")

        def backward(g):
            return np.einsum("bmn,bkn->mk", g, b.data), a.data.T @ g
    elif a.ndim == 3 and b.ndim == 2:
        if a.shape[2] != b.shape[0]:
            raise ShapeError(f"bmm: incompatible shapes {a.shape} @ {b.shape}")

        def backward(g):
            return g @ b.data.T, np.einsum("bmk,bmn->kn", a.data, g)
    else:
        raise ShapeError(f"bmm expects rank-3 operands (one may be rank-2), got {a.shape} @ {b.shape}")

    return _node(a.data @ b.data, (a, b), backward)


# ---------------------------------------------------------------------------
# reductions and normalizations


def tsum(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    if axis is not None and not -a.ndim <= axis < a.ndim:
        raise ShapeError(f"sum: axis {axis} invalid for shape {a.shape}")

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        gg = g if keepdims else np.expand_dims(g, axis)
        return (np.broadcast_to(gg, a.shape).copy(),)

    return _node(np.sum(a.data, axis=axis, keepdims=keepdims), (a,), backward)


def tmean(a, axis: int | None = None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    n = a.data.size if axis is None else a.shape[axis]
    if n == 0:
        raise ShapeError(f"mean over an empty axis of shape {a.shape}")
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def softmax_axis(x, axis: int) -> Tensor:
    """Numerically stabilized softmax along ``axis`` (max-subtraction)."""
    x = _as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ShapeError(f"softmax: axis {axis} invalid for shape {x.shape}")
    if x.shape[axis] == 0:
        raise ShapeError(f"softmax over an empty axis of shape {x.shape}")
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g):
        dot = np.sum(g * y, axis=axis, keepdims=True)
        return (y * (g - dot),)

    return _node(y, (x,), backward)


def rms_norm(x, gamma, eps: float = 1e-6) -> Tensor:
    """y_i = gamma_i * x_i / sqrt(mean(x^2) + eps) over the last dimension."""
    x, gamma = _as_tensor(x), _as_tensor(gamma)
    if gamma.ndim != 1 or x.shape[-1] != gamma.shape[0]:
        raise ShapeError(f"rms_norm: last dim of {x.shape} must equal gamma length {gamma.shape}")
    d = x.shape[-1]
    rms = np.sqrt(np.mean(x.data * x.data, axis=-1, keepdims=True) + eps)
    inv = 1.0 / rms
    y = gamma.data * x.data * inv

    def backward(g):
        gg = g * gamma.data
        proj = np.sum(gg * x.data, axis=-1, keepdims=True)
        dx = gg * inv - x.data * proj * (inv ** 3) / d
        dgamma = np.sum(g * x.data * inv, axis=tuple(range(x.ndim - 1)))
        return dx, dgamma

    return _node(y, (x, gamma), backward)


# ---------------------------------------------------------------------------
# shape manipulation


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)
    shape = tuple(shape)
    if int(np.prod(shape, dtype=np.int64)) != a.data.size and -1 not in shape:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}")
    out = a.data.reshape(shape)
    return _node(out, (a,), lambda g: (g.reshape(a.shape),))


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    axes = tuple(axes)
    if sorted(axes) != list(range(a.ndim)):
        raise ShapeError(f"transpose: axes {axes} invalid for shape {a.shape}")
    inv = np.argsort(axes)
    return _node(np.transpose(a.data, axes), (a,), lambda g: (np.transpose(g, inv),))


def broadcast_to(a, shape) -> Tensor:
    """Explicitly expand size-1 axes of ``a`` to ``shape`` (rank must match)."""
    a = _as_tensor(a)
    shape = tuple(shape)
    if a.ndim != len(shape):
        raise ShapeError(f"broadcast_to: rank mismatch {a.shape} -> {shape}")
    expanded = []
    for ax, (have, want) in enumerate(zip(a.shape, shape)):
        if have == want:
            continue
        if have == 1:
            expanded.append(ax)
        else:
            raise ShapeError(f"broadcast_to: cannot expand {a.shape} to {shape}")
    exp = tuple(expanded)

    def backward(g):
        return (np.sum(g, axis=exp, keepdims=True),)

    return _node(np.broadcast_to(a.data, shape).copy(), (a,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat of an empty tensor list")
    axis = axis % tensors[0].ndim
    base = list(tensors[0].shape)
    for t in tensors[1:]:
        other = list(t.shape)
        if len(other) != len(base):
            raise ShapeError(f"concat: rank mismatch {tensors[0].shape} vs {t.shape}")
        if other[:axis] + other[axis + 1:] != base[:axis] + base[axis + 1:]:
            raise ShapeError(f"concat: shapes {tensors[0].shape} and {t.shape} differ off axis {axis}")
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        pieces = []
        for i in range(len(tensors)):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(int(offsets[i]), int(offsets[i + 1]))
            pieces.append(g[tuple(sl)])
        return tuple(pieces)

    return _node(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def stack(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    if not tensors:
        raise ShapeError("stack of an empty tensor list")
    for t in tensors[1:]:
        if t.shape != tensors[0].shape:
            raise ShapeError(f"stack: shapes {tensors[0].shape} and {t.shape} differ")

    def backward(g):
        moved = np.moveaxis(g, axis, 0)
        return tuple(moved[i] for i in range(len(tensors)))

    return _node(np.stack([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def getitem(a, key) -> Tensor:
    """Basic indexing (ints and slices only); backward scatters into zeros."""
    a = _as_tensor(a)
    if not isinstance(key, tuple):
        key = (key,)
    for k in key:
        if not isinstance(k, (int, np.integer, slice)):
            raise ShapeError(f"getitem supports ints and slices only, got {type(k).__name__}")
    out = a.data[key]

    def backward(g):
        dx = np.zeros_like(a.data)
        dx[key] = g
        return (dx,)

    return _node(out.copy(), (a,), backward)


# ---------------------------------------------------------------------------
# reverse pass


def backward(loss: Tensor) -> None:
    """Populate ``grad`` on every participating requires_grad tensor.

    The recorded graph is consumed: calling backward twice through the same
    interior nodes raises ``StateError``.
    """
    if not isinstance(loss, Tensor):
        raise TypeError("backward expects a Tensor")
    if loss.data.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not loss.requires_grad:
        raise ValueError("loss does not depend on any requires_grad tensor")

    order: list[Tensor] = []
    visited: set[int] = set()
    stack_: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack_:
        node, expanded = stack_.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        if node._consumed:
            raise StateError("backward called on an already-consumed graph")
        stack_.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in visited:
                stack_.append((p, False))

    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward is None:
            continue
        node._consumed = True
        grads = node._backward(node.grad)
        for parent, g in zip(node._parents, grads):
            if not parent.requires_grad or g is None:
                continue
            if parent.grad is None:
                parent.grad = np.zeros_like(parent.data)
            parent.grad = parent.grad + g


def grad_check(f, x: Tensor, eps: float = 1e-5) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``f`` maps a tensor to a scalar tensor. Returns
    max_i |analytic_i - numeric_i| / max(1, |analytic_i|).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    probe = Tensor(x.data.copy(), requires_grad=True)
    out = f(probe)
    if not np.all(np.isfinite(out.data)):
        raise NumericError("grad_check: forward pass produced non-finite values")
    backward(out)
    analytic = probe.grad.copy() if probe.grad is not None else np.zeros_like(probe.data)

    flat = x.data.reshape(-1)
    numeric = np.zeros_like(flat)
    with no_grad():
        for i in range(flat.size):
            bumped = flat.copy()
            bumped[i] += eps
            hi = f(Tensor(bumped.reshape(x.shape))).item()
            bumped[i] -= 2 * eps
            lo = f(Tensor(bumped.reshape(x.shape))).item()
            if not (np.isfinite(hi) and np.isfinite(lo)):
                raise NumericError("grad_check: finite-difference probe produced non-finite values")
            numeric[i] = (hi - lo) / (2 * eps)
    numeric = numeric.reshape(x.shape)
    denom = np.maximum(1.0, np.abs(analytic))
    return float(np.max(np.abs(analytic - numeric) / denom))

"""Dense float64 tensors with a recorded graph for reverse-mode differentiation.

Every primitive records its parents and a backward rule on the result.  The
backward rules are written with the same primitives, so running them while
recording is enabled yields gradients that can be differentiated again
(``create_graph=True``).  That closure property is what the gradient penalty
relies on.

Recording is per thread; nothing here is shared between threads.
"""
from __future__ import annotations

import itertools
import threading
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

LEAKY_SLOPE = 0.2

_state = threading.local()
_sequence = itertools.count()


class NonFiniteError(FloatingPointError):
    """A primitive produced NaN or Inf."""

    def __init__(self, op: str, detail: str = ""):
        self.op = op
        msg = f"non-finite value produced by '{op}'"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class DetachedError(RuntimeError):
    """Differentiation was requested through a value that was never recorded."""


def is_recording() -> bool:
    return getattr(_state, "recording", True)


@contextmanager
def recording(enabled: bool):
    prev = is_recording()
    _state.recording = enabled
    try:
        yield
    finally:
        _state.recording = prev


def no_grad():
    return recording(False)


BackwardFn = Callable[["Tensor", "Tensor"], Sequence["Tensor | None"]]


class Tensor:
    """A float64 array plus its node in the recorded graph.

    ``seq`` is the recording order; a node's parents always carry smaller
    sequence numbers, so sorting by ``seq`` is a valid evaluation order.
    """

    __slots__ = ("data", "requires_grad", "parents", "backward_fn", "op", "seq", "__weakref__")

    __array_priority__ = 100.0

    def __init__(self, data, requires_grad: bool = False):
        arr = np.array(data, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError("tensor", "input data contains NaN or Inf")
        self.data = arr
        self.requires_grad = requires_grad
        self.parents: tuple[Tensor, ...] = ()
        self.backward_fn: BackwardFn | None = None
        self.op = "leaf"
        self.seq = next(_sequence)

    # -- construction helpers -------------------------------------------------
    @classmethod
    def _result(cls, data: np.ndarray, parents: tuple[Tensor, ...], backward_fn: BackwardFn, op: str) -> Tensor:
        if not np.all(np.isfinite(data)):
            raise NonFiniteError(op)
        out = cls.__new__(Tensor)
        out.data = data
        out.seq = next(_sequence)
        out.op = op
        if is_recording() and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out.parents = parents
            out.backward_fn = backward_fn
        else:
            out.requires_grad = False
            out.parents = ()
            out.backward_fn = None
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor({self.data!r}{flag})"

    def __len__(self) -> int:
        return len(self.data)

    # -- operator sugar -------------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, exponent: float):
        return power(self, exponent)

    def __matmul__(self, other):
        return matmul(self, other)

    @property
    def T(self) -> Tensor:
        return transpose(self)

    def sum(self, axis=None, keepdims: bool = False) -> Tensor:
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> Tensor:
        return mean(self, axis, keepdims)

    def reshape(self, *shape) -> Tensor:
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_broadcast(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ValueError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# -- shape plumbing -----------------------------------------------------------
def broadcast_to(x, shape) -> Tensor:
    x = as_tensor(x)
    shape = tuple(shape)
    if x.shape == shape:
        return x
    return Tensor._result(np.broadcast_to(x.data, shape).copy(), (x,),
                          lambda g, out: (sum_to(g, x.shape),), "broadcast_to")


def sum_to(x, shape) -> Tensor:
    """Sum ``x`` down to ``shape``; the adjoint of broadcasting."""
    x = as_tensor(x)
    shape = tuple(shape)
    if x.shape == shape:
        return x
    lead = x.ndim - len(shape)
    axes = tuple(range(lead)) + tuple(
        i + lead for i, n in enumerate(shape) if n == 1 and x.shape[i + lead] != 1
    )
    data = x.data.sum(axis=axes, keepdims=True)
    if lead:
        data = data.reshape(data.shape[lead:])
    return Tensor._result(data, (x,), lambda g, out: (broadcast_to(g, x.shape),), "sum_to")


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    try:
        data = x.data.reshape(shape)
    except ValueError:
        raise ValueError(f"reshape: cannot reshape {x.shape} into {tuple(shape)}") from None
    return Tensor._result(data, (x,), lambda g, out: (reshape(g, x.shape),), "reshape")


def transpose(x) -> Tensor:
    x = as_tensor(x)
    if x.ndim != 2:
        raise ValueError(f"transpose: expected a 2-D tensor, got shape {x.shape}")
    return Tensor._result(x.data.T.copy(), (x,), lambda g, out: (transpose(g),), "transpose")


# -- elementwise arithmetic ---------------------------------------------------
def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("add", a, b)
    return Tensor._result(a.data + b.data, (a, b),
                          lambda g, out: (sum_to(g, a.shape), sum_to(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("sub", a, b)
    return Tensor._result(a.data - b.data, (a, b),
                          lambda g, out: (sum_to(g, a.shape), sum_to(neg(g), b.shape)), "sub")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return Tensor._result(-a.data, (a,), lambda g, out: (neg(g),), "neg")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("mul", a, b)
    return Tensor._result(a.data * b.data, (a, b),
                          lambda g, out: (sum_to(g * b, a.shape), sum_to(g * a, b.shape)), "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast("div", a, b)
    if np.any(b.data == 0):
        raise NonFiniteError("div", "division by zero")

    def backward(g, out):
        return sum_to(g / b, a.shape), sum_to(neg(g * out / b), b.shape)

    return Tensor._result(a.data / b.data, (a, b), backward, "div")


def power(a, exponent: float) -> Tensor:
    a = as_tensor(a)
    exponent = float(exponent)
    if exponent == 2.0:
        return square(a)
    with np.errstate(all="ignore"):
        data = a.data ** exponent
    return Tensor._result(data, (a,), lambda g, out: (g * exponent * power(a, exponent - 1.0),), "pow")


def square(a) -> Tensor:
    a = as_tensor(a)
    return Tensor._result(a.data * a.data, (a,), lambda g, out: (g * a * 2.0,), "square")


def sqrt(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data < 0):
        raise NonFiniteError("sqrt", "negative input")

    def backward(g, out):
        if np.any(out.data == 0):
            raise NonFiniteError("sqrt.backward", "derivative undefined at zero")
        return (g / (out * 2.0),)

    return Tensor._result(np.sqrt(a.data), (a,), backward, "sqrt")


def exp(a) -> Tensor:
    a = as_tensor(a)
    with np.errstate(over="ignore"):
        data = np.exp(a.data)
    return Tensor._result(data, (a,), lambda g, out: (g * out,), "exp")


def log(a) -> Tensor:
    a = as_tensor(a)
    if np.any(a.data <= 0):
        raise ValueError("log: input must be strictly positive")
    return Tensor._result(np.log(a.data), (a,), lambda g, out: (g / a,), "log")


def sigmoid(a) -> Tensor:
    a = as_tensor(a)
    x = a.data
    # split form avoids overflow in exp for large |x|
    data = np.empty_like(x)
    pos = x >= 0
    data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    data[~pos] = ex / (1.0 + ex)
    return Tensor._result(data, (a,), lambda g, out: (g * out * (1.0 - out),), "sigmoid")


def tanh(a) -> Tensor:
    a = as_tensor(a)
    return Tensor._result(np.tanh(a.data), (a,), lambda g, out: (g * (1.0 - square(out)),), "tanh")


def leaky_relu(a, slope: float = LEAKY_SLOPE) -> Tensor:
    a = as_tensor(a)
    scale = np.where(a.data > 0, 1.0, slope)
    return Tensor._result(a.data * scale, (a,), lambda g, out: (g * Tensor(scale),), "leaky_relu")


def clamp(a, lo: float, hi: float) -> Tensor:
    """Clamp into ``[lo, hi]``; the gradient is zero where clamping is active."""
    a = as_tensor(a)
    mask = ((a.data >= lo) & (a.data <= hi)).astype(np.float64)
    return Tensor._result(np.clip(a.data, lo, hi), (a,), lambda g, out: (g * Tensor(mask),), "clamp")


# -- reductions and linear algebra --------------------------------------------
def _normalize_axis(axis, ndim: int) -> tuple[int, ...]:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def _expand_back(g: Tensor, in_shape: tuple[int, ...], axes: tuple[int, ...], keepdims: bool) -> Tensor:
    if not keepdims:
        kept = tuple(1 if i in axes else n for i, n in enumerate(in_shape))
        g = reshape(g, kept)
    return broadcast_to(g, in_shape)


def tsum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axis(axis, a.ndim)
    data = np.asarray(a.data.sum(axis=axes, keepdims=keepdims), dtype=np.float64)
    return Tensor._result(data, (a,), lambda g, out: (_expand_back(g, a.shape, axes, keepdims),), "sum")


def mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = as_tensor(a)
    axes = _normalize_axis(axis, a.ndim)
    count = int(np.prod([a.shape[i] for i in axes])) if axes else 1
    if count == 0:
        raise ValueError("mean: empty reduction")
    data = np.asarray(a.data.mean(axis=axes, keepdims=keepdims), dtype=np.float64)
    return Tensor._result(
        data, (a,), lambda g, out: (_expand_back(g, a.shape, axes, keepdims) * (1.0 / count),), "mean"
    )


def l2_norm(a, axis=None, keepdims: bool = False, eps: float = 0.0) -> Tensor:
    """Euclidean norm; ``eps`` is added under the root when nonzero."""
    s = tsum(square(a), axis=axis, keepdims=keepdims)
    if eps:
        s = s + eps
    return sqrt(s)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    return Tensor._result(a.data @ b.data, (a, b),
                          lambda g, out: (matmul(g, transpose(b)), matmul(transpose(a), g)), "matmul")


def affine(x, weight, bias=None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight`` stored as (out_features, in_features)."""
    out = matmul(x, transpose(weight))
    return out if bias is None else out + bias


# -- differentiation ------------------------------------------------------------
def _topological(output: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(output, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))
    return order


def grad(output: Tensor, wrt: Iterable[Tensor], create_graph: bool = False) -> list[Tensor]:
    """Reverse-mode gradients of a scalar ``output`` with respect to ``wrt``.

    Tensors in ``wrt`` that did not take part in computing ``output`` get a
    zero gradient.  With ``create_graph`` the returned gradients are
    themselves recorded and can be differentiated again.
    """
    wrt = list(wrt)
    if output.size != 1:
        raise ValueError(f"grad: output must be a scalar, got shape {output.shape}")
    if not output.requires_grad:
        raise DetachedError("grad: output is not attached to any recorded graph")

    wanted = {id(t) for t in wrt}
    grads: dict[int, Tensor] = {id(output): Tensor(np.ones_like(output.data))}
    with recording(create_graph):
        for node in reversed(_topological(output)):
            keep = id(node) in wanted or not node.parents
            g = grads.get(id(node)) if keep else grads.pop(id(node), None)
            if g is None or node.backward_fn is None:
                continue
            for parent, pg in zip(node.parents, node.backward_fn(g, node)):
                if pg is None or not parent.requires_grad:
                    continue
                prev = grads.get(id(parent))
                grads[id(parent)] = pg if prev is None else prev + pg

    result = []
    for t in wrt:
        g = grads.get(id(t))
        result.append(g if g is not None else Tensor(np.zeros_like(t.data)))
    return result


def backward(output: Tensor, wrt: Iterable[Tensor], create_graph: bool = False) -> list[Tensor]:
    """Alias of :func:`grad` matching the optimizer-facing vocabulary."""
    return grad(output, wrt, create_graph=create_graph)

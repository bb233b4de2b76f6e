"""Reverse-mode automatic differentiation over dense float64 tensors.

A fresh graph ("tape") is built on every forward pass: each operation returns
a :class:`Node` holding its numpy value, references to its parents and a
closure that routes the upstream gradient to them. ``backward`` runs a
reverse topological sweep and returns the gradient for every requested leaf.

Conventions
-----------
* all values are float64 numpy arrays (scalars are 0-d arrays),
* broadcasting follows numpy's right-aligned rules; gradients of broadcast
  operands are summed back to the operand shape,
* a tape is confined to one thread; independent tapes are independent.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Node",
    "TapeError",
    "ShapeError",
    "DomainError",
    "constant",
    "leaf",
    "backward",
    "add",
    "subtract",
    "multiply",
    "divide",
    "negate",
    "power",
    "exp",
    "log",
    "sqrt",
    "absolute",
    "sigmoid",
    "softplus",
    "tanh",
    "relu",
    "matmul",
    "sum_",
    "mean",
    "variance",
    "concatenate",
    "reshape",
    "transpose",
    "slice_",
    "gather",
    "sort",
    "softmax",
    "pairwise_distance",
    "sigmoid_np",
    "softplus_np",
]


class TapeError(Exception):
    """Contract violation in graph construction or traversal."""


class ShapeError(TapeError):
    """Operand shapes incompatible for the requested operation."""


class DomainError(TapeError):
    """Operation evaluated outside its mathematical domain."""


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


class Node:
    """One tensor in the computation graph."""

    __slots__ = ("value", "parents", "grad", "requires_grad", "_backward", "name")

    def __init__(
        self,
        value,
        parents: Sequence["Node"] = (),
        backward: Callable[[np.ndarray], None] | None = None,
        requires_grad: bool | None = None,
        name: str | None = None,
    ):
        self.value = _as_array(value)
        self.parents = tuple(parents)
        if requires_grad is None:
            requires_grad = any(p.requires_grad for p in self.parents)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._backward = backward
        self.name = name

    @property
    def shape(self) -> tuple:
        return self.value.shape

    def accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def __repr__(self):
        tag = f" {self.name!r}" if self.name else ""
        return f"Node(shape={self.value.shape}{tag})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return subtract(self, other)

    def __rsub__(self, other):
        return subtract(other, self)

    def __mul__(self, other):
        return multiply(self, other)

    def __rmul__(self, other):
        return multiply(other, self)

    def __truediv__(self, other):
        return divide(self, other)

    def __rtruediv__(self, other):
        return divide(other, self)

    def __neg__(self):
        return negate(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return slice_(self, key)


def constant(value, name: str | None = None) -> Node:
    """A node that takes no gradient (noise draws, expert data, design matrices)."""
    return Node(value, requires_grad=False, name=name)


def leaf(value, name: str | None = None) -> Node:
    """A trainable leaf; ``backward`` reports its gradient."""
    return Node(value, requires_grad=True, name=name)


def as_node(value) -> Node:
    return value if isinstance(value, Node) else constant(value)


def _check_broadcast(op: str, a_shape: tuple, b_shape: tuple) -> None:
    try:
        np.broadcast_shapes(a_shape, b_shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a_shape} and {b_shape} are not broadcastable")


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient over the axes that broadcasting expanded."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _topo_order(root: Node) -> list:
    """Iterative post-order DFS; deterministic for a fixed graph."""
    order: list[Node] = []
    seen: set[int] = set()
    stack: list[tuple[Node, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def backward(loss: Node, leaves: Iterable[Node] = ()) -> dict:
    """Reverse sweep from a scalar loss.

    Returns ``{leaf: gradient}`` for every node in ``leaves``; leaves the
    sweep never reaches get zeros. Also populates ``node.grad`` along the way.
    """
    if loss.value.shape != ():
        raise TapeError(f"backward requires a scalar loss, got shape {loss.value.shape}")
    order = _topo_order(loss)
    for node in order:
        node.grad = None
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(order):
        if node.grad is None or node._backward is None:
            continue
        node._backward(node.grad)
    return {
        lf: (lf.grad if lf.grad is not None else np.zeros_like(lf.value))
        for lf in leaves
    }


# ---------------------------------------------------------------------------
# elementwise arithmetic
# ---------------------------------------------------------------------------


def add(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    _check_broadcast("add", a.shape, b.shape)

    def bwd(g):
        a.accumulate(_unbroadcast(g, a.shape))
        b.accumulate(_unbroadcast(g, b.shape))

    return Node(a.value + b.value, (a, b), bwd)


def subtract(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    _check_broadcast("subtract", a.shape, b.shape)

    def bwd(g):
        a.accumulate(_unbroadcast(g, a.shape))
        b.accumulate(_unbroadcast(-g, b.shape))

    return Node(a.value - b.value, (a, b), bwd)


def multiply(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    _check_broadcast("multiply", a.shape, b.shape)

    def bwd(g):
        a.accumulate(_unbroadcast(g * b.value, a.shape))
        b.accumulate(_unbroadcast(g * a.value, b.shape))

    return Node(a.value * b.value, (a, b), bwd)


def divide(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    _check_broadcast("divide", a.shape, b.shape)

    def bwd(g):
        a.accumulate(_unbroadcast(g / b.value, a.shape))
        b.accumulate(_unbroadcast(-g * a.value / (b.value * b.value), b.shape))

    return Node(a.value / b.value, (a, b), bwd)


def negate(a) -> Node:
    a = as_node(a)

    def bwd(g):
        a.accumulate(-g)

    return Node(-a.value, (a,), bwd)


def power(a, p: float) -> Node:
    """Elementwise a**p for a constant exponent."""
    a = as_node(a)
    p = float(p)
    out = a.value**p

    def bwd(g):
        if p == 0.0:
            a.accumulate(np.zeros_like(a.value))
        else:
            a.accumulate(g * p * a.value ** (p - 1.0))

    return Node(out, (a,), bwd)


def exp(a) -> Node:
    a = as_node(a)
    out = np.exp(a.value)

    def bwd(g):
        a.accumulate(g * out)

    return Node(out, (a,), bwd)


def log(a) -> Node:
    a = as_node(a)
    if np.any(a.value < 0.0):
        raise DomainError("log: negative input")

    def bwd(g):
        a.accumulate(g / a.value)

    return Node(np.log(a.value), (a,), bwd)


def sqrt(a) -> Node:
    a = as_node(a)
    if np.any(a.value < 0.0):
        raise DomainError("sqrt: negative input")
    out = np.sqrt(a.value)

    def bwd(g):
        a.accumulate(g * 0.5 / out)

    return Node(out, (a,), bwd)


def absolute(a) -> Node:
    """|a|; the subgradient at 0 is 0."""
    a = as_node(a)

    def bwd(g):
        a.accumulate(g * np.sign(a.value))

    return Node(np.abs(a.value), (a,), bwd)


def sigmoid_np(x: np.ndarray) -> np.ndarray:
    """Numerically stable logistic function on raw arrays."""
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softplus_np(x: np.ndarray) -> np.ndarray:
    """log(1 + exp(x)) evaluated as log1p(exp(-|x|)) + max(x, 0)."""
    x = np.asarray(x, dtype=np.float64)
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


def sigmoid(a) -> Node:
    a = as_node(a)
    out = sigmoid_np(np.atleast_1d(a.value)).reshape(a.shape)

    def bwd(g):
        a.accumulate(g * out * (1.0 - out))

    return Node(out, (a,), bwd)


def softplus(a) -> Node:
    a = as_node(a)

    def bwd(g):
        a.accumulate(g * sigmoid_np(np.atleast_1d(a.value)).reshape(a.shape))

    return Node(softplus_np(a.value), (a,), bwd)


def tanh(a) -> Node:
    a = as_node(a)
    out = np.tanh(a.value)

    def bwd(g):
        a.accumulate(g * (1.0 - out * out))

    return Node(out, (a,), bwd)


def relu(a) -> Node:
    a = as_node(a)

    def bwd(g):
        a.accumulate(g * (a.value > 0.0))

    return Node(np.maximum(a.value, 0.0), (a,), bwd)


# ---------------------------------------------------------------------------
# linear algebra and reductions
# ---------------------------------------------------------------------------


def matmul(a, b) -> Node:
    a, b = as_node(a), as_node(b)
    if a.value.ndim < 2 or b.value.ndim < 2:
        raise ShapeError(f"matmul: operands must be >= 2-d, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: inner dimensions differ, {a.shape} @ {b.shape}")

    def bwd(g):
        a.accumulate(_unbroadcast(g @ b.value.swapaxes(-1, -2), a.shape))
        b.accumulate(_unbroadcast(a.value.swapaxes(-1, -2) @ g, b.shape))

    return Node(a.value @ b.value, (a, b), bwd)


def _axis_tuple(axis, ndim: int) -> tuple:
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(ax % ndim for ax in axis)


def _expand_for_reduce(g: np.ndarray, shape: tuple, axes: tuple) -> np.ndarray:
    full = list(g.shape)
    for ax in sorted(axes):
        full.insert(ax, 1)
    return np.broadcast_to(g.reshape(full), shape)


def sum_(a, axis=None) -> Node:
    a = as_node(a)
    axes = _axis_tuple(axis, a.value.ndim)

    def bwd(g):
        a.accumulate(_expand_for_reduce(g, a.shape, axes))

    return Node(a.value.sum(axis=axes or None), (a,), bwd)


def mean(a, axis=None) -> Node:
    a = as_node(a)
    axes = _axis_tuple(axis, a.value.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else a.value.size

    def bwd(g):
        a.accumulate(_expand_for_reduce(g, a.shape, axes) / count)

    return Node(a.value.mean(axis=axes or None), (a,), bwd)


def variance(a, axis=None) -> Node:
    """Population (divide-by-N) variance over the given axes."""
    a = as_node(a)
    axes = _axis_tuple(axis, a.value.ndim)
    count = int(np.prod([a.shape[ax] for ax in axes])) if axes else a.value.size
    mu = a.value.mean(axis=axes or None, keepdims=True)
    centered = a.value - mu

    def bwd(g):
        a.accumulate(_expand_for_reduce(g, a.shape, axes) * 2.0 * centered / count)

    return Node((centered**2).mean(axis=axes or None), (a,), bwd)


def concatenate(nodes: Sequence[Node], axis: int = -1) -> Node:
    nodes = [as_node(n) for n in nodes]
    ax = axis % nodes[0].value.ndim
    sizes = [n.shape[ax] for n in nodes]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for n, start, stop in zip(nodes, offsets[:-1], offsets[1:]):
            idx = [slice(None)] * g.ndim
            idx[ax] = slice(start, stop)
            n.accumulate(g[tuple(idx)])

    return Node(np.concatenate([n.value for n in nodes], axis=ax), tuple(nodes), bwd)


def reshape(a, shape) -> Node:
    a = as_node(a)

    def bwd(g):
        a.accumulate(g.reshape(a.shape))

    return Node(a.value.reshape(shape), (a,), bwd)


def transpose(a, axes) -> Node:
    a = as_node(a)
    inv = np.argsort(axes)

    def bwd(g):
        a.accumulate(g.transpose(inv))

    return Node(a.value.transpose(axes), (a,), bwd)


def slice_(a, key) -> Node:
    """Basic indexing (ints, slices, ellipsis); gradient scatters into place."""
    a = as_node(a)

    def bwd(g):
        full = np.zeros_like(a.value)
        full[key] = g
        a.accumulate(full)

    return Node(a.value[key], (a,), bwd)


def gather(a, indices: np.ndarray, axis: int = -1) -> Node:
    """take_along_axis with constant indices; duplicates accumulate on backward."""
    a = as_node(a)
    ax = axis % a.value.ndim
    indices = np.asarray(indices)
    moved_shape = a.shape[:ax] + a.shape[ax + 1 :] + (a.shape[ax],)

    def bwd(g):
        idx = np.moveaxis(np.broadcast_to(indices, g.shape), ax, -1)
        rows = np.moveaxis(g, ax, -1).reshape(-1, idx.shape[-1])
        idx = idx.reshape(rows.shape)
        acc = np.zeros((rows.shape[0], a.shape[ax]))
        np.add.at(acc, (np.arange(rows.shape[0])[:, None], idx), rows)
        a.accumulate(np.moveaxis(acc.reshape(moved_shape), -1, ax))

    return Node(np.take_along_axis(a.value, indices, axis=ax), (a,), bwd)


def sort(a, axis: int = -1) -> Node:
    """Ascending stable sort; the gradient follows the sort permutation."""
    a = as_node(a)
    ax = axis % a.value.ndim
    perm = np.argsort(a.value, axis=ax, kind="stable")

    def bwd(g):
        full = np.zeros_like(a.value)
        np.put_along_axis(full, perm, g, axis=ax)
        a.accumulate(full)

    return Node(np.take_along_axis(a.value, perm, axis=ax), (a,), bwd)


def softmax(a, axis: int = -1) -> Node:
    a = as_node(a)
    shifted = a.value - a.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bwd(g):
        inner = (g * out).sum(axis=axis, keepdims=True)
        a.accumulate(out * (g - inner))

    return Node(out, (a,), bwd)


def pairwise_distance(a, b) -> Node:
    """|a_i - b_j| over the last axes: [..., n] x [..., m] -> [..., n, m]."""
    a, b = as_node(a), as_node(b)
    diff = a.value[..., :, None] - b.value[..., None, :]

    def bwd(g):
        signed = g * np.sign(diff)
        a.accumulate(_unbroadcast(signed.sum(axis=-1), a.shape))
        b.accumulate(_unbroadcast(-signed.sum(axis=-2), b.shape))

    return Node(np.abs(diff), (a, b), bwd)

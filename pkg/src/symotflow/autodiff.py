"""Dense float64 tensors with reverse-mode automatic differentiation.

The op set is deliberately small: exactly what the coupling flow, the
Gaussian kernels and the training loss need. Graphs are define-by-run and
rebuilt every step; ``backward`` walks the tape once in reverse append
order. There is no broadcasting except scalar multiply and the explicit
row-wise bias add.
"""

from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NumericError(FloatingPointError):
    """An operation produced NaN or Inf; never silently propagated."""


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"non-finite values produced by '{op}'")


class Tensor:
    """A dense float64 array node on a define-by-run tape.

    ``parents`` and ``backward_fn`` are set by the ops below; leaves have
    neither. Gradients accumulate into ``grad`` (same shape as ``data``)
    across repeated backward calls until ``zero_grad`` resets them.
    """

    __slots__ = ("data", "requires_grad", "grad", "parents", "backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        _check_finite(arr, "tensor")
        self.data = arr
        self.requires_grad = requires_grad
        self.grad = None
        self.parents = ()
        self.backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy(), requires_grad=False)

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError(f"item() needs a scalar, got shape {self.data.shape}")
        return float(self.data.reshape(()))

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            # Copy: upstream buffers are shared across sibling parents.
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _result(data: np.ndarray, op: str, parents, backward_fn) -> Tensor:
    _check_finite(data, op)
    needs = any(p.requires_grad for p in parents)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.requires_grad = needs
    out.grad = None
    if needs:
        out.parents = tuple(parents)
        out.backward_fn = backward_fn
    else:
        out.parents = ()
        out.backward_fn = None
    return out


def _same_shape(a: Tensor, b: Tensor, op: str) -> None:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} differ")


# ---------------------------------------------------------------------------
# elementwise ops

def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "add")

    def bw(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(g)

    return _result(a.data + b.data, "add", (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "sub")

    def bw(g):
        if a.requires_grad:
            a._accumulate(g)
        if b.requires_grad:
            b._accumulate(-g)

    return _result(a.data - b.data, "sub", (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape(a, b, "mul")

    def bw(g):
        if a.requires_grad:
            a._accumulate(g * b.data)
        if b.requires_grad:
            b._accumulate(g * a.data)

    return _result(a.data * b.data, "mul", (a, b), bw)


def neg(a: Tensor) -> Tensor:
    def bw(g):
        if a.requires_grad:
            a._accumulate(-g)

    return _result(-a.data, "neg", (a,), bw)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def bw(g):
        if a.requires_grad:
            a._accumulate(g * c)

    return _result(a.data * c, "scale", (a,), bw)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - out_data * out_data))

    return _result(out_data, "tanh", (a,), bw)


def exp(a: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out_data = np.exp(a.data)

    def bw(g):
        if a.requires_grad:
            a._accumulate(g * out_data)

    return _result(out_data, "exp", (a,), bw)


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0

    def bw(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return _result(np.where(mask, a.data, 0.0), "relu", (a,), bw)


# ---------------------------------------------------------------------------
# linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ShapeError("matmul: both operands must be 2-D")
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: inner dims {a.data.shape} x {b.data.shape}")

    def bw(g):
        if a.requires_grad:
            a._accumulate(g @ b.data.T)
        if b.requires_grad:
            b._accumulate(a.data.T @ g)

    with np.errstate(over="ignore"):
        out_data = a.data @ b.data
    return _result(out_data, "matmul", (a, b), bw)


def add_bias(a: Tensor, bias: Tensor) -> Tensor:
    """Row-wise bias add: a[n, d] + bias[d]. The one sanctioned broadcast."""
    if a.data.ndim != 2 or bias.data.ndim != 1 or a.data.shape[1] != bias.data.shape[0]:
        raise ShapeError(f"add_bias: {a.data.shape} + {bias.data.shape}")

    def bw(g):
        if a.requires_grad:
            a._accumulate(g)
        if bias.requires_grad:
            bias._accumulate(g.sum(axis=0))

    return _result(a.data + bias.data, "add_bias", (a, bias), bw)


def select_cols(a: Tensor, idx) -> Tensor:
    """Gather columns of a 2-D tensor; backward scatter-adds into sources."""
    idx = np.asarray(idx, dtype=np.intp)
    if a.data.ndim != 2:
        raise ShapeError("select_cols: operand must be 2-D")
    if idx.size and (idx.min() < 0 or idx.max() >= a.data.shape[1]):
        raise ShapeError("select_cols: index out of range")

    def bw(g):
        if a.requires_grad:
            acc = np.zeros_like(a.data)
            np.add.at(acc, (slice(None), idx), g)
            a._accumulate(acc)

    return _result(a.data[:, idx], "select_cols", (a,), bw)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[0] != b.data.shape[0]:
        raise ShapeError(f"concat_cols: {a.data.shape} | {b.data.shape}")
    wa = a.data.shape[1]

    def bw(g):
        if a.requires_grad:
            a._accumulate(g[:, :wa])
        if b.requires_grad:
            b._accumulate(g[:, wa:])

    return _result(np.concatenate([a.data, b.data], axis=1), "concat_cols", (a, b), bw)


def pairwise_sqdist(a: Tensor, b: Tensor) -> Tensor:
    """Squared Euclidean distances between rows of a[m, d] and b[n, d].

    Uses the expanded form with a clamp at zero: catastrophic cancellation
    can yield tiny negatives for near-identical rows.
    """
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[1]:
        raise ShapeError(f"pairwise_sqdist: {a.data.shape} vs {b.data.shape}")
    an = np.sum(a.data * a.data, axis=1)
    bn = np.sum(b.data * b.data, axis=1)
    raw = an[:, None] + bn[None, :] - 2.0 * (a.data @ b.data.T)
    clamped = raw > 0.0

    def bw(g):
        gm = np.where(clamped, g, 0.0)
        if a.requires_grad:
            a._accumulate(2.0 * (a.data * gm.sum(axis=1)[:, None] - gm @ b.data))
        if b.requires_grad:
            b._accumulate(2.0 * (b.data * gm.sum(axis=0)[:, None] - gm.T @ a.data))

    return _result(np.where(clamped, raw, 0.0), "pairwise_sqdist", (a, b), bw)


# ---------------------------------------------------------------------------
# reductions

def reduce_sum(a: Tensor, axis: int | None = None) -> Tensor:
    if axis is not None and not (-a.data.ndim <= axis < a.data.ndim):
        raise ShapeError(f"sum: axis {axis} invalid for shape {a.data.shape}")
    if axis is not None and a.data.shape[axis] == 0:
        raise ShapeError("sum: reduction over an empty axis")
    if axis is None and a.data.size == 0:
        raise ShapeError("sum: reduction over an empty tensor")

    def bw(g):
        if a.requires_grad:
            if axis is None:
                a._accumulate(np.full_like(a.data, float(g)))
            else:
                a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.data.shape).copy())

    return _result(np.sum(a.data, axis=axis), "sum", (a,), bw)


def reduce_mean(a: Tensor, axis: int | None = None) -> Tensor:
    if axis is not None and not (-a.data.ndim <= axis < a.data.ndim):
        raise ShapeError(f"mean: axis {axis} invalid for shape {a.data.shape}")
    n = a.data.size if axis is None else a.data.shape[axis]
    if n == 0:
        raise ShapeError("mean: reduction over an empty axis")

    def bw(g):
        if a.requires_grad:
            if axis is None:
                a._accumulate(np.full_like(a.data, float(g) / n))
            else:
                a._accumulate(np.broadcast_to(np.expand_dims(g, axis), a.data.shape) / n)

    return _result(np.mean(a.data, axis=axis), "mean", (a,), bw)


# ---------------------------------------------------------------------------
# backward pass

def backward(root: Tensor) -> None:
    """Accumulate d(root)/d(leaf) into every reachable requires_grad leaf.

    Root must be scalar. Visits each tape node exactly once in reverse
    topological order; repeated calls without zeroing accumulate.
    """
    if root.data.size != 1:
        raise ShapeError(f"backward: root must be scalar, got shape {root.data.shape}")
    if not root.requires_grad:
        return

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited or not node.requires_grad:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            stack.append((p, False))

    # Interior grads are tape-local scratch; only leaves accumulate across
    # calls. Clearing them here makes a repeated backward on the same graph
    # add a fresh pass into the leaves instead of double counting.
    for node in topo:
        if node.backward_fn is not None:
            node.grad = None

    root._accumulate(np.ones_like(root.data))
    for node in reversed(topo):
        if node.backward_fn is not None and node.grad is not None:
            node.backward_fn(node.grad)

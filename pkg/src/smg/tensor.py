"""Dense tensors with reverse-mode differentiation.

Every primitive records a node when at least one input requires a gradient.
Nodes receive a global, monotonically increasing id at creation time, so
sorting the nodes reachable from a loss by id yields a topological order
(every operation's inputs were created before it).  ``backward`` walks that
order in reverse, visiting each node once.

Row-vector convention throughout: node states are rows, a linear map is
``h @ W`` with ``W`` of shape ``(d_in, d_out)``.
"""

from __future__ import annotations

import contextlib
import itertools
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ContractError, DimensionError

_node_ids = itertools.count()
_grad_enabled = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable recording inside the block (inference, finite differences)."""
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


@dataclass(eq=False)
class Node:
    id: int
    op: str
    inputs: tuple["Tensor", ...]
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


class Tensor:
    """A numpy array plus an optional record of the operation that produced it."""

    __slots__ = ("data", "requires_grad", "grad", "node", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if not np.issubdtype(arr.dtype, np.floating):
            arr = arr.astype(np.float64)
        self.data: np.ndarray = arr
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self.node: Node | None = None
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"tensor of shape {self.shape} is not a scalar")
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(x, dtype=dtype)


def _pair(a, b) -> tuple[Tensor, Tensor]:
    """Wrap operands, giving bare Python numbers the dtype of the tensor operand."""
    if isinstance(a, Tensor) and not isinstance(b, Tensor):
        return a, Tensor(b, dtype=a.dtype)
    if isinstance(b, Tensor) and not isinstance(a, Tensor):
        return Tensor(a, dtype=b.dtype), b
    return as_tensor(a), as_tensor(b)


def _record(out: np.ndarray, op: str, inputs: tuple[Tensor, ...], backward) -> Tensor:
    result = Tensor(out)
    if _grad_enabled and any(t.requires_grad for t in inputs):
        result.requires_grad = True
        result.node = Node(next(_node_ids), op, inputs, backward)
    return result


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` down to ``shape`` (reverse of numpy broadcasting)."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


def _broadcast_shape(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


# ---------------------------------------------------------------------------
# primitives


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    A, B = a.data, b.data

    def backward(g):
        return g @ B.T, A.T @ g

    return _record(A @ B, "matmul", (a, b), backward)


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "add")
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return _record(a.data + b.data, "add", (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "sub")
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), -_unbroadcast(g, sb)

    return _record(a.data - b.data, "sub", (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcast_shape(a, b, "mul")
    A, B = a.data, b.data

    def backward(g):
        return _unbroadcast(g * B, A.shape), _unbroadcast(g * A, B.shape)

    return _record(A * B, "mul", (a, b), backward)


def relu(x) -> Tensor:
    x = as_tensor(x)
    positive = x.data > 0
    # np.where keeps relu(0) == +0.0 and relu(-0.0) == +0.0
    out = np.where(positive, x.data, 0.0).astype(x.dtype, copy=False)

    def backward(g):
        return (g * positive,)

    return _record(out, "relu", (x,), backward)


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    # split by sign so exp never overflows
    z = np.exp(-np.abs(x.data))
    out = np.where(x.data >= 0, 1.0 / (1.0 + z), z / (1.0 + z)).astype(x.dtype, copy=False)
    # rounding would otherwise reach the closed endpoints for |x| > ~37
    info = np.finfo(x.dtype)
    out = np.clip(out, info.tiny, 1.0 - info.epsneg)

    def backward(g):
        return (g * out * (1.0 - out),)

    return _record(out, "sigmoid", (x,), backward)


def tanh(x) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)

    def backward(g):
        return (g * (1.0 - out * out),)

    return _record(out, "tanh", (x,), backward)


def absolute(x) -> Tensor:
    """Elementwise |x|; the subgradient at 0 is 0."""
    x = as_tensor(x)
    sign = np.sign(x.data)

    def backward(g):
        return (g * sign,)

    return _record(np.abs(x.data), "abs", (x,), backward)


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    """Concatenate along the last dimension (all leading dims must agree)."""
    ts = tuple(as_tensor(t) for t in tensors)
    if not ts:
        raise ContractError("concat needs at least one tensor")
    lead = ts[0].shape[:-1]
    for t in ts[1:]:
        if t.shape[:-1] != lead:
            raise DimensionError(f"concat: leading dims differ, {ts[0].shape} vs {t.shape}")
    if axis not in (-1, ts[0].ndim - 1):
        raise ContractError("concat only supports the last dimension")
    widths = [t.shape[-1] for t in ts]
    cuts = np.cumsum(widths)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=-1))

    return _record(np.concatenate([t.data for t in ts], axis=-1), "concat", ts, backward)


def spmm(matrix: sp.csr_matrix, h) -> Tensor:
    """Sparse-dense product ``matrix @ h`` with gradient ``matrix.T @ g``.

    With sorted column indices scipy accumulates each output row over the
    stored entries in ascending column order.
    """
    h = as_tensor(h)
    if h.ndim != 2 or matrix.shape[1] != h.shape[0]:
        raise DimensionError(f"spmm: matrix {matrix.shape} incompatible with {h.shape}")
    out = np.asarray(matrix @ h.data, dtype=h.dtype)

    def backward(g):
        return (np.asarray(matrix.T @ g, dtype=g.dtype),)

    return _record(out, "spmm", (h,), backward)


def neighbor_sum(h, adjacency: sp.csr_matrix) -> Tensor:
    """Row v of the result is the sum of rows of ``h`` over the neighbors of v."""
    h = as_tensor(h)
    if adjacency.shape[0] != adjacency.shape[1] or adjacency.shape[0] != h.shape[0]:
        raise DimensionError(f"neighbor_sum: adjacency {adjacency.shape} vs states {h.shape}")
    return spmm(adjacency, h)


def reshape(x, shape: tuple[int, ...]) -> Tensor:
    x = as_tensor(x)
    original = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise DimensionError(f"cannot reshape {original} to {shape}") from None

    def backward(g):
        return (g.reshape(original),)

    return _record(out, "reshape", (x,), backward)


def sum_all(x) -> Tensor:
    x = as_tensor(x)
    shape = x.shape

    def backward(g):
        return (np.broadcast_to(g, shape).copy(),)

    return _record(np.asarray(x.data.sum(), dtype=x.dtype), "sum", (x,), backward)


def mean_all(x) -> Tensor:
    x = as_tensor(x)
    return mul(sum_all(x), 1.0 / max(x.data.size, 1))


def log_softmax(x) -> Tensor:
    """Row-wise log-softmax, stabilised by subtracting the row maximum."""
    x = as_tensor(x)
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    out = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    probs = np.exp(out)

    def backward(g):
        return (g - probs * g.sum(axis=-1, keepdims=True),)

    return _record(out, "log_softmax", (x,), backward)


def dropout(x, p: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p)."""
    if p <= 0.0:
        return as_tensor(x)
    if p >= 1.0:
        raise ContractError("dropout probability must be < 1")
    x = as_tensor(x)
    keep = (rng.random(x.shape) >= p).astype(x.dtype) / (1.0 - p)
    return mul(x, Tensor(keep))


_ELEMENTWISE = {
    "relu": relu,
    "sigmoid": sigmoid,
    "mul": mul,
    "add": add,
    "concat_lastdim": lambda *ts: concat(ts),
}


def elementwise(op: str, *inputs) -> Tensor:
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise ContractError(f"unknown elementwise op {op!r}") from None
    return fn(*inputs)


# ---------------------------------------------------------------------------
# backward pass


class Tape:
    """The recorded operations reachable from one output, in creation order."""

    def __init__(self, tensors: list[Tensor], leaves: list[Tensor]):
        self.tensors = tensors
        self.leaves = leaves

    @property
    def nodes(self) -> list[Node]:
        return [t.node for t in self.tensors]

    def __len__(self) -> int:
        return len(self.tensors)

    @classmethod
    def from_output(cls, output: Tensor) -> "Tape":
        seen: set[int] = set()
        recorded: list[Tensor] = []
        leaves: list[Tensor] = []
        stack = [output]
        while stack:
            t = stack.pop()
            if id(t) in seen or not t.requires_grad:
                continue
            seen.add(id(t))
            if t.node is None:
                leaves.append(t)
            else:
                recorded.append(t)
                stack.extend(t.node.inputs)
        recorded.sort(key=lambda t: t.node.id)
        return cls(recorded, leaves)


def backward(loss: Tensor) -> Tape:
    """Accumulate d(loss)/d(leaf) into ``.grad`` of every reachable leaf.

    A tensor used several times receives the sum of its gradient
    contributions.  Leaves not reached from ``loss`` are left untouched;
    optimizers treat a missing gradient as zero.
    """
    if loss.data.size != 1:
        raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
    tape = Tape.from_output(loss)
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for t in reversed(tape.tensors):
        g = grads.pop(id(t), None)
        if g is None:
            continue
        for inp, gi in zip(t.node.inputs, t.node.backward(g)):
            if gi is None or not inp.requires_grad:
                continue
            key = id(inp)
            grads[key] = grads[key] + gi if key in grads else gi
    for leaf in tape.leaves:
        g = grads.get(id(leaf))
        if g is None:
            continue
        g = np.asarray(g, dtype=leaf.dtype).reshape(leaf.shape)
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g
    return tape


# ---------------------------------------------------------------------------
# initialisation


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int, dtype=np.float64) -> np.ndarray:
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_in, fan_out)).astype(dtype)

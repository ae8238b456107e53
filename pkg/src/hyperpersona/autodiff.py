"""Minimal dense-tensor engine with reverse-mode automatic differentiation.

Covers exactly the operations the encoder and head need: matmul, elementwise
arithmetic, sigmoid, row softmax, per-row layer norm, segment sum/gather,
dropout and a handful of structural helpers.  Values are numpy arrays (float64
by default so gradient tolerances are meaningful; float32 passes through for
production use).  Each operation records its parents and a backward closure;
`backward(loss)` accumulates gradients in reverse topological order.  Every
op checks its output for NaN/Inf and raises NumericError on violation.

A central-difference oracle (`finite_diff_grad`) provides the independent
gradient check used throughout the test suite.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError, DimensionError, IndexRangeError, NumericError
from .rng import RngStream


def _check_finite(data: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(data)):
        raise NumericError(f"{op}: produced non-finite values")


class Tensor:
    """Shape + values + gradient record; parents link the backward tape."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, parents=(), backward=None):
        self.data = np.asarray(data, dtype=np.float64 if not isinstance(data, np.ndarray) else data.dtype)
        if self.data.dtype not in (np.float32, np.float64):
            self.data = self.data.astype(np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents = parents
        self._backward: Callable[[], None] | None = backward

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float64), requires_grad=requires_grad)


def param(data) -> Tensor:
    return tensor(data, requires_grad=True)


def lift(data: np.ndarray, parents: Sequence[Tensor], backward: Callable[[np.ndarray], None],
         op: str = "op") -> Tensor:
    """Wrap an externally computed forward result as a tape node.

    `backward` receives the output gradient and must accumulate into the
    parents itself.  Used for fused ops (e.g. the stable BCE in the trainer).
    """
    _check_finite(data, op)
    tracked = tuple(p for p in parents if p.requires_grad)
    if not tracked:
        return Tensor(data)
    out = Tensor(data, requires_grad=True, parents=tracked)
    out._backward = lambda: backward(out.grad)
    return out


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else tensor(x)


# ---------------------------------------------------------------------------
# elementwise and linear algebra
# ---------------------------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise DimensionError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner dims differ: {a.shape} vs {b.shape}")
    out_data = a.data @ b.data

    def bw(g):
        if a.requires_grad:
            a.accumulate(g @ b.data.T)
        if b.requires_grad:
            b.accumulate(a.data.T @ g)

    return lift(out_data, (a, b), bw, "matmul")


def _binary(a: Tensor, b: Tensor, op: str):
    a, b = _as_tensor(a), _as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"{op}: shapes differ, {a.shape} vs {b.shape}")
    return a, b


def add(a, b) -> Tensor:
    a, b = _binary(a, b, "add")

    def bw(g):
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(g)

    return lift(a.data + b.data, (a, b), bw, "add")


def sub(a, b) -> Tensor:
    a, b = _binary(a, b, "sub")

    def bw(g):
        if a.requires_grad:
            a.accumulate(g)
        if b.requires_grad:
            b.accumulate(-g)

    return lift(a.data - b.data, (a, b), bw, "sub")


def mul(a, b) -> Tensor:
    a, b = _binary(a, b, "mul")

    def bw(g):
        if a.requires_grad:
            a.accumulate(g * b.data)
        if b.requires_grad:
            b.accumulate(g * a.data)

    return lift(a.data * b.data, (a, b), bw, "mul")


def div(a, b) -> Tensor:
    a, b = _binary(a, b, "div")

    def bw(g):
        if a.requires_grad:
            a.accumulate(g / b.data)
        if b.requires_grad:
            b.accumulate(-g * a.data / (b.data * b.data))

    with np.errstate(divide="ignore", invalid="ignore"):
        out_data = a.data / b.data
    return lift(out_data, (a, b), bw, "div")


def scale(a, c: float) -> Tensor:
    a = _as_tensor(a)
    c = float(c)

    def bw(g):
        if a.requires_grad:
            a.accumulate(g * c)

    return lift(a.data * c, (a,), bw, "scale")


def sigmoid(a) -> Tensor:
    a = _as_tensor(a)
    x = a.data
    out_data = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                        np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def bw(g):
        if a.requires_grad:
            a.accumulate(g * out_data * (1.0 - out_data))

    return lift(out_data, (a,), bw, "sigmoid")


def exp(a) -> Tensor:
    a = _as_tensor(a)
    out_data = np.exp(a.data)

    def bw(g):
        if a.requires_grad:
            a.accumulate(g * out_data)

    return lift(out_data, (a,), bw, "exp")


def elementwise(kind: str, *operands) -> Tensor:
    """Dispatch by name: add | mul | sigmoid."""
    if kind == "add":
        return add(*operands)
    if kind == "mul":
        return mul(*operands)
    if kind == "sigmoid":
        return sigmoid(*operands)
    raise ConfigurationError(f"unknown elementwise kind {kind!r}")


# ---------------------------------------------------------------------------
# structured ops
# ---------------------------------------------------------------------------


def softmax_rows(x) -> Tensor:
    """Row-wise softmax with max-subtraction for stability."""
    x = _as_tensor(x)
    if x.data.ndim != 2 or x.shape[1] < 1:
        raise DimensionError(f"softmax_rows needs a non-empty 2-D tensor, got {x.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=1, keepdims=True)

    def bw(g):
        if x.requires_grad:
            inner = (g * out_data).sum(axis=1, keepdims=True)
            x.accumulate(out_data * (g - inner))

    return lift(out_data, (x,), bw, "softmax_rows")


def layer_norm_rows(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Per-row standardization followed by the affine (gamma, beta)."""
    x, gamma, beta = _as_tensor(x), _as_tensor(gamma), _as_tensor(beta)
    if x.data.ndim != 2:
        raise DimensionError(f"layer_norm_rows needs a 2-D tensor, got {x.shape}")
    d = x.shape[1]
    gflat = gamma.data.reshape(-1)
    bflat = beta.data.reshape(-1)
    if gflat.shape[0] != d or bflat.shape[0] != d:
        raise DimensionError("layer_norm gamma/beta lengths must match the row width")

    mu = x.data.mean(axis=1, keepdims=True)
    var = x.data.var(axis=1, keepdims=True)  # biased
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out_data = xhat * gflat + bflat

    def bw(g):
        if gamma.requires_grad:
            gamma.accumulate((g * xhat).sum(axis=0).reshape(gamma.shape))
        if beta.requires_grad:
            beta.accumulate(g.sum(axis=0).reshape(beta.shape))
        if x.requires_grad:
            dxhat = g * gflat
            term = d * dxhat - dxhat.sum(axis=1, keepdims=True) \
                - xhat * (dxhat * xhat).sum(axis=1, keepdims=True)
            x.accumulate(inv / d * term)

    return lift(out_data, (x, gamma, beta), bw, "layer_norm")


def layer_norm(x, gamma, beta, eps: float = 1e-5) -> Tensor:
    """Vector layer norm: 1-D view of the row-wise op."""
    x = _as_tensor(x)
    if x.data.ndim != 1:
        raise DimensionError(f"layer_norm expects a vector, got {x.shape}")
    row = reshape(x, (1, x.shape[0]))
    return reshape(layer_norm_rows(row, gamma, beta, eps), (x.shape[0],))


def reshape(a, new_shape: tuple[int, ...]) -> Tensor:
    a = _as_tensor(a)
    out_data = a.data.reshape(new_shape)

    def bw(g):
        if a.requires_grad:
            a.accumulate(g.reshape(a.shape))

    return lift(out_data, (a,), bw, "reshape")


def segment_sum(x, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    """Row s of the output is the sum of input rows whose id is s.

    Summation order is the sequential index order of the input, fixed for
    reproducibility.  Missing segments yield zero rows.
    """
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise DimensionError(f"segment_sum needs a 2-D tensor, got {x.shape}")
    ids = np.asarray(segment_ids, dtype=np.int64)
    if ids.shape != (x.shape[0],):
        raise DimensionError(f"segment ids shape {ids.shape} != ({x.shape[0]},)")
    if ids.size and (ids.min() < 0 or ids.max() >= num_segments):
        raise IndexRangeError(f"segment id out of range [0, {num_segments})")
    out_data = np.zeros((num_segments, x.shape[1]), dtype=x.data.dtype)
    np.add.at(out_data, ids, x.data)

    def bw(g):
        if x.requires_grad:
            x.accumulate(g[ids])

    return lift(out_data, (x,), bw, "segment_sum")


def gather_rows(x, indices: np.ndarray) -> Tensor:
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise DimensionError(f"gather_rows needs a 2-D tensor, got {x.shape}")
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[0]):
        raise IndexRangeError(f"gather index out of range [0, {x.shape[0]})")
    out_data = x.data[idx]

    def bw(g):
        if x.requires_grad:
            dx = np.zeros_like(x.data)
            np.add.at(dx, idx, g)
            x.accumulate(dx)

    return lift(out_data, (x,), bw, "gather_rows")


def scale_rows(x, s) -> Tensor:
    """Multiply each row i of x by the scalar s[i]; s has shape (n, 1)."""
    x, s = _as_tensor(x), _as_tensor(s)
    if x.data.ndim != 2 or s.shape != (x.shape[0], 1):
        raise DimensionError(f"scale_rows: x {x.shape} with s {s.shape}")

    def bw(g):
        if x.requires_grad:
            x.accumulate(g * s.data)
        if s.requires_grad:
            s.accumulate((g * x.data).sum(axis=1, keepdims=True))

    return lift(x.data * s.data, (x, s), bw, "scale_rows")


def scale_cols(x, m) -> Tensor:
    """Multiply each column j of x by the scalar m[j]; m has shape (1, d)."""
    x, m = _as_tensor(x), _as_tensor(m)
    if x.data.ndim != 2 or m.shape != (1, x.shape[1]):
        raise DimensionError(f"scale_cols: x {x.shape} with m {m.shape}")

    def bw(g):
        if x.requires_grad:
            x.accumulate(g * m.data)
        if m.requires_grad:
            m.accumulate((g * x.data).sum(axis=0, keepdims=True))

    return lift(x.data * m.data, (x, m), bw, "scale_cols")


def add_rowvec(x, b) -> Tensor:
    """Add a (1, d) bias row to every row of x."""
    x, b = _as_tensor(x), _as_tensor(b)
    if x.data.ndim != 2 or b.shape != (1, x.shape[1]):
        raise DimensionError(f"add_rowvec: x {x.shape} with b {b.shape}")

    def bw(g):
        if x.requires_grad:
            x.accumulate(g)
        if b.requires_grad:
            b.accumulate(g.sum(axis=0, keepdims=True))

    return lift(x.data + b.data, (x, b), bw, "add_rowvec")


def row_sum(x) -> Tensor:
    """Sum along each row: (n, d) -> (n, 1)."""
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise DimensionError(f"row_sum needs a 2-D tensor, got {x.shape}")

    def bw(g):
        if x.requires_grad:
            x.accumulate(np.broadcast_to(g, x.shape).copy())

    return lift(x.data.sum(axis=1, keepdims=True), (x,), bw, "row_sum")


def sum_all(x) -> Tensor:
    x = _as_tensor(x)

    def bw(g):
        if x.requires_grad:
            x.accumulate(np.full_like(x.data, float(g)))

    return lift(np.asarray(x.data.sum()), (x,), bw, "sum_all")


def mean_all(x) -> Tensor:
    x = _as_tensor(x)
    n = x.data.size

    def bw(g):
        if x.requires_grad:
            x.accumulate(np.full_like(x.data, float(g) / n))

    return lift(np.asarray(x.data.mean()), (x,), bw, "mean_all")


def dropout(x, rate: float, rng: RngStream, mode: str) -> Tensor:
    """Inverted dropout: expectation-preserving in train mode, identity in eval."""
    if not (0.0 <= rate < 1.0):
        raise ConfigurationError(f"dropout rate must lie in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ConfigurationError(f"dropout mode must be train or eval, got {mode!r}")
    x = _as_tensor(x)
    if mode == "eval" or rate == 0.0:
        return x
    keep = (rng.uniforms(x.data.size).reshape(x.shape) >= rate)
    factor = keep.astype(x.data.dtype) / (1.0 - rate)

    def bw(g):
        if x.requires_grad:
            x.accumulate(g * factor)

    return lift(x.data * factor, (x,), bw, "dropout")


# ---------------------------------------------------------------------------
# backward traversal and the finite-difference oracle
# ---------------------------------------------------------------------------


def backward(loss: Tensor) -> None:
    """Fill gradients of all tracked tensors reachable from a scalar loss.

    Leaf gradients accumulate across calls (call `zero_grads` between steps);
    interior nodes are reset each call so repeats add exactly one more pass.
    """
    if loss.data.size != 1:
        raise NumericError(f"backward needs a scalar loss, got shape {loss.shape}")
    topo: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in seen or not node.requires_grad:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            stack.append((parent, False))

    for node in topo:
        if node._backward is not None:  # interior node
            node.grad = None
    loss.accumulate(np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is not None:
            node._backward()


def zero_grads(params: Iterable[Tensor]) -> None:
    for p in params:
        p.zero_grad()


def finite_diff_grad(f: Callable[[np.ndarray], float], x: np.ndarray,
                     eps: float = 1e-5) -> np.ndarray:
    """Central differences (f(x+e*eps) - f(x-e*eps)) / (2*eps) per coordinate."""
    x = np.array(x, dtype=np.float64)  # contiguous private copy; perturbed in place
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = f(x)
        flat[i] = orig - eps
        f_minus = f(x)
        flat[i] = orig
        gflat[i] = (f_plus - f_minus) / (2.0 * eps)
    return grad

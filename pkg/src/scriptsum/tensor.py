"""Dense float64 tensors with reverse-mode automatic differentiation.

Just enough operations to express the model: matmul (2-D and batched 3-D),
elementwise add/mul, sigmoid, relu, masked softmax, layer normalization,
dropout, embedding/gather lookups, cross-entropy, and a few shape utilities.

Every operation records its parents and a backward closure on the output
tensor; backward() walks that implicit graph in reverse topological order,
which doubles as the computation tape. All math is double precision, so a
fixed seed gives bit-identical results across runs.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NumericsError, ShapeError, StateError

NEG_INF = -1e9

_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


class no_grad:
    """Context manager that disables graph recording (evaluation mode)."""

    def __enter__(self):
        self.prev = _grad_enabled()
        _state.grad_enabled = False
        return self

    def __exit__(self, *exc):
        _state.grad_enabled = self.prev
        return False


class Tensor:
    """A float64 array plus optional gradient buffer and graph linkage."""

    __slots__ = ("data", "requires_grad", "grad", "_parents", "_backward", "_backward_ran")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[], None] | None = None
        self._backward_ran = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g


def tensor(data, requires_grad: bool = False) -> Tensor:
    return Tensor(data, requires_grad=requires_grad)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward: Callable[[], None]) -> Tensor:
    out = Tensor(data)
    if _grad_enabled():
        out._parents = parents
        out._backward = backward
    return out


def backward(loss: Tensor) -> None:
    """Populate grads of everything the scalar loss depends on.

    Walks the recorded graph in reverse topological order; calling twice on
    the same loss without rebuilding the graph raises StateError.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward requires a scalar loss, got shape {loss.shape}")
    if loss._backward_ran:
        raise StateError("backward already ran for this loss; rebuild the graph first")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward()
    loss._backward_ran = True


# -- primitives ----------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; both 2-D, or both 3-D with equal leading dim."""
    if a.data.ndim == b.data.ndim == 2:
        if a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    elif a.data.ndim == b.data.ndim == 3:
        if a.shape[0] != b.shape[0] or a.shape[2] != b.shape[1]:
            raise ShapeError(f"batched matmul shapes differ: {a.shape} @ {b.shape}")
    else:
        raise ShapeError(f"matmul requires matching 2-D or 3-D operands: {a.shape} @ {b.shape}")
    out_data = a.data @ b.data

    def backward_fn():
        g = out.grad
        a.accumulate(g @ np.swapaxes(b.data, -1, -2))
        b.accumulate(np.swapaxes(a.data, -1, -2) @ g)

    out = _make(out_data, (a, b), backward_fn)
    return out


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum; b may also be a vector broadcast over the last axis."""
    if a.shape == b.shape:
        pass
    elif b.data.ndim == 1 and a.shape[-1:] == b.shape:
        pass
    else:
        raise ShapeError(f"add shapes incompatible: {a.shape} + {b.shape}")
    out_data = a.data + b.data

    def backward_fn():
        g = out.grad
        a.accumulate(g)
        if b.shape == a.shape:
            b.accumulate(g)
        else:
            b.accumulate(g.reshape(-1, b.shape[0]).sum(axis=0))

    out = _make(out_data, (a, b), backward_fn)
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of equal-shape tensors."""
    if a.shape != b.shape:
        raise ShapeError(f"mul shapes differ: {a.shape} * {b.shape}")
    out_data = a.data * b.data

    def backward_fn():
        g = out.grad
        a.accumulate(g * b.data)
        b.accumulate(g * a.data)

    out = _make(out_data, (a, b), backward_fn)
    return out


def scale(a: Tensor, c: float) -> Tensor:
    """Multiply by a python scalar constant."""
    c = float(c)
    out_data = a.data * c

    def backward_fn():
        a.accumulate(out.grad * c)

    out = _make(out_data, (a,), backward_fn)
    return out


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    s = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))

    def backward_fn():
        a.accumulate(out.grad * s * (1.0 - s))

    out = _make(s, (a,), backward_fn)
    return out


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0.0)

    def backward_fn():
        a.accumulate(out.grad * (a.data > 0))

    out = _make(out_data, (a,), backward_fn)
    return out


def softmax_masked(
    logits: Tensor,
    additive_mask: np.ndarray | None = None,
    scale_matrix: np.ndarray | None = None,
) -> Tensor:
    """Row softmax with optional multiplicative and additive masking.

    scale_matrix multiplies the logits elementwise first (relation-gated
    attention); additive_mask is then added (NEG_INF entries drop keys).
    Raises NumericsError when an additive mask removes an entire row.
    """
    if logits.data.ndim != 2:
        raise ShapeError(f"softmax expects a 2-D tensor, got {logits.shape}")
    z = logits.data
    if scale_matrix is not None:
        if scale_matrix.shape != z.shape:
            raise ShapeError(f"scale matrix {scale_matrix.shape} != logits {z.shape}")
        z = z * scale_matrix
    if additive_mask is not None:
        if additive_mask.shape != z.shape:
            raise ShapeError(f"additive mask {additive_mask.shape} != logits {z.shape}")
        if np.any(np.all(additive_mask <= NEG_INF, axis=1)):
            raise NumericsError("softmax row is fully masked")
        z = z + additive_mask
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=1, keepdims=True)

    def backward_fn():
        g = out.grad
        gz = (g - (g * s).sum(axis=1, keepdims=True)) * s
        if scale_matrix is not None:
            gz = gz * scale_matrix
        logits.accumulate(gz)

    out = _make(s, (logits,), backward_fn)
    return out


def layernorm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    d = x.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(f"layernorm affine shapes {gain.shape}/{bias.shape} != ({d},)")
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    out_data = xhat * gain.data + bias.data

    def backward_fn():
        g = out.grad
        gain.accumulate((g * xhat).reshape(-1, d).sum(axis=0))
        bias.accumulate(g.reshape(-1, d).sum(axis=0))
        gx = g * gain.data
        term = gx - gx.mean(axis=-1, keepdims=True) - xhat * (gx * xhat).mean(axis=-1, keepdims=True)
        x.accumulate(term * inv)

    out = _make(out_data, (x, gain, bias), backward_fn)
    return out


def dropout(x: Tensor, p: float, rng: np.random.Generator | None, training: bool) -> Tensor:
    """Inverted dropout; identity in eval mode or at p=0."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout probability must be in [0, 1), got {p!r}")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in training mode requires a random generator")
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    out_data = x.data * keep

    def backward_fn():
        x.accumulate(out.grad * keep)

    out = _make(out_data, (x,), backward_fn)
    return out


def embed(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row lookup: (vocab, d) table indexed by integer ids of any shape."""
    ids = np.asarray(ids)
    if not np.issubdtype(ids.dtype, np.integer):
        raise ShapeError("embedding ids must be integers")
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise ShapeError(
            f"embedding id out of range [0, {table.shape[0]}): min {ids.min()}, max {ids.max()}"
        )
    out_data = table.data[ids]

    def backward_fn():
        g = np.zeros_like(table.data)
        np.add.at(g, ids, out.grad)
        table.accumulate(g)

    out = _make(out_data, (table,), backward_fn)
    return out


def gather(table: Tensor, idx: np.ndarray) -> Tensor:
    """Alias of embed for pairwise index matrices: (n, m) ids -> (n, m, d)."""
    return embed(table, idx)


def cross_entropy(logits: Tensor, targets: np.ndarray, reduction: str = "mean") -> Tensor:
    """Mean (or sum) negative log-likelihood of integer targets, (n, V) logits."""
    if logits.data.ndim != 2:
        raise ShapeError(f"cross_entropy expects (n, vocab) logits, got {logits.shape}")
    targets = np.asarray(targets)
    if targets.shape != (logits.shape[0],):
        raise ShapeError(f"targets shape {targets.shape} != ({logits.shape[0]},)")
    if not np.issubdtype(targets.dtype, np.integer):
        raise ShapeError("targets must be integers")
    if targets.size and (targets.min() < 0 or targets.max() >= logits.shape[1]):
        raise ShapeError("target id out of vocabulary range")
    if reduction not in ("mean", "sum"):
        raise ConfigError(f"unknown reduction {reduction!r}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsumexp
    n = logits.shape[0]
    picked = logp[np.arange(n), targets]
    total = -picked.sum()
    out_data = np.asarray(total / n if reduction == "mean" else total)

    def backward_fn():
        g = float(out.grad)
        soft = np.exp(logp)
        soft[np.arange(n), targets] -= 1.0
        if reduction == "mean":
            soft /= n
        logits.accumulate(soft * g)

    out = _make(out_data, (logits,), backward_fn)
    return out


# -- shape utilities -----------------------------------------------------


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = a.data.reshape(shape)

    def backward_fn():
        a.accumulate(out.grad.reshape(a.shape))

    out = _make(out_data, (a,), backward_fn)
    return out


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    out_data = np.transpose(a.data, axes)
    inverse = tuple(np.argsort(axes))

    def backward_fn():
        a.accumulate(np.transpose(out.grad, inverse))

    out = _make(out_data, (a,), backward_fn)
    return out


def concat(parts: Sequence[Tensor], axis: int) -> Tensor:
    if not parts:
        raise ShapeError("concat of zero tensors")
    out_data = np.concatenate([p.data for p in parts], axis=axis)
    sizes = [p.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def backward_fn():
        g = out.grad
        for part, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            sl = [slice(None)] * g.ndim
            sl[axis] = slice(lo, hi)
            part.accumulate(g[tuple(sl)])

    out = _make(out_data, tuple(parts), backward_fn)
    return out


def sum_all(a: Tensor) -> Tensor:
    out_data = np.asarray(a.data.sum())

    def backward_fn():
        a.accumulate(np.full_like(a.data, float(out.grad)))

    out = _make(out_data, (a,), backward_fn)
    return out


def mean_all(a: Tensor) -> Tensor:
    return scale(sum_all(a), 1.0 / a.data.size)


# -- gradient verification -----------------------------------------------


@dataclass(frozen=True)
class GradCheckReport:
    """Outcome of comparing autodiff gradients to central differences."""

    max_rel_error: float
    tolerance: float
    passed: bool


def grad_check(
    f: Callable[..., Tensor],
    points: Tensor | Sequence[Tensor],
    tolerance: float = 1e-4,
    epsilon: float = 1e-5,
) -> GradCheckReport:
    """Compare df/dpoint from backward() against central finite differences.

    Relative error per element is |a - fd| / max(|a|, |fd|), taken as 0 when
    both magnitudes are below 1e-6; the report carries the max over all
    elements of all checked tensors.
    """
    pts = [points] if isinstance(points, Tensor) else list(points)
    for p in pts:
        p.requires_grad = True
        p.grad = None
    loss = f(*pts)
    backward(loss)
    grads = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in pts]
    max_rel = 0.0
    with no_grad():
        for p, g in zip(pts, grads):
            for idx in np.ndindex(*p.data.shape):
                orig = p.data[idx]
                p.data[idx] = orig + epsilon
                f_plus = float(f(*pts).data)
                p.data[idx] = orig - epsilon
                f_minus = float(f(*pts).data)
                p.data[idx] = orig
                fd = (f_plus - f_minus) / (2.0 * epsilon)
                denom = max(abs(g[idx]), abs(fd))
                rel = 0.0 if denom < 1e-6 else abs(g[idx] - fd) / denom
                if rel > max_rel:
                    max_rel = rel
    return GradCheckReport(max_rel_error=max_rel, tolerance=tolerance, passed=max_rel <= tolerance)

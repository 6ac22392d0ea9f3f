"""Reverse-mode autodiff over numpy arrays of rank <= 2.

Eager tape: every op returns a Tensor holding the forward value, its
parents, and a closure that scatters the upstream gradient into them.
Tensors are created in topological order, so backward() just walks the
reachable nodes by descending creation id.  Gradient arrays are never
mutated in place; accumulation always rebinds, which makes aliasing
between a child's grad and a parent's first contribution safe.
"""

from __future__ import annotations

import itertools
from contextlib import contextmanager
from typing import Callable, Iterable, Sequence

import numpy as np

_ids = itertools.count()
_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape construction inside the block (forward math unchanged)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "parents", "backward_fn", "tid")

    def __init__(self, data, requires_grad=False, parents=(), backward_fn=None):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 2:
            raise ValueError(f"rank {arr.ndim} tensors are not supported (max 2)")
        self.data = arr
        self.grad = None
        self.requires_grad = requires_grad
        self.parents = parents
        self.backward_fn = backward_fn
        self.tid = next(_ids)

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self):
        self.grad = None

    def backward(self):
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        nodes = {}
        stack = [self]
        while stack:
            node = stack.pop()
            if node.tid in nodes or not node.requires_grad:
                continue
            nodes[node.tid] = node
            stack.extend(node.parents)
        self.grad = np.ones_like(self.data)
        for tid in sorted(nodes, reverse=True):
            node = nodes[tid]
            if node.backward_fn is not None and node.grad is not None:
                node.backward_fn(node.grad)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(np.array(data, dtype=np.float64), requires_grad=True)


def _acc(t: Tensor, g: np.ndarray):
    if t.requires_grad:
        t.grad = g if t.grad is None else t.grad + g


def _make(data, parents, backward_fn) -> Tensor:
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, parents=tuple(parents), backward_fn=backward_fn)
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape) -> np.ndarray:
    # Sum the upstream gradient back down to the broadcast operand's shape.
    if g.shape == tuple(shape):
        return g
    if len(shape) == 0:
        return np.array(g.sum())
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data + b.data

    def bwd(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(g, b.data.shape))

    return _make(out, (a, b), bwd)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data - b.data

    def bwd(g):
        _acc(a, _unbroadcast(g, a.data.shape))
        _acc(b, _unbroadcast(-g, b.data.shape))

    return _make(out, (a, b), bwd)


def neg(a) -> Tensor:
    a = as_tensor(a)

    def bwd(g):
        _acc(a, -g)

    return _make(-a.data, (a,), bwd)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data * b.data

    def bwd(g):
        _acc(a, _unbroadcast(g * b.data, a.data.shape))
        _acc(b, _unbroadcast(g * a.data, b.data.shape))

    return _make(out, (a, b), bwd)


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2:
        raise ValueError(f"matmul needs rank-2 operands, got {a.data.shape} @ {b.data.shape}")
    if a.data.shape[1] != b.data.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.data.shape} @ {b.data.shape}")
    out = a.data @ b.data

    def bwd(g):
        _acc(a, g @ b.data.T)
        _acc(b, a.data.T @ g)

    return _make(out, (a, b), bwd)


def relu(a) -> Tensor:
    a = as_tensor(a)
    out = np.maximum(a.data, 0.0)

    def bwd(g):
        _acc(a, g * (a.data > 0))

    return _make(out, (a,), bwd)


def tanh(a) -> Tensor:
    a = as_tensor(a)
    out = np.tanh(a.data)

    def bwd(g):
        _acc(a, g * (1.0 - out * out))

    return _make(out, (a,), bwd)


def exp(a) -> Tensor:
    a = as_tensor(a)
    out = np.exp(a.data)

    def bwd(g):
        _acc(a, g * out)

    return _make(out, (a,), bwd)


def log(a) -> Tensor:
    a = as_tensor(a)
    out = np.log(a.data)

    def bwd(g):
        _acc(a, g / a.data)

    return _make(out, (a,), bwd)


def concat(tensors: Sequence, axis: int = 1) -> Tensor:
    ts = [as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in ts]
    out = np.concatenate([t.data for t in ts], axis=axis)
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(ts, offsets[:-1], offsets[1:]):
            sl = (slice(None),) * axis + (slice(lo, hi),)
            _acc(t, g[sl])

    return _make(out, tuple(ts), bwd)


def mean(a) -> Tensor:
    """Mean over every element (mean-over-set); backward splits equally."""
    a = as_tensor(a)
    out = np.array(a.data.mean())

    def bwd(g):
        _acc(a, np.full(a.data.shape, float(g) / a.data.size))

    return _make(out, (a,), bwd)


def tsum(a) -> Tensor:
    a = as_tensor(a)
    out = np.array(a.data.sum())

    def bwd(g):
        _acc(a, np.full(a.data.shape, float(g)))

    return _make(out, (a,), bwd)


def rowsum(a) -> Tensor:
    a = as_tensor(a)
    out = a.data.sum(axis=1, keepdims=True)

    def bwd(g):
        _acc(a, np.broadcast_to(g, a.data.shape).copy())

    return _make(out, (a,), bwd)


def _scatter_add_rows(idx: np.ndarray, values: np.ndarray, num_rows: int) -> np.ndarray:
    """Sum rows of ``values`` into ``num_rows`` buckets given by ``idx``.

    One flattened bincount pass; measurably faster than np.add.at.
    """
    f = values.shape[1]
    if len(idx) == 0:
        return np.zeros((num_rows, f), dtype=np.float64)
    flat = (idx[:, None] * f + np.arange(f)).ravel()
    return np.bincount(flat, weights=values.ravel(), minlength=num_rows * f).reshape(num_rows, f)


def rows(a, index) -> Tensor:
    """Gather rows: out[i] = a[index[i]]."""
    a = as_tensor(a)
    idx = np.asarray(index, dtype=np.int64)
    out = a.data[idx]

    def bwd(g):
        _acc(a, _scatter_add_rows(idx, g, a.data.shape[0]))

    return _make(out, (a,), bwd)


def segment_mean(a, segment_ids, num_segments: int) -> Tensor:
    """Per-segment mean of rows; empty segments yield zero rows."""
    a = as_tensor(a)
    seg = np.asarray(segment_ids, dtype=np.int64)
    counts = np.bincount(seg, minlength=num_segments).astype(np.float64)
    sums = _scatter_add_rows(seg, a.data, num_segments)
    denom = np.maximum(counts, 1.0)[:, None]
    out = sums / denom

    def bwd(g):
        _acc(a, g[seg] / denom[seg])

    return _make(out, (a,), bwd)


def scatter_rows_cols(values, row_idx, col_idx, shape) -> Tensor:
    """Place values[i] at out[row_idx[i], col_idx[i]]; indices must be unique."""
    v = as_tensor(values)
    ri = np.asarray(row_idx, dtype=np.int64)
    ci = np.asarray(col_idx, dtype=np.int64)
    flat = v.data.reshape(-1)
    out = np.zeros(shape, dtype=np.float64)
    out[ri, ci] = flat

    def bwd(g):
        _acc(v, g[ri, ci].reshape(v.data.shape))

    return _make(out, (v,), bwd)


def gather_rows_cols(a, row_idx, col_idx) -> Tensor:
    """out[i, 0] = a[row_idx[i], col_idx[i]]."""
    a = as_tensor(a)
    ri = np.asarray(row_idx, dtype=np.int64)
    ci = np.asarray(col_idx, dtype=np.int64)
    out = a.data[ri, ci].reshape(-1, 1)

    def bwd(g):
        n, f = a.data.shape
        buf = np.bincount(ri * f + ci, weights=g.reshape(-1), minlength=n * f)
        _acc(a, buf.reshape(n, f))

    return _make(out, (a,), bwd)


def minimum(a, b) -> Tensor:
    """Elementwise min; gradient follows the smaller operand (ties: a)."""
    a, b = as_tensor(a), as_tensor(b)
    take_a = a.data <= b.data
    out = np.where(take_a, a.data, b.data)

    def bwd(g):
        _acc(a, _unbroadcast(g * take_a, a.data.shape))
        _acc(b, _unbroadcast(g * ~take_a, b.data.shape))

    return _make(out, (a, b), bwd)


def clip(a, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; gradient is 1 inside (boundary included)."""
    a = as_tensor(a)
    out = np.clip(a.data, lo, hi)
    inside = (a.data >= lo) & (a.data <= hi)

    def bwd(g):
        _acc(a, g * inside)

    return _make(out, (a,), bwd)


def _masked_stats(x: np.ndarray, mask: np.ndarray):
    if not mask.any(axis=1).all():
        raise ValueError("masked softmax: some row has no unmasked entries")
    neg_inf = np.where(mask, x, -np.inf)
    mx = neg_inf.max(axis=1, keepdims=True)
    z = np.where(mask, x - mx, -np.inf)
    e = np.where(mask, np.exp(np.where(mask, z, 0.0)), 0.0)
    total = e.sum(axis=1, keepdims=True)
    return e, total, mx


def masked_softmax(a, mask) -> Tensor:
    """Row softmax restricted to the mask; masked slots get probability 0
    and gradient 0."""
    a = as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    e, total, _ = _masked_stats(a.data, mask)
    p = e / total

    def bwd(g):
        gm = g * mask
        dot = (gm * p).sum(axis=1, keepdims=True)
        _acc(a, p * (gm - dot))

    return _make(p, (a,), bwd)


def masked_log_softmax(a, mask) -> Tensor:
    """Log of the masked softmax; masked slots are forced to 0 and carry
    no gradient (multiply by the mask before using them)."""
    a = as_tensor(a)
    mask = np.asarray(mask, dtype=bool)
    e, total, mx = _masked_stats(a.data, mask)
    logp = np.where(mask, a.data - mx - np.log(total), 0.0)
    p = e / total

    def bwd(g):
        gm = g * mask
        _acc(a, gm - p * gm.sum(axis=1, keepdims=True))

    return _make(logp, (a,), bwd)


def grad_check(fn: Callable[[], Tensor], params: Iterable[Tensor], eps: float = 1e-6) -> float:
    """Max relative error between reverse-mode and central finite differences.

    ``fn`` must return a scalar Tensor computed from ``params``.  The
    error metric per coordinate is |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).

    Raises:
        ValueError: if eps is outside [1e-6, 1e-3] or outputs are non-finite.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise ValueError("eps must lie in [1e-6, 1e-3]")
    params = list(params)
    for p in params:
        p.zero_grad()
    out = fn()
    if not np.isfinite(out.data).all():
        raise ValueError("function output is not finite")
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    with no_grad():
        for p, g_ad in zip(params, analytic):
            flat = p.data.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                hi = float(fn().data)
                flat[i] = orig - eps
                lo = float(fn().data)
                flat[i] = orig
                if not (np.isfinite(hi) and np.isfinite(lo)):
                    raise ValueError("function output is not finite under perturbation")
                g_fd = (hi - lo) / (2.0 * eps)
                g = g_ad.reshape(-1)[i]
                err = abs(g - g_fd) / max(1.0, abs(g), abs(g_fd))
                worst = max(worst, err)
    return worst

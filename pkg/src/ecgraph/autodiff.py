"""Reverse-mode automatic differentiation over dense float64 arrays.

Tensors are rank <= 2 and double precision. Every operation records its
parents and a backward closure; ``Tensor.backward()`` replays the tape in
reverse topological order. Dropout uses inverted scaling so the inference
path needs no rescaling.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are incompatible."""


class Tensor:
    """Dense float64 array with optional gradient accumulation."""

    __slots__ = ("values", "requires_grad", "grad", "_parents", "_backward")

    def __init__(self, values, requires_grad=False, parents=(), backward=None):
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim > 2:
            raise ShapeError(f"rank-{arr.ndim} tensor not supported (max rank 2)")
        self.values = arr
        self.requires_grad = requires_grad
        self.grad = None
        self._parents = parents
        self._backward = backward

    # -- bookkeeping ------------------------------------------------------

    @property
    def shape(self):
        return self.values.shape

    def item(self) -> float:
        if self.values.size != 1:
            raise ShapeError(f"item() on tensor of shape {self.shape}")
        return float(self.values.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.values.copy())

    def zero_grad(self):
        self.grad = None

    def _accum(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        self.grad += g

    def _tracked(self) -> bool:
        return self.requires_grad or bool(self._parents)

    def backward(self):
        """Accumulate d(self)/d(leaf) into every reachable tensor's grad.

        Repeated calls without zeroing grads accumulate.
        """
        if self.values.size != 1:
            raise ShapeError(f"backward() requires a scalar, got shape {self.shape}")
        topo = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                topo.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accum(np.ones_like(self.values))
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- operator sugar ---------------------------------------------------

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

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to ``shape``."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g.reshape(shape)


# -- elementwise / broadcast ops -----------------------------------------


def add(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    try:
        out = a.values + b.values
    except ValueError:
        raise ShapeError(f"add: incompatible shapes {a.shape} and {b.shape}")

    def bw(g):
        if a._tracked():
            a._accum(_unbroadcast(g, a.shape))
        if b._tracked():
            b._accum(_unbroadcast(g, b.shape))

    return Tensor(out, parents=(a, b), backward=bw)


def sub(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    try:
        out = a.values - b.values
    except ValueError:
        raise ShapeError(f"sub: incompatible shapes {a.shape} and {b.shape}")

    def bw(g):
        if a._tracked():
            a._accum(_unbroadcast(g, a.shape))
        if b._tracked():
            b._accum(_unbroadcast(-g, b.shape))

    return Tensor(out, parents=(a, b), backward=bw)


def mul(a, b) -> Tensor:
    """Elementwise (or scalar) multiply."""
    a, b = _coerce(a), _coerce(b)
    try:
        out = a.values * b.values
    except ValueError:
        raise ShapeError(f"mul: incompatible shapes {a.shape} and {b.shape}")

    def bw(g):
        if a._tracked():
            a._accum(_unbroadcast(g * b.values, a.shape))
        if b._tracked():
            b._accum(_unbroadcast(g * a.values, b.shape))

    return Tensor(out, parents=(a, b), backward=bw)


def matmul(a, b) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    av, bv = a.values, b.values
    try:
        out = av @ bv
    except ValueError:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def bw(g):
        if av.ndim == 2 and bv.ndim == 2:
            if a._tracked():
                a._accum(g @ bv.T)
            if b._tracked():
                b._accum(av.T @ g)
        elif av.ndim == 2 and bv.ndim == 1:
            if a._tracked():
                a._accum(np.outer(g, bv))
            if b._tracked():
                b._accum(av.T @ g)
        elif av.ndim == 1 and bv.ndim == 2:
            if a._tracked():
                a._accum(bv @ g)
            if b._tracked():
                b._accum(np.outer(av, g))
        else:
            if a._tracked():
                a._accum(g * bv)
            if b._tracked():
                b._accum(g * av)

    return Tensor(out, parents=(a, b), backward=bw)


# -- structural ops -------------------------------------------------------


def concat(tensors, axis=0) -> Tensor:
    ts = [_coerce(t) for t in tensors]
    out = np.concatenate([t.values for t in ts], axis=axis)
    sizes = [t.values.shape[axis] for t in ts]

    def bw(g):
        offset = 0
        for t, size in zip(ts, sizes):
            if t._tracked():
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(offset, offset + size)
                t._accum(g[tuple(idx)])
            offset += size

    return Tensor(out, parents=tuple(ts), backward=bw)


def stack_rows(tensors) -> Tensor:
    """Stack 1-D tensors into a matrix, one per row."""
    ts = [_coerce(t) for t in tensors]
    out = np.stack([t.values for t in ts], axis=0)

    def bw(g):
        for i, t in enumerate(ts):
            if t._tracked():
                t._accum(g[i])

    return Tensor(out, parents=tuple(ts), backward=bw)


def stack_scalars(tensors) -> Tensor:
    """Stack scalar tensors into a 1-D vector."""
    ts = [_coerce(t) for t in tensors]
    out = np.array([t.values.reshape(()) for t in ts])

    def bw(g):
        for i, t in enumerate(ts):
            if t._tracked():
                t._accum(np.asarray(g[i]).reshape(t.shape))

    return Tensor(out, parents=tuple(ts), backward=bw)


def gather_rows(x, indices) -> Tensor:
    """Select rows of a matrix; gradient scatter-adds back."""
    x = _coerce(x)
    idx = np.asarray(indices, dtype=np.intp)
    out = x.values[idx]

    def bw(g):
        if x._tracked():
            dx = np.zeros_like(x.values)
            np.add.at(dx, idx, g)
            x._accum(dx)

    return Tensor(out, parents=(x,), backward=bw)


def take_row(x, i) -> Tensor:
    """Row ``i`` of a matrix as a 1-D vector."""
    x = _coerce(x)
    out = x.values[i]

    def bw(g):
        if x._tracked():
            dx = np.zeros_like(x.values)
            dx[i] = g
            x._accum(dx)

    return Tensor(out, parents=(x,), backward=bw)


def take(x, i) -> Tensor:
    """Element ``i`` of a 1-D vector as a scalar."""
    x = _coerce(x)
    out = x.values[i]

    def bw(g):
        if x._tracked():
            dx = np.zeros_like(x.values)
            dx[i] = g
            x._accum(dx)

    return Tensor(out, parents=(x,), backward=bw)


def narrow(x, start, stop) -> Tensor:
    """Contiguous slice [start, stop) of a 1-D vector."""
    x = _coerce(x)
    out = x.values[start:stop]

    def bw(g):
        if x._tracked():
            dx = np.zeros_like(x.values)
            dx[start:stop] = g
            x._accum(dx)

    return Tensor(out, parents=(x,), backward=bw)


# -- nonlinearities -------------------------------------------------------


def leaky_relu(x, slope=0.2) -> Tensor:
    x = _coerce(x)
    out = np.where(x.values > 0, x.values, slope * x.values)

    def bw(g):
        if x._tracked():
            x._accum(g * np.where(x.values > 0, 1.0, slope))

    return Tensor(out, parents=(x,), backward=bw)


def elu(x, alpha=1.0) -> Tensor:
    x = _coerce(x)
    out = np.where(x.values > 0, x.values, alpha * np.expm1(x.values))

    def bw(g):
        if x._tracked():
            x._accum(g * np.where(x.values > 0, 1.0, out + alpha))

    return Tensor(out, parents=(x,), backward=bw)


def softmax(x, axis=-1) -> Tensor:
    x = _coerce(x)
    shifted = x.values - x.values.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def bw(g):
        if x._tracked():
            gy = g * out
            x._accum(gy - out * gy.sum(axis=axis, keepdims=True))

    return Tensor(out, parents=(x,), backward=bw)


def log(x) -> Tensor:
    x = _coerce(x)
    out = np.log(x.values)

    def bw(g):
        if x._tracked():
            x._accum(g / x.values)

    return Tensor(out, parents=(x,), backward=bw)


def power(x, exponent: float) -> Tensor:
    """Elementwise x**exponent for a constant exponent and x >= 0."""
    x = _coerce(x)
    out = np.power(x.values, exponent)

    def bw(g):
        if not x._tracked():
            return
        if exponent == 1.0:
            x._accum(g)
            return
        with np.errstate(divide="ignore", invalid="ignore"):
            d = exponent * np.power(x.values, exponent - 1.0)
        d = np.where(x.values > 0, d, 0.0)
        x._accum(g * d)

    return Tensor(out, parents=(x,), backward=bw)


def clamp(x, lo: float, hi: float) -> Tensor:
    x = _coerce(x)
    out = np.clip(x.values, lo, hi)

    def bw(g):
        if x._tracked():
            inside = (x.values >= lo) & (x.values <= hi)
            x._accum(g * inside)

    return Tensor(out, parents=(x,), backward=bw)


def dropout(x, rate: float, train_mode: bool, rng=None) -> Tensor:
    """Inverted dropout; identity when not in train mode."""
    x = _coerce(x)
    if not train_mode or rate == 0.0:
        return x
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rng is None:
        raise ValueError("dropout in train mode needs an rng")
    keep = 1.0 - rate
    mask = (rng.random(x.shape) >= rate) / keep
    out = x.values * mask

    def bw(g):
        if x._tracked():
            x._accum(g * mask)

    return Tensor(out, parents=(x,), backward=bw)


# -- reductions -----------------------------------------------------------


def mean(x, axis=None) -> Tensor:
    x = _coerce(x)
    out = x.values.mean(axis=axis)
    count = x.values.size if axis is None else x.values.shape[axis]

    def bw(g):
        if x._tracked():
            if axis is None:
                x._accum(np.full_like(x.values, g / count))
            else:
                x._accum(np.broadcast_to(np.expand_dims(g, axis), x.shape) / count)

    return Tensor(out, parents=(x,), backward=bw)


def tsum(x, axis=None) -> Tensor:
    x = _coerce(x)
    out = x.values.sum(axis=axis)

    def bw(g):
        if x._tracked():
            if axis is None:
                x._accum(np.full_like(x.values, g))
            else:
                x._accum(np.broadcast_to(np.expand_dims(g, axis), x.shape).copy())

    return Tensor(out, parents=(x,), backward=bw)


# -- checkpoints -----------------------------------------------------------
#
# Checkpoint format: a JSON object mapping parameter name to
# {"shape": [...], "values": [row-major floats]}. Floats are rendered with
# Python's shortest round-trip repr, so load(save(p)) == p bit-exactly.


def save_params(params: dict, path):
    payload = {
        name: {"shape": list(t.shape), "values": [float(v) for v in t.values.ravel()]}
        for name, t in params.items()
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True)


def load_params(path) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    out = {}
    for name, rec in payload.items():
        arr = np.array(rec["values"], dtype=np.float64).reshape(rec["shape"])
        out[name] = Tensor(arr, requires_grad=True)
    return out


# -- gradient checking ------------------------------------------------------


@dataclass
class GradCheckReport:
    max_rel_error: float
    worst_param: str
    worst_index: int
    n_coords: int
    rel_tol: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.rel_tol


def gradient_check(f, params: dict, eps=1e-5, rel_tol=1e-4, abs_floor=1e-6) -> GradCheckReport:
    """Compare reverse-mode gradients of ``f()`` against central differences.

    ``f`` must rebuild the scalar loss from ``params`` on every call and be
    deterministic (dropout disabled). ``abs_floor`` keeps finite-difference
    noise on near-zero gradients from dominating the relative error.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    for t in params.values():
        t.zero_grad()
    loss = f()
    loss.backward()
    analytic = {
        name: (t.grad.copy() if t.grad is not None else np.zeros_like(t.values))
        for name, t in params.items()
    }

    max_rel, worst_param, worst_index, n = 0.0, "", -1, 0
    for name, t in params.items():
        flat = t.values.reshape(-1)
        an = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = f().item()
            flat[i] = orig - eps
            fm = f().item()
            flat[i] = orig
            fd = (fp - fm) / (2.0 * eps)
            rel = abs(an[i] - fd) / max(abs(an[i]), abs(fd), abs_floor)
            n += 1
            if rel > max_rel:
                max_rel, worst_param, worst_index = rel, name, i
    return GradCheckReport(max_rel, worst_param, worst_index, n, rel_tol)

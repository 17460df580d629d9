"""Reverse-mode gradient tape over float64 numpy arrays.

Every op is eager: it computes its value immediately and records, for each
parent, a callback mapping the output gradient to that parent's gradient
contribution. backward() replays the tape in reverse topological order.
The op set is exactly what the model needs; analytic gradients produced
here are validated against numeric.finite_diff_grad, never trusted blind.
"""

from __future__ import annotations

import numpy as np

from .numeric import IMAG_RESIDUE_TOL, as_tensor
from .numeric import softmax as _softmax_value


class Var:
    """A tape node: a float64 array plus the gradient accumulated for it."""

    __slots__ = ("value", "grad", "_parents")

    def __init__(self, value, parents=()):
        self.value = as_tensor(value)
        self.grad = None
        self._parents = parents

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Var(shape={self.value.shape})"

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
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_var(x) -> Var:
    return x if isinstance(x, Var) else Var(x)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a gradient down to `shape` (the reverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def add(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return Var(
        a.value + b.value,
        (
            (a, lambda g: _unbroadcast(g, a.value.shape)),
            (b, lambda g: _unbroadcast(g, b.value.shape)),
        ),
    )


def sub(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return Var(
        a.value - b.value,
        (
            (a, lambda g: _unbroadcast(g, a.value.shape)),
            (b, lambda g: _unbroadcast(-g, b.value.shape)),
        ),
    )


def mul(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return Var(
        a.value * b.value,
        (
            (a, lambda g: _unbroadcast(g * b.value, a.value.shape)),
            (b, lambda g: _unbroadcast(g * a.value, b.value.shape)),
        ),
    )


def div(a, b) -> Var:
    a, b = as_var(a), as_var(b)
    return Var(
        a.value / b.value,
        (
            (a, lambda g: _unbroadcast(g / b.value, a.value.shape)),
            (b, lambda g: _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape)),
        ),
    )


def matmul(a, b) -> Var:
    """Matrix/vector product following numpy @ semantics for ndim in {1, 2}."""
    a, b = as_var(a), as_var(b)
    av, bv = a.value, b.value
    if av.ndim == 2 and bv.ndim == 2:
        vjp_a = lambda g: g @ bv.T
        vjp_b = lambda g: av.T @ g
    elif av.ndim == 1 and bv.ndim == 2:
        vjp_a = lambda g: bv @ g
        vjp_b = lambda g: np.outer(av, g)
    elif av.ndim == 2 and bv.ndim == 1:
        vjp_a = lambda g: np.outer(g, bv)
        vjp_b = lambda g: av.T @ g
    elif av.ndim == 1 and bv.ndim == 1:
        vjp_a = lambda g: g * bv
        vjp_b = lambda g: g * av
    else:
        raise ValueError(f"matmul: unsupported ranks {av.shape} @ {bv.shape}")
    return Var(av @ bv, ((a, vjp_a), (b, vjp_b)))


def transpose(a) -> Var:
    a = as_var(a)
    if a.value.ndim != 2:
        raise ValueError("transpose expects a 2-D tensor")
    return Var(a.value.T.copy(), ((a, lambda g: g.T),))


def reshape(a, shape) -> Var:
    a = as_var(a)
    return Var(a.value.reshape(shape), ((a, lambda g: g.reshape(a.value.shape)),))


def concat(vs, axis: int = 0) -> Var:
    vs = [as_var(v) for v in vs]
    val = np.concatenate([v.value for v in vs], axis=axis)
    parents = []
    offset = 0
    for v in vs:
        size = v.value.shape[axis]
        sl = [slice(None)] * val.ndim
        sl[axis] = slice(offset, offset + size)
        sl = tuple(sl)
        parents.append((v, (lambda s: lambda g: g[s].copy())(sl)))
        offset += size
    return Var(val, tuple(parents))


def sum_(a, axis=None, keepdims: bool = False) -> Var:
    a = as_var(a)
    val = a.value.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, a.value.shape).copy()
        gg = g if keepdims else np.expand_dims(g, axis)
        return np.broadcast_to(gg, a.value.shape).copy()

    return Var(np.asarray(val), ((a, vjp),))


def mean(a, axis=None, keepdims: bool = False) -> Var:
    a = as_var(a)
    count = a.value.size if axis is None else a.value.shape[axis]
    return mul(sum_(a, axis=axis, keepdims=keepdims), 1.0 / count)


def gather_rows(a, indices) -> Var:
    """Index along the first axis; rows may repeat. Gradient scatter-adds."""
    a = as_var(a)
    idx = np.asarray(indices, dtype=np.intp)

    def vjp(g):
        out = np.zeros_like(a.value)
        np.add.at(out, idx, g)
        return out

    return Var(a.value[idx].copy(), ((a, vjp),))


def pick(a, index: int) -> Var:
    """One scalar element of a 1-D tensor."""
    a = as_var(a)
    if a.value.ndim != 1:
        raise ValueError("pick expects a 1-D tensor")
    i = int(index)

    def vjp(g):
        out = np.zeros_like(a.value)
        out[i] = g
        return out

    return Var(np.asarray(a.value[i]), ((a, vjp),))


def relu(a) -> Var:
    a = as_var(a)
    return Var(np.maximum(a.value, 0.0), ((a, lambda g: g * (a.value > 0.0)),))


def softplus(a) -> Var:
    a = as_var(a)
    sig = 0.5 * (1.0 + np.tanh(0.5 * a.value))
    return Var(np.logaddexp(0.0, a.value), ((a, lambda g: g * sig),))


def exp(a) -> Var:
    a = as_var(a)
    val = np.exp(a.value)
    return Var(val, ((a, lambda g: g * val),))


def softmax(a, axis: int = -1) -> Var:
    a = as_var(a)
    p = _softmax_value(a.value, axis=axis)

    def vjp(g):
        return (g - np.sum(g * p, axis=axis, keepdims=True)) * p

    return Var(p, ((a, vjp),))


def logsumexp(a) -> Var:
    """log(sum(exp(a))) of a 1-D tensor, max-shifted for stability."""
    a = as_var(a)
    if a.value.ndim != 1:
        raise ValueError("logsumexp expects a 1-D tensor")
    m = np.max(a.value)
    e = np.exp(a.value - m)
    total = e.sum()
    p = e / total
    return Var(np.asarray(m + np.log(total)), ((a, lambda g: g * p),))


def circ_corr(a, b) -> Var:
    """Circular correlation along the last axis; 2-D operands pair row-wise.

    Forward matches numeric.circ_corr_fft, including the imaginary-residue
    guard. Gradients are themselves FFT circular ops:
    d/da = corr(g, b), d/db = circular convolution of g with a.
    """
    a, b = as_var(a), as_var(b)
    if a.value.shape != b.value.shape:
        raise ValueError(f"circ_corr: shape mismatch {a.value.shape} vs {b.value.shape}")
    fa = np.fft.fft(a.value, axis=-1)
    fb = np.fft.fft(b.value, axis=-1)
    out = np.fft.ifft(np.conj(fa) * fb, axis=-1)
    residue = float(np.max(np.abs(out.imag), initial=0.0))
    if residue >= IMAG_RESIDUE_TOL:
        raise ValueError(f"circ_corr: imaginary residue {residue:.3e} exceeds tolerance")

    def vjp_a(g):
        return np.fft.ifft(np.conj(np.fft.fft(g, axis=-1)) * fb, axis=-1).real

    def vjp_b(g):
        return np.fft.ifft(np.fft.fft(g, axis=-1) * fa, axis=-1).real

    return Var(np.ascontiguousarray(out.real), ((a, vjp_a), (b, vjp_b)))


def backward(out: Var) -> None:
    """Accumulate d(out)/d(node) into .grad for every node reachable from out."""
    if out.value.size != 1:
        raise ValueError("backward expects a scalar output")
    order = []
    seen = set()
    stack = [(out, False)]
    while stack:
        node, children_done = stack.pop()
        if children_done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent, _ in node._parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    out.grad = np.ones_like(out.value)
    for node in reversed(order):
        g = node.grad
        if g is None:
            continue
        for parent, vjp in node._parents:
            contrib = vjp(g)
            parent.grad = contrib if parent.grad is None else parent.grad + contrib

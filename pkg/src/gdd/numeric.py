"""Dense float64 tensor kernels shared by every encoder.

Tensors are plain numpy arrays in row-major order. Public ops check shapes
explicitly and raise ValueError naming the offending shapes; no NaN/Inf
leaves an op unnoticed. Randomness flows through explicit Rng instances
owned by the caller -- nothing in this package touches numpy's global RNG.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

Tensor = np.ndarray

IMAG_RESIDUE_TOL = 1e-9


def as_tensor(x) -> Tensor:
    """Coerce input to a float64 array."""
    return np.asarray(x, dtype=np.float64)


class Rng:
    """Seeded random stream (PCG64 counter-based generator).

    Identical seed + identical call sequence gives identical output on all
    platforms. Single consumer: do not share one instance across tasks.
    """

    def __init__(self, seed: int):
        seed = int(seed)
        if seed < 0:
            raise ValueError("seed must be a non-negative integer")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def uniform(self, shape, low: float = 0.0, high: float = 1.0) -> Tensor:
        return self._gen.uniform(low, high, size=shape)

    def normal(self, shape, scale: float = 1.0) -> Tensor:
        return self._gen.normal(0.0, scale, size=shape)

    def integers(self, low: int, high: int) -> int:
        """One integer in [low, high)."""
        return int(self._gen.integers(low, high))

    def choice(self, seq):
        return seq[int(self._gen.integers(0, len(seq)))]

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)


def _ensure_finite(out: Tensor, op: str) -> Tensor:
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{op}: non-finite values in result")
    return out


def matmul(a, b) -> Tensor:
    """Matrix product of two 2-D tensors."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got shapes {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: inner dimensions disagree: {a.shape} x {b.shape}")
    return _ensure_finite(a @ b, "matmul")


def softmax(v, axis: int = -1) -> Tensor:
    """Softmax along `axis`, computed with max-subtraction for overflow safety.

    Each slice along the reduced axis sums to 1; the result is invariant to
    adding a constant to the input slice.
    """
    v = as_tensor(v)
    if v.ndim == 0:
        raise ValueError("softmax: input must have at least one axis")
    if v.shape[axis] == 0:
        raise ValueError("softmax: empty axis")
    shifted = v - np.max(v, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def softplus(x) -> Tensor:
    """ln(1 + e^x), evaluated stably for large |x|. Output strictly positive."""
    return np.logaddexp(0.0, as_tensor(x))


def relu(x) -> Tensor:
    return np.maximum(as_tensor(x), 0.0)


def _check_vec_pair(a: Tensor, b: Tensor, op: str) -> None:
    if a.ndim != 1 or b.ndim != 1:
        raise ValueError(f"{op} expects 1-D operands, got shapes {a.shape} and {b.shape}")
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"{op}: length mismatch: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[0] < 1:
        raise ValueError(f"{op}: operands must be non-empty")


def circ_corr_naive(a, b) -> Tensor:
    """Direct O(d^2) circular correlation: out[k] = sum_i a[i] * b[(i+k) % d].

    Reference oracle for circ_corr_fft; kept deliberately elementary.
    """
    a, b = as_tensor(a), as_tensor(b)
    _check_vec_pair(a, b, "circ_corr_naive")
    d = a.shape[0]
    out = np.empty(d)
    for k in range(d):
        out[k] = np.dot(a, np.roll(b, -k))
    return out


def circ_corr_fft(a, b) -> Tensor:
    """Circular correlation via FFT: ifft(conj(fft(a)) * fft(b)).

    Works for arbitrary lengths (mixed-radix transform underneath; no padding).
    The imaginary residue of the inverse transform must stay below 1e-9 and
    is discarded.
    """
    a, b = as_tensor(a), as_tensor(b)
    _check_vec_pair(a, b, "circ_corr_fft")
    out = np.fft.ifft(np.conj(np.fft.fft(a)) * np.fft.fft(b))
    residue = float(np.max(np.abs(out.imag), initial=0.0))
    if residue >= IMAG_RESIDUE_TOL:
        raise ValueError(f"circ_corr_fft: imaginary residue {residue:.3e} exceeds tolerance")
    return _ensure_finite(np.ascontiguousarray(out.real), "circ_corr_fft")


def finite_diff_grad(f: Callable[[Tensor], float], x, eps: float = 1e-6) -> Tensor:
    """Central-difference gradient of a scalar function, coordinate by coordinate.

    grad[i] = (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps). This is the
    oracle every analytic gradient in the package is checked against; it must
    stay independent of the tape machinery.
    """
    if eps <= 0:
        raise ValueError("finite_diff_grad: eps must be positive")
    x = as_tensor(x)
    grad = np.empty_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp = x.copy()
        xp[idx] += eps
        xm = x.copy()
        xm[idx] -= eps
        fp, fm = float(f(xp)), float(f(xm))
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise ValueError(f"finite_diff_grad: non-finite objective at coordinate {idx}")
        grad[idx] = (fp - fm) / (2.0 * eps)
    return grad


def init_uniform(rng: Rng, shape, bound: float | None = None) -> Tensor:
    """I.i.d. uniform init in [-bound, bound].

    Without an explicit bound, 2-D weights use sqrt(6 / (fan_in + fan_out))
    and everything else (biases) starts at zero.
    """
    shape = tuple(int(s) for s in shape)
    if bound is None:
        if len(shape) == 2:
            bound = math.sqrt(6.0 / (shape[0] + shape[1]))
        else:
            return np.zeros(shape)
    if bound <= 0:
        raise ValueError("init_uniform: bound must be positive")
    return rng.uniform(shape, -bound, bound)

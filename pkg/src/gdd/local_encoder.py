"""Local feature extraction around an aspect span.

A small MLP reads the pooled sentence representation and emits the standard
deviation of a zero-mean Gaussian; sampling its density at equal intervals
away from the aspect yields a multiplicative mask that shrinks far-away
tokens. The masked representation then goes through self-attention whose
query/key matrices are mean-centered first ("covariance" attention), which
spreads the score distribution; the plain variant is kept for ablations.

The module also hosts a numerical diagnostic for the claim motivating the
centering: the score-contrast objective O(theta, phi) is stationary exactly
at the sample means of Q and K. That check never touches the training path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var, as_var
from .numeric import Tensor, as_tensor, finite_diff_grad

SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass
class GaussianMaskParams:
    W1: Tensor  # d_model x d_hid
    b1: Tensor  # d_hid
    W2: Tensor  # d_hid x 1
    b2: Tensor  # 1
    sample_interval: float = 0.2

    def __post_init__(self):
        if self.sample_interval <= 0:
            raise ValueError("sample_interval must be positive")


@dataclass
class AttentionParams:
    Wq: Tensor  # d_model x d_k
    Wk: Tensor  # d_model x d_k
    Wv: Tensor  # d_model x d_k


def sigma_var(H: Var, W1, b1, W2, b2) -> Var:
    """Learned mask width: softplus(W2 . relu(W1 . mean(H) + b1) + b2), a (1,) tensor."""
    pooled = ad.mean(H, axis=0)
    hidden = ad.relu(ad.matmul(pooled, as_var(W1)) + as_var(b1))
    return ad.softplus(ad.matmul(hidden, as_var(W2)) + as_var(b2))


def compute_sigma(H, params: GaussianMaskParams) -> float:
    """Scalar sigma for one sentence; strictly positive by construction."""
    H = as_tensor(H)
    if H.ndim != 2 or H.shape[0] < 1:
        raise ValueError(f"compute_sigma expects a non-empty n x d matrix, got {H.shape}")
    out = sigma_var(as_var(H), params.W1, params.b1, params.W2, params.b2)
    return float(out.value[0])


def gaussian_pdf(x: float, sigma: float) -> float:
    """Zero-mean Gaussian density at x."""
    if sigma <= 0:
        raise ValueError(f"gaussian_pdf: sigma must be positive, got {sigma}")
    return math.exp(-0.5 * (x / sigma) ** 2) / (sigma * SQRT_2PI)


def span_distances(n: int, span: tuple[int, int]) -> np.ndarray:
    """Token distance to the nearest span endpoint; zero inside the span."""
    s, e = span
    if not (0 <= s <= e < n):
        raise ValueError(f"invalid span [{s}, {e}] for length {n}")
    j = np.arange(n)
    return np.maximum(np.maximum(s - j, j - e), 0).astype(np.float64)


def mask_var(n: int, span: tuple[int, int], sigma: Var, interval: float,
             normalize: bool = False) -> Var:
    """Gaussian mask over token positions as a function of a (1,) sigma tensor."""
    x = span_distances(n, span) * interval
    quad = ad.div(Var(-0.5 * x * x), ad.mul(sigma, sigma))
    bell = ad.exp(quad)
    if normalize:
        return bell  # peak forced to 1; the density's 1/(sigma*sqrt(2pi)) cancels
    return ad.div(bell, ad.mul(sigma, SQRT_2PI))


def build_gaussian_mask(n: int, span: tuple[int, int], sigma: float, interval: float,
                        normalize: bool = False) -> Tensor:
    """Density values at sampled distances: GK(dist * interval) per token.

    Aspect positions all sit at GK(0), the maximum; values decay
    monotonically with distance from the span.
    """
    if sigma <= 0:
        raise ValueError(f"build_gaussian_mask: sigma must be positive, got {sigma}")
    if interval <= 0:
        raise ValueError("build_gaussian_mask: interval must be positive")
    return mask_var(n, span, as_var(np.array([sigma])), interval, normalize).value


def apply_mask(mask, H) -> Tensor:
    """Scale row j of H by mask[j]."""
    mask, H = as_tensor(mask), as_tensor(H)
    if mask.ndim != 1 or H.ndim != 2 or mask.shape[0] != H.shape[0]:
        raise ValueError(f"apply_mask: length mismatch: mask {mask.shape}, H {H.shape}")
    return mask[:, None] * H


def attention_var(H_G: Var, Wq, Wk, Wv, variant: str = "covariance",
                  heads: int = 1) -> tuple[Var, Var]:
    """Self-attention over masked token rows; returns (output n x d_k, probs).

    variant "covariance" subtracts the token-mean from Q and K before the
    score product; "original" scores raw projections. Both scale by
    sqrt(d_head) and softmax row-wise. With heads > 1 the projection columns
    split into equal head groups and outputs concatenate back to d_k; probs
    is then the first head's matrix (the trace keeps one n x n view).
    """
    if variant not in ("covariance", "original"):
        raise ValueError(f"unknown attention variant: {variant}")
    Q = ad.matmul(H_G, as_var(Wq))
    K = ad.matmul(H_G, as_var(Wk))
    V = ad.matmul(H_G, as_var(Wv))
    d_k = Q.value.shape[1]
    if heads < 1 or d_k % heads != 0:
        raise ValueError(f"attention heads ({heads}) must divide d_k ({d_k})")
    width = d_k // heads
    outs, probs0 = [], None
    for h in range(heads):
        cols = slice(h * width, (h + 1) * width)
        Qh = _slice_cols(Q, cols)
        Kh = _slice_cols(K, cols)
        Vh = _slice_cols(V, cols)
        if variant == "covariance":
            Qh = Qh - ad.mean(Qh, axis=0, keepdims=True)
            Kh = Kh - ad.mean(Kh, axis=0, keepdims=True)
        scores = ad.mul(ad.matmul(Qh, ad.transpose(Kh)), 1.0 / math.sqrt(width))
        P = ad.softmax(scores, axis=1)
        if probs0 is None:
            probs0 = P
        outs.append(ad.matmul(P, Vh))
    out = outs[0] if heads == 1 else ad.concat(outs, axis=1)
    return out, probs0


def _slice_cols(a: Var, cols: slice) -> Var:
    if cols == slice(0, a.value.shape[1]):
        return a
    return ad.transpose(ad.gather_rows(ad.transpose(a), range(cols.start, cols.stop)))


def original_attention(H_G, params: AttentionParams) -> Tensor:
    """softmax(Q K^T / sqrt(d_k)) V on raw projections of H_G."""
    out, _ = attention_var(as_var(as_tensor(H_G)), params.Wq, params.Wk, params.Wv,
                           variant="original")
    return out.value


def covariance_attention(H_G, params: AttentionParams) -> Tensor:
    """Same as original_attention but with token-mean-centered Q and K."""
    out, _ = attention_var(as_var(as_tensor(H_G)), params.Wq, params.Wk, params.Wv,
                           variant="covariance")
    return out.value


def local_forward_var(H: Var, span: tuple[int, int], mask_params, attn_params,
                      interval: float, variant: str = "covariance",
                      normalize_mask: bool = False, use_mask: bool = True,
                      heads: int = 1):
    """Full local path: sigma -> mask -> attention -> mean over aspect rows.

    mask_params / attn_params are (W1, b1, W2, b2) and (Wq, Wk, Wv) tuples of
    Var or ndarray. Returns (h_local Var[d_k], trace dict).
    """
    n = H.value.shape[0]
    s, e = span
    trace = {}
    if use_mask:
        sigma = sigma_var(H, *mask_params)
        mask = mask_var(n, span, sigma, interval, normalize=normalize_mask)
        H_G = ad.mul(ad.reshape(mask, (n, 1)), H)
        trace["sigma"] = float(sigma.value[0])
        trace["mask"] = mask.value.tolist()
    else:
        H_G = H
        trace["sigma"] = None
        trace["mask"] = None
    out, probs = attention_var(H_G, *attn_params, variant=variant, heads=heads)
    trace["local_attention"] = probs.value.tolist()
    h_local = ad.mean(ad.gather_rows(out, range(s, e + 1)), axis=0)
    return h_local, trace


def local_forward(H, span, mask_params: GaussianMaskParams,
                  attn_params: AttentionParams, variant: str = "covariance",
                  normalize_mask: bool = False) -> Tensor:
    """Numpy-facing wrapper around local_forward_var."""
    H = as_tensor(H)
    out, _ = local_forward_var(
        as_var(H), span,
        (mask_params.W1, mask_params.b1, mask_params.W2, mask_params.b2),
        (attn_params.Wq, attn_params.Wk, attn_params.Wv),
        interval=mask_params.sample_interval, variant=variant,
        normalize_mask=normalize_mask)
    return out.value


# ---------------------------------------------------------------------------
# Score-contrast objective diagnostics (not on the training path).
# ---------------------------------------------------------------------------

def _contrast_half(X: Tensor, center: Tensor, M: Tensor) -> float:
    """sum_j (x_j - c)^T M (x_j - c) / sum_j (x_j - c)^T (x_j - c)."""
    D = X - center
    denom = float(np.sum(D * D))
    if denom == 0.0:
        raise ValueError("degenerate objective: all rows equal the centering vector")
    return float(np.einsum("jd,de,je->", D, M, D)) / denom


def _pairwise_scatter(X: Tensor) -> Tensor:
    """sum over pairs (x_a - x_b)(x_a - x_b)^T, normalized by the paired trace."""
    diffs = X[:, None, :] - X[None, :, :]
    denom = float(np.sum(diffs * diffs))
    if denom == 0.0:
        raise ValueError("degenerate objective: all rows identical")
    flat = diffs.reshape(-1, X.shape[1])
    return (flat.T @ flat) / denom


def eval_objective(theta, phi, Q, K) -> float:
    """Score-contrast objective O(theta, phi) in its Rayleigh-quotient form.

    The first addend measures how much the centered queries spread along the
    key-difference directions, the second swaps the roles. Degenerate inputs
    (all queries equal or all keys equal) raise.
    """
    theta, phi = as_tensor(theta), as_tensor(phi)
    Q, K = as_tensor(Q), as_tensor(K)
    if Q.ndim != 2 or K.ndim != 2 or Q.shape != K.shape:
        raise ValueError(f"eval_objective expects matching N x d matrices, got {Q.shape}, {K.shape}")
    if Q.shape[0] < 2:
        raise ValueError("eval_objective needs at least two rows")
    Phi = _pairwise_scatter(K)
    Omega = _pairwise_scatter(Q)
    return _contrast_half(Q, theta, Phi) + _contrast_half(K, phi, Omega)


def eval_objective_direct(theta, phi, Q, K) -> float:
    """Brute-force quadruple-sum form of the objective; test oracle only."""
    theta, phi = as_tensor(theta), as_tensor(phi)
    Q, K = as_tensor(Q), as_tensor(K)
    dq = Q - theta
    dk = K - phi
    n = Q.shape[0]

    num1 = 0.0
    for j in range(n):
        for xi in range(n):
            for eta in range(n):
                num1 += (np.dot(dq[j], dk[xi]) - np.dot(dq[j], dk[eta])) ** 2
    den1 = sum(np.dot(dq[j], dq[j]) for j in range(n)) * sum(
        np.dot(K[a] - K[b], K[a] - K[b]) for a in range(n) for b in range(n))

    num2 = 0.0
    for xi in range(n):
        for j in range(n):
            for p in range(n):
                num2 += (np.dot(dk[xi], dq[j]) - np.dot(dk[xi], dq[p])) ** 2
    den2 = sum(np.dot(dk[xi], dk[xi]) for xi in range(n)) * sum(
        np.dot(Q[a] - Q[b], Q[a] - Q[b]) for a in range(n) for b in range(n))

    if den1 == 0.0 or den2 == 0.0:
        raise ValueError("degenerate objective")
    return num1 / den1 + num2 / den2


@dataclass
class StationarityReport:
    grad_norm_at_mean: float
    median_random_grad_norm: float
    is_stationary: bool


def check_stationarity(Q, K, eps: float = 1e-6, num_random: int = 100,
                       tol_ratio: float = 1e-5, rng=None) -> StationarityReport:
    """Finite-difference test that O is stationary at (mean Q, mean K).

    Compares the gradient norm at the sample means against the median
    gradient norm at `num_random` perturbed (theta, phi) points; stationary
    means the ratio falls below tol_ratio.
    """
    Q, K = as_tensor(Q), as_tensor(K)
    d = Q.shape[1]

    def packed(v: Tensor) -> float:
        return eval_objective(v[:d], v[d:], Q, K)

    center = np.concatenate([Q.mean(axis=0), K.mean(axis=0)])
    g_mean = float(np.linalg.norm(finite_diff_grad(packed, center, eps)))

    if rng is None:
        from .numeric import Rng
        rng = Rng(0)
    norms = []
    for _ in range(num_random):
        point = center + rng.uniform((2 * d,), -1.0, 1.0)
        norms.append(float(np.linalg.norm(finite_diff_grad(packed, point, eps))))
    med = float(np.median(norms))
    return StationarityReport(
        grad_norm_at_mean=g_mean,
        median_random_grad_norm=med,
        is_stationary=g_mean < tol_ratio * med,
    )

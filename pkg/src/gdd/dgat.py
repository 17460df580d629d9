"""Global encoder: dual-level attention over the aspect-word graph.

Each layer runs two families of heads over the aspect's star graph. A
dual-level head first scores edges against the aspect (target-edge), then
reuses those weights inside the node scores (target-node), and aggregates
neighbors through circular correlation of projected node and edge features.
A relational head scores neighbors purely from edge embeddings via a small
MLP. The layer output concatenates all heads; edges are reprojected between
layers while context-word features stay at their layer-0 values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Var, as_var
from .numeric import Tensor, as_tensor


@dataclass
class DualHeadParams:
    Wa: Tensor  # aspect projection, a_width x d_head
    We: Tensor  # edge projection, d_edge x d_head
    Wi: Tensor  # node projection, d_model x d_head


@dataclass
class RelHeadParams:
    Wv: Tensor  # value projection, d_model x d_head
    W1: Tensor  # edge-scoring MLP, d_edge x d_head
    b1: Tensor
    W2: Tensor  # d_head x 1
    b2: Tensor  # 1


@dataclass
class DgatLayerParams:
    dual: list[DualHeadParams]
    rel: list[RelHeadParams]
    Wr: Tensor  # relation update, d_edge x d_edge_out

    @property
    def num_heads(self) -> int:
        return len(self.dual) + len(self.rel)


@dataclass
class GraphBatch:
    """One aspect's graph tensors: aspect vector, m neighbor rows, m edge rows."""

    h_a: Tensor
    H_N: Tensor
    E: Tensor

    def __post_init__(self):
        if self.H_N.shape[0] != self.E.shape[0]:
            raise ValueError(
                f"neighbor/edge row mismatch: {self.H_N.shape[0]} vs {self.E.shape[0]}")

    @property
    def num_neighbors(self) -> int:
        return self.H_N.shape[0]


def _maybe_scale(logits: Var, d_head: int, scale: bool) -> Var:
    return ad.mul(logits, 1.0 / math.sqrt(d_head)) if scale else logits


def target_edge_attention_var(h_a: Var, E: Var, Wa, We, scale: bool = False) -> Var:
    """Edge-level weights: softmax over <Wa h_a, We e_i> across the m neighbors."""
    a_proj = ad.matmul(h_a, as_var(Wa))
    e_proj = ad.matmul(E, as_var(We))
    logits = ad.matmul(e_proj, a_proj)
    return ad.softmax(_maybe_scale(logits, a_proj.value.shape[0], scale), axis=-1)


def target_node_attention_var(h_a: Var, H_N: Var, beta: Var, Wa, Wi,
                              scale: bool = False) -> Var:
    """Node-level weights: softmax of beta_i * <Wa h_a, Wi h_i>.

    beta multiplies the logit, it never masks: a zero beta_i leaves logit 0,
    which still receives softmax mass.
    """
    a_proj = ad.matmul(h_a, as_var(Wa))
    n_proj = ad.matmul(H_N, as_var(Wi))
    logits = ad.mul(beta, ad.matmul(n_proj, a_proj))
    return ad.softmax(_maybe_scale(logits, a_proj.value.shape[0], scale), axis=-1)


def dual_head_var(h_a: Var, H_N: Var, E: Var, p: DualHeadParams,
                  scale: bool = False):
    """One dual-level head: omega-weighted sum of corr(Wi h_i, We e_i) rows.

    Returns (head output Var[d_head], beta Var[m], omega Var[m]).
    """
    beta = target_edge_attention_var(h_a, E, p.Wa, p.We, scale)
    omega = target_node_attention_var(h_a, H_N, beta, p.Wa, p.Wi, scale)
    n_proj = ad.matmul(H_N, as_var(p.Wi))
    e_proj = ad.matmul(E, as_var(p.We))
    composed = ad.circ_corr(n_proj, e_proj)  # m x d_head, row-wise
    return ad.matmul(omega, composed), beta, omega


def relational_head_var(H_N: Var, E: Var, p: RelHeadParams):
    """One relational head: neighbor weights from an edge-only MLP.

    rho_i = softmax(relu(e_i W1 + b1) W2 + b2); output = sum_i rho_i (Wv h_i).
    Returns (head output Var[d_head], rho Var[m]).
    """
    hidden = ad.relu(ad.matmul(E, as_var(p.W1)) + as_var(p.b1))
    logits = ad.reshape(ad.matmul(hidden, as_var(p.W2)), (-1,)) + as_var(p.b2)
    rho = ad.softmax(logits, axis=-1)
    return ad.matmul(rho, ad.matmul(H_N, as_var(p.Wv))), rho


def relation_update_var(E: Var, Wr) -> Var:
    """Project edge embeddings into the next layer's edge space."""
    return ad.matmul(E, as_var(Wr))


def dgat_layer_var(h_a: Var, H_N: Var, E: Var, params: DgatLayerParams,
                   d_head: int, scale: bool = False):
    """One layer: concat(U dual heads, V relational heads) plus updated edges.

    An empty graph (m == 0) yields a zero vector of the layer width and a
    trace flag instead of attention coefficients.
    """
    m = H_N.value.shape[0]
    width = params.num_heads * d_head
    trace = {"beta": [], "omega": [], "rho": [], "empty": m == 0}
    if m == 0:
        return Var(np.zeros(width)), E, trace
    outs = []
    for hp in params.dual:
        out, beta, omega = dual_head_var(h_a, H_N, E, hp, scale)
        outs.append(out)
        trace["beta"].append(beta.value.tolist())
        trace["omega"].append(omega.value.tolist())
    for rp in params.rel:
        out, rho = relational_head_var(H_N, E, rp)
        outs.append(out)
        trace["rho"].append(rho.value.tolist())
    h_next = ad.concat(outs)
    E_next = relation_update_var(E, params.Wr)
    return h_next, E_next, trace


def global_forward_var(h_a: Var, H_N: Var, E: Var, layers: list[DgatLayerParams],
                       d_head: int, scale: bool = False, dropout: float = 0.0,
                       rng=None):
    """Stack of layers; aspect and edge representations evolve, nodes do not.

    Dropout (training only; pass an Rng) hits the concatenated aspect vector
    after each layer. Returns (h_a_final Var, list of per-layer traces).
    """
    traces = []
    for layer in layers:
        h_a, E, trace = dgat_layer_var(h_a, H_N, E, layer, d_head, scale)
        if dropout > 0.0 and rng is not None:
            keep = (rng.uniform(h_a.value.shape) >= dropout) / (1.0 - dropout)
            h_a = ad.mul(h_a, keep)
        traces.append(trace)
    return h_a, traces


# ---------------------------------------------------------------------------
# Numpy-facing wrappers (inference/testing surface; same code path underneath).
# ---------------------------------------------------------------------------

def target_edge_attention(h_a, E, Wa, We, scale: bool = False) -> Tensor:
    _require_nonempty(E)
    return target_edge_attention_var(as_var(as_tensor(h_a)), as_var(as_tensor(E)),
                                     Wa, We, scale).value


def target_node_attention(h_a, H_N, beta, Wa, Wi, scale: bool = False) -> Tensor:
    _require_nonempty(H_N)
    return target_node_attention_var(as_var(as_tensor(h_a)), as_var(as_tensor(H_N)),
                                     as_var(as_tensor(beta)), Wa, Wi, scale).value


def dual_head(h_a, H_N, E, params: DualHeadParams, scale: bool = False) -> Tensor:
    _require_nonempty(H_N)
    out, _, _ = dual_head_var(as_var(as_tensor(h_a)), as_var(as_tensor(H_N)),
                              as_var(as_tensor(E)), params, scale)
    return out.value


def relational_head(H_N, E, params: RelHeadParams) -> Tensor:
    _require_nonempty(H_N)
    out, _ = relational_head_var(as_var(as_tensor(H_N)), as_var(as_tensor(E)), params)
    return out.value


def relation_update(E, Wr) -> Tensor:
    E, Wr = as_tensor(E), as_tensor(Wr)
    if E.ndim != 2 or Wr.ndim != 2 or E.shape[1] != Wr.shape[0]:
        raise ValueError(f"relation_update: shape mismatch {E.shape} x {Wr.shape}")
    return relation_update_var(as_var(E), Wr).value


def dgat_layer(batch: GraphBatch, params: DgatLayerParams, d_head: int,
               scale: bool = False):
    """Numpy wrapper: returns (h_a_next, E_next, trace)."""
    h, E, trace = dgat_layer_var(as_var(batch.h_a), as_var(batch.H_N),
                                 as_var(batch.E), params, d_head, scale)
    return h.value, E.value, trace


def _require_nonempty(rows) -> None:
    if as_tensor(rows).shape[0] == 0:
        raise ValueError("empty graph: no neighbors to attend over")

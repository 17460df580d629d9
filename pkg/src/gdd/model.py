"""Model assembly: configuration, named parameters, forward pass, loss.

The final representation concatenates the local (masked covariance
attention) feature with the global (graph attention) feature and maps it
through one fully connected layer to the three polarity probabilities.
Class order is fixed: positive=0, neutral=1, negative=2.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import dgat as dg
from . import local_encoder as le
from .autodiff import Var
from .data import LABELS, Example
from .dep_graph import Awig, build_awig
from .embeddings import TagVocab, Vocab, composed_tag_ids, token_ids
from .numeric import Rng, Tensor, init_uniform


@dataclass
class ModelConfig:
    d_model: int = 64
    d_tag: int = 16
    d_head: int = 16
    d_hid: int = 32
    U: int = 3
    V: int = 3
    L: int = 2
    kappa_max: int = 3
    sample_interval: float = 0.2
    dropout: float = 0.0
    lr: float = 5e-5
    l2: float = 1e-5
    epochs: int = 30
    seed: int = 0
    batch_size: int = 1
    normalize_mask: bool = False
    attention: str = "covariance"
    scale_logits: bool = False
    use_mask: bool = True
    drop_punct: bool = False
    local_heads: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        for name in ("d_model", "d_tag", "d_head", "d_hid", "L", "kappa_max",
                     "epochs", "batch_size", "local_heads"):
            if getattr(self, name) < 1:
                raise ValueError(f"config: {name} must be positive")
        if self.U < 0 or self.V < 0 or self.U + self.V < 1:
            raise ValueError("config: need at least one attention head (U + V >= 1)")
        if self.sample_interval <= 0:
            raise ValueError("config: sample_interval must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("config: dropout must lie in [0, 1)")
        if self.attention not in ("covariance", "original"):
            raise ValueError(f"config: unknown attention variant {self.attention!r}")
        if self.d_head % self.local_heads != 0:
            raise ValueError("config: local_heads must divide d_head")

    @property
    def d_edge0(self) -> int:
        return (self.kappa_max + 1) * self.d_tag

    def aspect_width(self, layer: int) -> int:
        return self.d_model if layer == 0 else (self.U + self.V) * self.d_head

    def edge_width(self, layer: int) -> int:
        return self.d_edge0 if layer == 0 else self.d_model

    @property
    def final_width(self) -> int:
        return (self.U + self.V + 1) * self.d_head

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name: f.type for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, raw in d.items():
            if key not in known:
                raise ValueError(f"config: unknown key {key!r}")
            kwargs[key] = _coerce(key, raw, known[key])
        return cls(**kwargs)


def _coerce(key: str, raw, typ):
    if typ in ("bool", bool):
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("true", "1", "yes"):
            return True
        if text in ("false", "0", "no"):
            return False
        raise ValueError(f"config: {key} expects a boolean, got {raw!r}")
    if typ in ("int", int):
        return int(raw)
    if typ in ("float", float):
        return float(raw)
    return str(raw)


class ModelParams:
    """Named trainable tensors; every tensor reachable by exactly one name."""

    def __init__(self):
        self._tensors: dict[str, Tensor] = {}

    def add(self, name: str, tensor: Tensor) -> None:
        if name in self._tensors:
            raise ValueError(f"duplicate parameter name: {name}")
        self._tensors[name] = np.asarray(tensor, dtype=np.float64)

    def get(self, name: str) -> Tensor:
        return self._tensors[name]

    def set(self, name: str, tensor: Tensor) -> None:
        if name not in self._tensors:
            raise KeyError(name)
        if self._tensors[name].shape != tensor.shape:
            raise ValueError(f"shape mismatch for {name}: "
                             f"{self._tensors[name].shape} vs {tensor.shape}")
        self._tensors[name] = np.asarray(tensor, dtype=np.float64)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def leaves(self) -> dict[str, Var]:
        """Fresh tape leaves for one forward/backward pass."""
        return {name: Var(t) for name, t in self._tensors.items()}

    def total_size(self) -> int:
        return sum(t.size for t in self._tensors.values())


def init_params(config: ModelConfig, vocab_size: int, tag_vocab_size: int,
                rng: Rng) -> ModelParams:
    """Allocate and seed every trainable tensor in a fixed, reproducible order."""
    p = ModelParams()
    p.add("embed.token", init_uniform(rng, (vocab_size, config.d_model)))
    p.add("embed.tag", init_uniform(rng, (tag_vocab_size, config.d_tag)))
    p.add("embed.hop", init_uniform(rng, (config.kappa_max, config.d_tag)))
    p.add("local.mask.W1", init_uniform(rng, (config.d_model, config.d_hid)))
    p.add("local.mask.b1", init_uniform(rng, (config.d_hid,)))
    p.add("local.mask.W2", init_uniform(rng, (config.d_hid, 1)))
    p.add("local.mask.b2", init_uniform(rng, (1,)))
    for w in ("Wq", "Wk", "Wv"):
        p.add(f"local.attn.{w}", init_uniform(rng, (config.d_model, config.d_head)))
    for l in range(config.L):
        a_w, e_w = config.aspect_width(l), config.edge_width(l)
        for u in range(config.U):
            p.add(f"dgat.l{l}.dual{u}.Wa", init_uniform(rng, (a_w, config.d_head)))
            p.add(f"dgat.l{l}.dual{u}.We", init_uniform(rng, (e_w, config.d_head)))
            p.add(f"dgat.l{l}.dual{u}.Wi", init_uniform(rng, (config.d_model, config.d_head)))
        for v in range(config.V):
            p.add(f"dgat.l{l}.rel{v}.Wv", init_uniform(rng, (config.d_model, config.d_head)))
            p.add(f"dgat.l{l}.rel{v}.W1", init_uniform(rng, (e_w, config.d_head)))
            p.add(f"dgat.l{l}.rel{v}.b1", init_uniform(rng, (config.d_head,)))
            p.add(f"dgat.l{l}.rel{v}.W2", init_uniform(rng, (config.d_head, 1)))
            p.add(f"dgat.l{l}.rel{v}.b2", init_uniform(rng, (1,)))
        p.add(f"dgat.l{l}.Wr", init_uniform(rng, (e_w, config.d_model)))
    p.add("out.W", init_uniform(rng, (config.final_width, len(LABELS))))
    p.add("out.b", init_uniform(rng, (len(LABELS),)))
    return p


@dataclass
class Prediction:
    probs: Tensor  # over (positive, neutral, negative)
    label_id: int
    logits: Tensor

    @property
    def label(self) -> str:
        return LABELS[self.label_id]


@dataclass
class Prepared:
    """Everything derivable from an Example before touching parameters."""

    example: Example
    token_ids: np.ndarray
    span: tuple[int, int]  # inclusive
    gold: int
    awig: Awig
    word_token_idx: np.ndarray
    edge_slot_ids: np.ndarray  # m x kappa_max tag-table rows
    edge_hop_idx: np.ndarray   # m hop-table rows


class Model:
    """Configured parameters plus the forward machinery tying them together."""

    def __init__(self, config: ModelConfig, vocab: Vocab, tag_vocab: TagVocab,
                 params: ModelParams,
                 frozen_embeddings: dict[tuple[str, ...], Tensor] | None = None):
        self.config = config
        self.vocab = vocab
        self.tag_vocab = tag_vocab
        self.params = params
        self.frozen_embeddings = frozen_embeddings

    @classmethod
    def build(cls, config: ModelConfig, vocab: Vocab, tag_vocab: TagVocab,
              seed: int | None = None) -> "Model":
        rng = Rng(config.seed if seed is None else seed)
        params = init_params(config, len(vocab), len(tag_vocab), rng)
        return cls(config, vocab, tag_vocab, params)

    @classmethod
    def build_for_examples(cls, config: ModelConfig, examples) -> "Model":
        vocab = Vocab.from_corpus(ex.tokens for ex in examples)
        tag_vocab = TagVocab.from_corpus(ex.dep_rels for ex in examples)
        return cls.build(config, vocab, tag_vocab)

    def prepare(self, example: Example) -> Prepared:
        cfg = self.config
        awig = build_awig(example.tree(), example.aspect_span_inclusive,
                          cfg.kappa_max, drop_punct=cfg.drop_punct)
        m = awig.num_words
        slots = np.zeros((m, cfg.kappa_max), dtype=np.intp)
        hops = np.zeros(m, dtype=np.intp)
        for node_id, tag in awig.edges:
            slots[node_id], hops[node_id] = composed_tag_ids(
                tag.path, tag.hops, self.tag_vocab, cfg.kappa_max)
        return Prepared(
            example=example,
            token_ids=token_ids(example.tokens, self.vocab),
            span=example.aspect_span_inclusive,
            gold=example.label_id,
            awig=awig,
            word_token_idx=np.array([tok for tok, _ in awig.word_nodes], dtype=np.intp),
            edge_slot_ids=slots,
            edge_hop_idx=hops,
        )

    def _sentence_matrix(self, prep: Prepared, leaves: dict[str, Var]) -> Var:
        if self.frozen_embeddings is not None:
            key = tuple(prep.example.tokens)
            if key not in self.frozen_embeddings:
                raise ValueError(f"no frozen embedding record for sentence: {' '.join(key)}")
            H = self.frozen_embeddings[key]
            if H.shape != (len(key), self.config.d_model):
                raise ValueError(
                    f"frozen embedding shape {H.shape} != ({len(key)}, {self.config.d_model})")
            return Var(H)
        return ad.gather_rows(leaves["embed.token"], prep.token_ids)

    def _dgat_layer_params(self, leaves: dict[str, Var], layer: int) -> dg.DgatLayerParams:
        g = lambda name: leaves[f"dgat.l{layer}.{name}"]
        return dg.DgatLayerParams(
            dual=[dg.DualHeadParams(Wa=g(f"dual{u}.Wa"), We=g(f"dual{u}.We"),
                                    Wi=g(f"dual{u}.Wi"))
                  for u in range(self.config.U)],
            rel=[dg.RelHeadParams(Wv=g(f"rel{v}.Wv"), W1=g(f"rel{v}.W1"),
                                  b1=g(f"rel{v}.b1"), W2=g(f"rel{v}.W2"),
                                  b2=g(f"rel{v}.b2"))
                 for v in range(self.config.V)],
            Wr=g("Wr"),
        )

    def _edge_matrix(self, prep: Prepared, leaves: dict[str, Var]) -> Var:
        cfg = self.config
        m = prep.awig.num_words
        if m == 0:
            return Var(np.zeros((0, cfg.d_edge0)))
        tag_rows = ad.gather_rows(leaves["embed.tag"], prep.edge_slot_ids.reshape(-1))
        path_part = ad.reshape(tag_rows, (m, cfg.kappa_max * cfg.d_tag))
        hop_part = ad.gather_rows(leaves["embed.hop"], prep.edge_hop_idx)
        return ad.concat([path_part, hop_part], axis=1)

    def forward_var(self, prep: Prepared, leaves: dict[str, Var],
                    train: bool = False, dropout_rng: Rng | None = None):
        """Tape forward pass; returns (logits Var[3], trace dict)."""
        cfg = self.config
        H = self._sentence_matrix(prep, leaves)

        h_local, trace = le.local_forward_var(
            H, prep.span,
            (leaves["local.mask.W1"], leaves["local.mask.b1"],
             leaves["local.mask.W2"], leaves["local.mask.b2"]),
            (leaves["local.attn.Wq"], leaves["local.attn.Wk"], leaves["local.attn.Wv"]),
            interval=cfg.sample_interval, variant=cfg.attention,
            normalize_mask=cfg.normalize_mask, use_mask=cfg.use_mask,
            heads=cfg.local_heads)

        h_a = ad.sum_(ad.gather_rows(H, prep.awig.aspect_token_ids), axis=0)
        H_N = ad.gather_rows(H, prep.word_token_idx)
        E = self._edge_matrix(prep, leaves)
        layers = [self._dgat_layer_params(leaves, l) for l in range(cfg.L)]
        h_global, layer_traces = dg.global_forward_var(
            h_a, H_N, E, layers, cfg.d_head, scale=cfg.scale_logits,
            dropout=cfg.dropout if train else 0.0, rng=dropout_rng)

        trace["dgat"] = {
            "beta": [t["beta"] for t in layer_traces],
            "omega": [t["omega"] for t in layer_traces],
            "rho": [t["rho"] for t in layer_traces],
            "empty": layer_traces[0]["empty"] if layer_traces else True,
        }

        h_final = ad.concat([h_local, h_global])
        logits = ad.matmul(h_final, leaves["out.W"]) + leaves["out.b"]
        return logits, trace

    def predict(self, example: Example, with_trace: bool = False):
        prep = self.prepare(example)
        logits, trace = self.forward_var(prep, self.params.leaves())
        probs = np.exp(logits.value - np.max(logits.value))
        probs /= probs.sum()
        pred = Prediction(probs=probs, label_id=int(np.argmax(probs)),
                          logits=logits.value.copy())
        return (pred, trace) if with_trace else pred

    def regularizer_var(self, leaves: dict[str, Var]) -> Var:
        """Sum of squared weight-matrix entries; biases and PAD rows excluded."""
        total = None
        for name, leaf in leaves.items():
            if leaf.value.ndim != 2:
                continue
            sq = ad.sum_(ad.mul(leaf, leaf))
            if name in ("embed.token", "embed.tag"):
                row0 = ad.gather_rows(leaf, [0])
                sq = sq - ad.sum_(ad.mul(row0, row0))
            total = sq if total is None else total + sq
        return total if total is not None else Var(np.asarray(0.0))

    def batch_loss_var(self, preps, leaves: dict[str, Var], train: bool = False,
                       dropout_rng: Rng | None = None) -> Var:
        """Summed cross-entropy over the batch plus one l2 term."""
        total = None
        for prep in preps:
            logits, _ = self.forward_var(prep, leaves, train=train,
                                         dropout_rng=dropout_rng)
            ce = ad.logsumexp(logits) - ad.pick(logits, prep.gold)
            total = ce if total is None else total + ce
        if self.config.l2 > 0.0:
            total = total + ad.mul(self.regularizer_var(leaves), self.config.l2)
        return total


def cross_entropy(pred: Prediction, gold: int) -> float:
    """-log P(gold), evaluated through log-sum-exp so it never hits -inf."""
    if gold not in (0, 1, 2):
        raise ValueError(f"gold label id must be 0, 1, or 2, got {gold}")
    z = pred.logits
    m = float(np.max(z))
    return m + float(np.log(np.sum(np.exp(z - m)))) - float(z[gold])


def loss(pred: Prediction, gold: int, params: ModelParams, l2: float) -> float:
    """Single-example loss: cross-entropy plus l2 over weight matrices."""
    reg = 0.0
    if l2 > 0.0:
        for name, t in params.items():
            if t.ndim != 2:
                continue
            reg += float(np.sum(t * t))
            if name in ("embed.token", "embed.tag"):
                reg -= float(np.sum(t[0] * t[0]))
    return cross_entropy(pred, gold) + l2 * reg

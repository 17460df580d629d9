"""Lookup tables mapping tokens, dependency tags, and hop counts to vectors.

The trainable token table stands in for a heavyweight contextual encoder;
users who already have frozen per-token vectors can inject them through the
JSONL loader below instead.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .numeric import Rng, Tensor, init_uniform

PAD = 0
UNK = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"
PAD_TAG_TOKEN = "<pad-tag>"
UNK_TAG_TOKEN = "<unk-tag>"


class Vocab:
    """Token <-> id map with reserved PAD=0 and UNK=1 slots.

    Out-of-vocabulary lookups fall back to UNK; ids are bijective over the
    non-reserved entries.
    """

    pad_token = PAD_TOKEN
    unk_token = UNK_TOKEN

    def __init__(self):
        self._id_to_token = [self.pad_token, self.unk_token]
        self._token_to_id = {self.pad_token: PAD, self.unk_token: UNK}

    @classmethod
    def from_corpus(cls, sentences: Iterable[Sequence[str]]) -> "Vocab":
        v = cls()
        for tokens in sentences:
            for tok in tokens:
                v.add(tok)
        return v

    def add(self, token: str) -> int:
        if token in self._token_to_id:
            return self._token_to_id[token]
        idx = len(self._id_to_token)
        self._id_to_token.append(token)
        self._token_to_id[token] = idx
        return idx

    def id(self, token: str) -> int:
        return self._token_to_id.get(token, UNK)

    def token(self, idx: int) -> str:
        return self._id_to_token[idx]

    def __len__(self) -> int:
        return len(self._id_to_token)

    def to_list(self) -> list[str]:
        return list(self._id_to_token)

    @classmethod
    def from_list(cls, tokens: list[str]) -> "Vocab":
        v = cls.__new__(cls)
        v._id_to_token = list(tokens)
        v._token_to_id = {t: i for i, t in enumerate(tokens)}
        return v


class TagVocab(Vocab):
    """Dependency-relation-tag vocabulary: PAD_TAG=0, UNK_TAG=1, then tags.

    Unseen test-time tags map to UNK_TAG. Hop counts are indexed separately:
    hop k (1-based) lives at row k-1 of the hop table.
    """

    pad_token = PAD_TAG_TOKEN
    unk_token = UNK_TAG_TOKEN

    @staticmethod
    def hop_index(hops: int, kappa_max: int) -> int:
        if not 1 <= hops <= kappa_max:
            raise ValueError(f"hop count {hops} outside 1..{kappa_max}")
        return hops - 1


@dataclass
class EmbeddingTable:
    """A trainable rows x dim weight matrix addressed by integer id."""

    weights: Tensor

    @property
    def rows(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def init(cls, rows: int, dim: int, rng: Rng) -> "EmbeddingTable":
        return cls(weights=init_uniform(rng, (rows, dim)))

    def lookup(self, ids) -> Tensor:
        ids = np.asarray(ids, dtype=np.intp)
        if ids.size and (ids.min() < 0 or ids.max() >= self.rows):
            raise ValueError(f"embedding id out of range [0, {self.rows})")
        return self.weights[ids]


def token_ids(tokens: Sequence[str], vocab: Vocab) -> np.ndarray:
    return np.array([vocab.id(t) for t in tokens], dtype=np.intp)


def embed_tokens(tokens: Sequence[str], vocab: Vocab, table: EmbeddingTable) -> Tensor:
    """Stack one embedding row per token; OOV tokens resolve to the UNK row."""
    if len(tokens) == 0:
        raise ValueError("embed_tokens: empty token list")
    return table.lookup(token_ids(tokens, vocab))


def composed_tag_ids(path: Sequence[str], hops: int, tag_vocab: TagVocab, kappa_max: int):
    """Resolve a composed tag to its fixed-width id encoding.

    Returns (slot_ids, hop_index): kappa_max tag-table ids (path right-padded
    with PAD_TAG) and the hop-table row. hops must not exceed kappa_max; the
    graph builder filters deeper nodes before we get here.
    """
    if hops != len(path):
        raise ValueError(f"composed tag: hop count {hops} != path length {len(path)}")
    if hops < 1:
        raise ValueError("composed tag: needs at least one hop")
    if hops > kappa_max:
        raise ValueError(f"composed tag: {hops} hops exceeds kappa_max={kappa_max}")
    slots = [tag_vocab.id(t) for t in path] + [PAD] * (kappa_max - hops)
    return np.array(slots, dtype=np.intp), TagVocab.hop_index(hops, kappa_max)


def embed_composed_tag(
    path: Sequence[str],
    hops: int,
    tag_table: EmbeddingTable,
    hop_table: EmbeddingTable,
    tag_vocab: TagVocab,
    kappa_max: int,
) -> Tensor:
    """Fixed-width edge vector: kappa_max tag slots concatenated, then the hop row.

    Width is (kappa_max + 1) * d_tag for every edge regardless of path length.
    """
    slots, hop_idx = composed_tag_ids(path, hops, tag_vocab, kappa_max)
    parts = tag_table.lookup(slots).reshape(-1)
    return np.concatenate([parts, hop_table.lookup([hop_idx]).reshape(-1)])


def load_precomputed(path) -> dict[tuple[str, ...], Tensor]:
    """Read frozen per-token vectors from JSON Lines.

    Each record is {"tokens": [...], "vectors": [[...], ...]} with one vector
    per token. Sentences are keyed by their exact token sequence.
    """
    out: dict[tuple[str, ...], Tensor] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {e}") from None
            if not isinstance(rec, dict) or set(rec) != {"tokens", "vectors"}:
                raise ValueError(f"{path}:{lineno}: expected keys 'tokens' and 'vectors'")
            tokens, vectors = rec["tokens"], rec["vectors"]
            if len(vectors) != len(tokens):
                raise ValueError(
                    f"{path}:{lineno}: {len(vectors)} vectors for {len(tokens)} tokens"
                )
            arr = np.asarray(vectors, dtype=np.float64)
            if arr.ndim != 2:
                raise ValueError(f"{path}:{lineno}: vectors must be a 2-D list")
            out[tuple(tokens)] = arr
    return out

"""Self-describing binary checkpoints.

Layout: 4-byte magic "GDD1", 8-byte little-endian header length, a JSON
header (config, both vocabularies, and an ordered parameter manifest of
name -> shape), then each tensor's raw little-endian float64 data in
manifest order.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .embeddings import TagVocab, Vocab
from .model import Model, ModelConfig, ModelParams

MAGIC = b"GDD1"


class CheckpointError(ValueError):
    """Unreadable or inconsistent checkpoint file."""


def save_checkpoint(path, model: Model) -> None:
    manifest = [{"name": name, "shape": list(t.shape)} for name, t in model.params.items()]
    header = {
        "config": model.config.to_dict(),
        "vocab": model.vocab.to_list(),
        "tag_vocab": model.tag_vocab.to_list(),
        "params": manifest,
    }
    blob = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, tensor in model.params.items():
            fh.write(np.ascontiguousarray(tensor, dtype="<f8").tobytes())


def load_checkpoint(path) -> Model:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"bad magic header: expected {MAGIC!r}, got {magic!r}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        try:
            header = json.loads(fh.read(header_len).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise CheckpointError(f"corrupt header: {e}") from None
        for key in ("config", "vocab", "tag_vocab", "params"):
            if key not in header:
                raise CheckpointError(f"header missing {key!r}")
        config = ModelConfig.from_dict(header["config"])
        params = ModelParams()
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(count * 8)
            if len(raw) != count * 8:
                raise CheckpointError(f"truncated data for parameter {entry['name']}")
            params.add(entry["name"], np.frombuffer(raw, dtype="<f8").reshape(shape).copy())
        trailing = fh.read(1)
        if trailing:
            raise CheckpointError("trailing bytes after parameter data")
    model = Model(config, Vocab.from_list(header["vocab"]),
                  TagVocab.from_list(header["tag_vocab"]), params)
    _check_consistency(model)
    return model


def _check_consistency(model: Model) -> None:
    cfg = model.config
    expected = {
        "embed.token": (len(model.vocab), cfg.d_model),
        "embed.tag": (len(model.tag_vocab), cfg.d_tag),
        "out.W": (cfg.final_width, 3),
    }
    for name, shape in expected.items():
        try:
            actual = model.params.get(name).shape
        except KeyError:
            raise CheckpointError(f"checkpoint missing parameter {name}") from None
        if actual != shape:
            raise CheckpointError(
                f"checkpoint/config mismatch for {name}: {actual} vs expected {shape}")

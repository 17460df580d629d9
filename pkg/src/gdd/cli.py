"""Command-line surface: train, eval, build-graph, inspect, verify-proposition, gradcheck.

Exit codes: 0 success, 1 internal failure (including a failed check), 2
usage or input error. Configuration comes from an optional flat key=value
file plus per-key flags; flags win. GDD_SEED provides a seed fallback when
neither source sets one.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import traceback

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .data import DataError, generate_synthetic, load_dataset
from .dep_graph import ParseError, build_awig, parse_conllu
from .embeddings import load_precomputed
from .local_encoder import check_stationarity
from .metrics import evaluate
from .model import Model, ModelConfig
from .numeric import Rng
from .training import EpochLog, gradcheck_model, train

INPUT_ERRORS = (DataError, ParseError, CheckpointError, FileNotFoundError,
                IsADirectoryError, PermissionError)

CONFIG_FIELDS = [f.name for f in dataclasses.fields(ModelConfig)]


class UsageError(ValueError):
    pass


def read_config_file(path) -> dict:
    """Flat key=value lines; '#' comments and blank lines ignored."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def resolve_config(args) -> ModelConfig:
    """Merge config file, per-key flags, and the GDD_SEED fallback."""
    raw = {}
    if getattr(args, "config", None):
        raw.update(read_config_file(args.config))
    for key in CONFIG_FIELDS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    if "seed" not in raw and os.environ.get("GDD_SEED"):
        raw["seed"] = os.environ["GDD_SEED"]
    try:
        return ModelConfig.from_dict(raw)
    except ValueError as e:
        raise UsageError(str(e)) from None


def add_config_flags(sub) -> None:
    sub.add_argument("--config", help="flat key=value config file")
    for key in CONFIG_FIELDS:
        sub.add_argument(f"--{key}", dest=key, default=None, metavar="V",
                         help=argparse.SUPPRESS)


def cmd_train(args) -> int:
    config = resolve_config(args)
    examples = load_dataset(args.train)
    if not examples:
        raise DataError(f"{args.train}: empty training set")
    dev = load_dataset(args.dev) if args.dev else None
    model = Model.build_for_examples(config, examples)
    if args.embeddings_file:
        model.frozen_embeddings = load_precomputed(args.embeddings_file)

    def emit(log: EpochLog):
        record = {"epoch": log.epoch, "train_loss": log.train_loss}
        if log.dev_accuracy is not None:
            record["dev_acc"] = log.dev_accuracy
            record["dev_macro_f1"] = log.dev_macro_f1
        print(json.dumps(record), flush=True)

    train(model, examples, dev_examples=dev, on_epoch=emit)
    save_checkpoint(args.out, model)
    return 0


def cmd_eval(args) -> int:
    model = load_checkpoint(args.checkpoint)
    examples = load_dataset(args.data)
    if args.embeddings_file:
        model.frozen_embeddings = load_precomputed(args.embeddings_file)
    metrics = evaluate(model, examples)
    print(json.dumps(metrics.to_dict()))
    return 0


def cmd_build_graph(args) -> int:
    with open(args.conllu, "r", encoding="utf-8") as fh:
        trees = parse_conllu(fh.read())
    spans_per_sentence = []
    with open(args.spans, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{args.spans}:{lineno}: invalid JSON: {e}") from None
            if not isinstance(rec, dict) or "spans" not in rec:
                raise DataError(f"{args.spans}:{lineno}: expected {{\"spans\": [[start, end], ...]}}")
            spans_per_sentence.append(rec["spans"])
    if len(spans_per_sentence) != len(trees):
        raise DataError(f"{args.spans}: {len(spans_per_sentence)} span records for "
                        f"{len(trees)} sentences")
    for sent_no, (tree, spans) in enumerate(zip(trees, spans_per_sentence), start=1):
        for start, end in spans:
            try:
                awig = build_awig(tree, (int(start), int(end) - 1), args.kappa_max,
                                  drop_punct=args.drop_punct)
            except ValueError as e:
                raise DataError(f"{args.spans}: sentence {sent_no}: {e}") from None
            print(json.dumps(awig.to_json_dict(tree.tokens)))
    return 0


def cmd_inspect(args) -> int:
    model = load_checkpoint(args.checkpoint)
    examples = load_dataset(args.data)
    if not 0 <= args.index < len(examples):
        raise DataError(f"--index {args.index} out of range for {len(examples)} examples")
    if args.embeddings_file:
        model.frozen_embeddings = load_precomputed(args.embeddings_file)
    _, trace = model.predict(examples[args.index], with_trace=True)
    print(json.dumps(trace))
    return 0


def cmd_verify_proposition(args) -> int:
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    rng = Rng(args.seed)
    trials = []
    attempts = 0
    while len(trials) < args.trials:
        attempts += 1
        if attempts > 10 * args.trials:
            raise RuntimeError("could not generate enough non-degenerate instances")
        Q = rng.normal((args.n, args.d))
        K = rng.normal((args.n, args.d))
        try:
            report = check_stationarity(Q, K, rng=Rng(args.seed + attempts))
        except ValueError:
            continue  # degenerate draw; move to the next one
        trials.append(report)
    all_ok = all(t.is_stationary for t in trials)
    print(json.dumps({
        "trials": len(trials),
        "n": args.n,
        "d": args.d,
        "pass": all_ok,
        "grad_norm_at_mean": {
            "max": max(t.grad_norm_at_mean for t in trials),
            "median": sorted(t.grad_norm_at_mean for t in trials)[len(trials) // 2],
        },
        "median_random_grad_norm": {
            "min": min(t.median_random_grad_norm for t in trials),
        },
    }))
    return 0 if all_ok else 1


def cmd_gradcheck(args) -> int:
    config = ModelConfig(d_model=8, d_tag=4, d_head=4, d_hid=4, U=1, V=1, L=1,
                         seed=args.seed)
    example = generate_synthetic(seed=args.seed, count=4)[1]
    model = Model.build_for_examples(config, [example])
    report = gradcheck_model(model, example, tolerance=args.tolerance)
    print(json.dumps({
        "tolerance": report.tolerance,
        "ok": report.ok,
        "tensors": {name: err for name, err in sorted(report.per_tensor.items())},
    }))
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdd",
        description="Aspect-based sentiment classifier with a Gaussian-mask local "
                    "encoder and a dual-level graph attention global encoder.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--train", required=True, help="training JSONL")
    p.add_argument("--dev", help="optional dev JSONL for per-epoch metrics")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--embeddings-file", help="frozen per-token vectors (JSONL)")
    add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--embeddings-file", help="frozen per-token vectors (JSONL)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("build-graph", help="emit aspect-word graphs from CoNLL-U input")
    p.add_argument("--conllu", required=True)
    p.add_argument("--spans", required=True,
                   help='JSONL, one {"spans": [[start, end], ...]} per sentence '
                        "(end exclusive)")
    p.add_argument("--kappa-max", type=int, default=3)
    p.add_argument("--drop-punct", action="store_true")
    p.set_defaults(func=cmd_build_graph)

    p = sub.add_parser("inspect", help="dump sigma, mask, and attention traces for one example")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--embeddings-file", help="frozen per-token vectors (JSONL)")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("verify-proposition",
                       help="numerically check that the score-contrast objective is "
                            "stationary at the sample means")
    p.add_argument("--seed", type=int, default=_env_seed(0))
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_verify_proposition)

    p = sub.add_parser("gradcheck", help="finite-difference check of every parameter tensor")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=_env_seed(0))
    p.set_defaults(func=cmd_gradcheck)

    return parser


def _env_seed(default: int) -> int:
    try:
        return int(os.environ.get("GDD_SEED", default))
    except ValueError:
        return default


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, *INPUT_ERRORS) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception:
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())

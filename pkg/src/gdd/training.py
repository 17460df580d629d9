"""Adam optimization, the training loop, and the whole-model gradient check."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .metrics import evaluate
from .model import Model, ModelParams
from .numeric import Rng, Tensor, finite_diff_grad


@dataclass
class AdamState:
    m: dict[str, Tensor] = field(default_factory=dict)
    v: dict[str, Tensor] = field(default_factory=dict)
    t: int = 0

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        state = cls()
        for name, tensor in params.items():
            state.m[name] = np.zeros_like(tensor)
            state.v[name] = np.zeros_like(tensor)
        return state


def adam_step(params: ModelParams, grads: dict[str, Tensor], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, in place."""
    state.t += 1
    t = state.t
    for name, g in grads.items():
        theta = params.get(name)
        if g.shape != theta.shape:
            raise ValueError(f"adam_step: gradient shape {g.shape} != parameter "
                             f"shape {theta.shape} for {name}")
        m = state.m[name] = beta1 * state.m[name] + (1 - beta1) * g
        v = state.v[name] = beta2 * state.v[name] + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        params.set(name, theta - lr * m_hat / (np.sqrt(v_hat) + eps))


def batch_grads(model: Model, preps, train: bool = True,
                dropout_rng: Rng | None = None):
    """Loss value and gradient dict for one batch (cross-entropy + l2 once)."""
    leaves = model.params.leaves()
    loss = model.batch_loss_var(preps, leaves, train=train, dropout_rng=dropout_rng)
    ad.backward(loss)
    grads = {name: (leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value))
             for name, leaf in leaves.items()}
    return float(loss.value), grads


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    train_accuracy: float | None = None
    dev_accuracy: float | None = None
    dev_macro_f1: float | None = None


def train(model: Model, train_examples, dev_examples=None, *,
          epochs: int | None = None, shuffle: bool = True,
          track_train_accuracy: bool = False, stop_at_train_accuracy: float | None = None,
          plateau_patience: int | None = None, plateau_tol: float = 1e-5,
          on_epoch=None) -> list[EpochLog]:
    """Per-example (or accumulated-batch) Adam training, fully seeded.

    Stops early when training accuracy reaches stop_at_train_accuracy or when
    the mean train loss fails to improve by plateau_tol for plateau_patience
    consecutive epochs. on_epoch(EpochLog) fires after each epoch.
    """
    cfg = model.config
    epochs = cfg.epochs if epochs is None else epochs
    preps = [model.prepare(ex) for ex in train_examples]
    if not preps:
        raise ValueError("train: empty training set")
    state = AdamState.for_params(model.params)
    order_rng = Rng(cfg.seed + 1)
    dropout_rng = Rng(cfg.seed + 2) if cfg.dropout > 0 else None
    history: list[EpochLog] = []
    best_loss = np.inf
    stale = 0

    for epoch in range(1, epochs + 1):
        order = order_rng.permutation(len(preps)) if shuffle else np.arange(len(preps))
        total = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = [preps[i] for i in order[start:start + cfg.batch_size]]
            loss, grads = batch_grads(model, batch, train=True, dropout_rng=dropout_rng)
            adam_step(model.params, grads, state, cfg.lr)
            total += loss
        log = EpochLog(epoch=epoch, train_loss=total / len(preps))
        need_train_acc = track_train_accuracy or stop_at_train_accuracy is not None
        if need_train_acc:
            log.train_accuracy = evaluate(model, train_examples).accuracy
        if dev_examples:
            dev = evaluate(model, dev_examples)
            log.dev_accuracy = dev.accuracy
            log.dev_macro_f1 = dev.macro_f1
        history.append(log)
        if on_epoch is not None:
            on_epoch(log)
        if (stop_at_train_accuracy is not None
                and log.train_accuracy is not None
                and log.train_accuracy >= stop_at_train_accuracy):
            break
        if plateau_patience is not None:
            if log.train_loss < best_loss - plateau_tol:
                best_loss = log.train_loss
                stale = 0
            else:
                stale += 1
                if stale >= plateau_patience:
                    break
    return history


@dataclass
class GradCheckReport:
    per_tensor: dict[str, float]  # max relative error
    tolerance: float

    @property
    def ok(self) -> bool:
        return all(np.isfinite(v) and v < self.tolerance
                   for v in self.per_tensor.values())

    def worst(self) -> tuple[str, float]:
        name = max(self.per_tensor, key=self.per_tensor.get)
        return name, self.per_tensor[name]


def gradcheck_model(model: Model, example, eps: float = 1e-6,
                    tolerance: float = 1e-4) -> GradCheckReport:
    """Analytic gradients of the full loss vs central differences, per tensor.

    The relative error divides the max absolute difference by
    max(|analytic|_inf, |numeric|_inf, 1e-6); the floor keeps tensors whose
    true gradient vanishes (a softmax-shift-invariant bias, say) from turning
    floating-point dust into a spurious blowup. Dropout must be off.
    """
    if model.config.dropout != 0.0:
        raise ValueError("gradcheck requires dropout == 0")
    prep = model.prepare(example)
    leaves = model.params.leaves()
    loss = model.batch_loss_var([prep], leaves)
    ad.backward(loss)

    report: dict[str, float] = {}
    for name in model.params.names():
        leaf = leaves[name]
        analytic = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)
        if not np.all(np.isfinite(analytic)):
            report[name] = np.inf
            continue
        original = model.params.get(name).copy()

        def f(candidate):
            trial = {n: (ad.Var(candidate) if n == name else ad.Var(model.params.get(n)))
                     for n in model.params.names()}
            return float(model.batch_loss_var([prep], trial).value)

        numeric = finite_diff_grad(f, original, eps)
        scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), 1e-6)
        report[name] = float(np.max(np.abs(analytic - numeric))) / scale
    return GradCheckReport(per_tensor=report, tolerance=tolerance)

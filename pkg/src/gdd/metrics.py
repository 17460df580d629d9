"""Accuracy and macro-averaged F1 over the three polarity classes."""

from __future__ import annotations

from dataclasses import dataclass

from .data import LABELS


@dataclass
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class Metrics:
    accuracy: float
    macro_f1: float
    per_class: dict[str, ClassScores]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "per_class": {
                name: {"precision": s.precision, "recall": s.recall,
                       "f1": s.f1, "support": s.support}
                for name, s in self.per_class.items()
            },
        }


def metrics_from_predictions(golds, preds) -> Metrics:
    """Direct per-class counting; a class absent from gold and preds scores F1=0.

    macro_f1 is the unweighted mean over all three classes regardless of
    presence.
    """
    golds, preds = list(golds), list(preds)
    if not golds:
        raise ValueError("metrics: empty dataset")
    if len(golds) != len(preds):
        raise ValueError(f"metrics: {len(golds)} golds vs {len(preds)} predictions")
    correct = sum(1 for g, p in zip(golds, preds) if g == p)
    per_class = {}
    f1_sum = 0.0
    for c, name in enumerate(LABELS):
        tp = sum(1 for g, p in zip(golds, preds) if g == c and p == c)
        fp = sum(1 for g, p in zip(golds, preds) if g != c and p == c)
        fn = sum(1 for g, p in zip(golds, preds) if g == c and p != c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        per_class[name] = ClassScores(precision, recall, f1, support=tp + fn)
        f1_sum += f1
    return Metrics(accuracy=correct / len(golds), macro_f1=f1_sum / len(LABELS),
                   per_class=per_class)


def evaluate(model, examples) -> Metrics:
    """Run the model over a dataset and score argmax predictions."""
    examples = list(examples)
    if not examples:
        raise ValueError("evaluate: empty dataset")
    golds = [ex.label_id for ex in examples]
    preds = [model.predict(ex).label_id for ex in examples]
    return metrics_from_predictions(golds, preds)

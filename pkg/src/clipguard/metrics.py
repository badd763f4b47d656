"""Confusion matrices and accuracy / precision / recall / F1 reports.

Multiclass scores are one-vs-rest per class, then macro-averaged: a plain
mean over the classes that occur among the truths or the predictions. A
metric whose denominator is zero is 0.
"""

import json
from dataclasses import dataclass

import numpy as np

from .dataset import Label
from .errors import DomainError, ManifestError

NUM_CLASSES = len(Label)


@dataclass(frozen=True)
class ConfusionMatrix:
    """``counts[true, predicted]`` over single-label predictions."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.ndim != 2 or counts.shape[0] != counts.shape[1]:
            raise DomainError(f"confusion matrix must be square, got {counts.shape}")
        if (counts < 0).any():
            raise DomainError("confusion counts must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def tp(self):
        return np.diag(self.counts).copy()

    @property
    def fp(self):
        return self.counts.sum(axis=0) - self.tp

    @property
    def fn(self):
        return self.counts.sum(axis=1) - self.tp

    @property
    def tn(self):
        return self.total - self.tp - self.fp - self.fn

    def one_vs_rest(self, k):
        """(TP, FP, FN, TN) for class ``k``."""
        return int(self.tp[k]), int(self.fp[k]), int(self.fn[k]), int(self.tn[k])


def confusion(truths, preds, num_classes=NUM_CLASSES):
    truths = np.asarray(truths, dtype=np.intp)
    preds = np.asarray(preds, dtype=np.intp)
    if truths.shape != preds.shape:
        raise DomainError(f"{truths.size} truths vs {preds.size} predictions")
    if truths.size == 0:
        raise DomainError("need at least one prediction")
    for arr in (truths, preds):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise DomainError(f"labels must lie in 0..{num_classes - 1}")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (truths, preds), 1)
    return ConfusionMatrix(counts)


def accuracy(cm):
    if cm.total == 0:
        raise DomainError("accuracy of an empty confusion matrix")
    return float(np.trace(cm.counts)) / cm.total


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den != 0)


@dataclass(frozen=True)
class ClassScores:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    present: np.ndarray

    @property
    def macro(self):
        m = self.present
        return (float(self.precision[m].mean()), float(self.recall[m].mean()),
                float(self.f1[m].mean()))


def precision_recall_f1(cm):
    """Per-class precision, recall and F1 arrays (macro via ``.macro``)."""
    tp, fp, fn = cm.tp, cm.fp, cm.fn
    p = _safe_div(tp, tp + fp)
    r = _safe_div(tp, tp + fn)
    f1 = _safe_div(2 * p * r, p + r)
    present = (cm.counts.sum(axis=0) + cm.counts.sum(axis=1)) > 0
    return ClassScores(p, r, f1, present)


@dataclass(frozen=True)
class MetricsReport:
    model_name: str
    accuracy: float
    precision: float
    recall: float
    f1: float
    per_class: dict
    samples: int
    degenerate_classes: tuple = ()

    def to_json(self):
        return {
            "model": self.model_name,
            "acc": self.accuracy,
            "f1": self.f1,
            "recall": self.recall,
            "precision": self.precision,
            "per_class": self.per_class,
            "samples": self.samples,
            "degenerate_classes": list(self.degenerate_classes),
        }

    def render(self):
        """Fixed-width table with ACC, F1, Recall and Precision columns."""
        name_w = max(len("Model"), len(self.model_name))
        head = f"| {'Model':<{name_w}} | ACC    | F1     | Recall | Precision |"
        rule = "|" + "-" * (name_w + 2) + "|--------|--------|--------|-----------|"
        row = (f"| {self.model_name:<{name_w}} | {self.accuracy:.4f} | {self.f1:.4f} | "
               f"{self.recall:.4f} | {self.precision:<9.4f} |")
        lines = [head, rule, row]
        if self.degenerate_classes:
            lines.append("note: zero-denominator metrics set to 0 for: "
                         + ", ".join(self.degenerate_classes))
        return "\n".join(lines)


def report(cm, model_name="model"):
    scores = precision_recall_f1(cm)
    macro_p, macro_r, macro_f1 = scores.macro
    per_class = {}
    degenerate = []
    for k in range(cm.counts.shape[0]):
        tp, fp, fn, tn = cm.one_vs_rest(k)
        name = Label(k).key if k < NUM_CLASSES else str(k)
        per_class[name] = {
            "precision": float(scores.precision[k]),
            "recall": float(scores.recall[k]),
            "f1": float(scores.f1[k]),
            "tp": tp, "fp": fp, "fn": fn, "tn": tn,
        }
        if tp + fp == 0 or tp + fn == 0:
            degenerate.append(name)
    return MetricsReport(model_name, accuracy(cm), macro_p, macro_r, macro_f1,
                         per_class, cm.total, tuple(degenerate))


def read_predictions(source):
    """Parse prediction JSON Lines: path, true_label, predicted_label, probabilities."""
    if hasattr(source, "__fspath__") or (isinstance(source, str) and "\n" not in source):
        with open(source, encoding="utf-8") as fh:
            return read_predictions(fh)
    if isinstance(source, str):
        source = source.splitlines()
    rows = []
    for lineno, line in enumerate(source, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
            row = {
                "path": str(obj["path"]),
                "true_label": Label.parse(obj["true_label"]),
                "predicted_label": Label.parse(obj["predicted_label"]),
                "probabilities": [float(v) for v in obj["probabilities"]],
            }
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"bad prediction record: {exc}", lineno) from None
        if len(row["probabilities"]) != NUM_CLASSES:
            raise ManifestError("probabilities must have 4 entries", lineno)
        rows.append(row)
    return rows


def write_predictions(rows, destination):
    with open(destination, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps({
                "path": row["path"],
                "true_label": Label(row["true_label"]).key,
                "predicted_label": Label(row["predicted_label"]).key,
                "probabilities": [float(v) for v in row["probabilities"]],
            }) + "\n")


def score_predictions(rows, model_name="external"):
    """Report for a list of prediction records (e.g. from an external backend)."""
    cm = confusion([r["true_label"] for r in rows], [r["predicted_label"] for r in rows])
    return report(cm, model_name)

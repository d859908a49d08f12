"""Evaluation metrics and report rendering for 3-class sentiment models.

Undefined ratios (a class never predicted, or never present) are reported as
0 rather than raising.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .corpus import LABELS

NA = "n/a"


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Rows are true classes, columns predicted classes."""

    counts: np.ndarray
    labels: tuple = LABELS

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return self.labels == other.labels and np.array_equal(self.counts, other.counts)

    __hash__ = None

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["true\\pred", *self.labels])
        for label, row in zip(self.labels, self.counts):
            w.writerow([label, *(int(c) for c in row)])
        return buf.getvalue()


def confusion(y_true, y_pred, n_classes: int = 3, labels=LABELS) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    if y_true.size == 0:
        raise ValueError("cannot evaluate an empty prediction set")
    if y_true.min() < 0 or y_pred.min() < 0 or max(y_true.max(), y_pred.max()) >= n_classes:
        raise ValueError(f"labels must be integers in [0, {n_classes})")
    counts = np.bincount(y_true * n_classes + y_pred, minlength=n_classes * n_classes)
    return ConfusionMatrix(counts.reshape(n_classes, n_classes), tuple(labels))


def _ratio(num, den):
    return num / den if den else 0.0


def cohen_kappa(counts) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    p_o = np.trace(counts) / total
    p_e = float(np.dot(counts.sum(axis=1), counts.sum(axis=0))) / (total * total)
    if p_e == 1.0:
        return 0.0
    return (p_o - p_e) / (1.0 - p_e)


def binary_auc(scores, positive) -> float | None:
    """Mann-Whitney AUC with midranks; ``None`` if a side is empty."""
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(positive, dtype=bool)
    m = int(positive.sum())
    n_neg = positive.size - m
    if m == 0 or n_neg == 0:
        return None
    ranks = rankdata(scores, method="average")
    return float((ranks[positive].sum() - m * (m + 1) / 2.0) / (m * n_neg))


def auc_ovr(scores, y_true):
    """Unweighted mean one-vs-rest AUC over classes where it is defined.

    Returns :data:`NA` when no class has both positives and negatives.
    """
    scores = np.asarray(scores, dtype=np.float64)
    y_true = np.asarray(y_true)
    if scores.ndim != 2 or scores.shape[0] != y_true.shape[0]:
        raise ValueError("scores must be (n_samples, n_classes)")
    if scores.shape[0] < 2:
        return NA
    per_class = [binary_auc(scores[:, k], y_true == k) for k in range(scores.shape[1])]
    defined = [a for a in per_class if a is not None]
    return float(np.mean(defined)) if defined else NA


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvalReport:
    per_class: dict
    accuracy: float
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    kappa: float
    auc_macro: float | str
    confusion: ConfusionMatrix
    wall_time_s: float | None = field(default=None, compare=False)

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "auc": self.auc_macro,
            "recall": self.weighted_recall,
            "precision": self.weighted_precision,
            "f1": self.weighted_f1,
            "macro_f1": self.macro_f1,
            "kappa": self.kappa,
        }

    def render(self, digits: int = 2) -> str:
        """Plain-text classification report in precision/recall/f1/support layout."""
        width = max(len(name) for name in [*self.per_class, "weighted avg"])
        head = f"{'':>{width}}  {'precision':>9}  {'recall':>9}  {'f1-score':>9}  {'support':>9}"
        lines = [head, ""]
        for name, m in self.per_class.items():
            lines.append(f"{name:>{width}}  {m.precision:>9.{digits}f}  {m.recall:>9.{digits}f}  "
                         f"{m.f1:>9.{digits}f}  {m.support:>9d}")
        total = self.confusion.total
        lines.append("")
        lines.append(f"{'accuracy':>{width}}  {'':>9}  {'':>9}  {self.accuracy:>9.{digits}f}  {total:>9d}")
        lines.append(f"{'macro avg':>{width}}  {self.macro_precision:>9.{digits}f}  {self.macro_recall:>9.{digits}f}  "
                     f"{self.macro_f1:>9.{digits}f}  {total:>9d}")
        lines.append(f"{'weighted avg':>{width}}  {self.weighted_precision:>9.{digits}f}  "
                     f"{self.weighted_recall:>9.{digits}f}  {self.weighted_f1:>9.{digits}f}  {total:>9d}")
        lines.append("")
        auc = self.auc_macro if isinstance(self.auc_macro, str) else f"{self.auc_macro:.4f}"
        lines.append(f"kappa {self.kappa:.4f}  auc(macro, ovr) {auc}")
        lines.append("undefined precision/recall/f1 are reported as 0")
        return "\n".join(lines) + "\n"

    def to_csv(self, digits: int = 4) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["class", "precision", "recall", "f1", "support"])
        for name, m in self.per_class.items():
            w.writerow([name, f"{m.precision:.{digits}f}", f"{m.recall:.{digits}f}", f"{m.f1:.{digits}f}", m.support])
        return buf.getvalue()


def report(cm: ConfusionMatrix, probs=None, y_true=None, wall_time_s=None) -> EvalReport:
    """Compute every metric from a confusion matrix.

    ``probs`` (n x classes scores) and ``y_true`` are only needed for AUC;
    without them ``auc_macro`` is :data:`NA`.
    """
    counts = np.asarray(cm.counts, dtype=np.int64)
    if counts.ndim != 2 or counts.shape[0] != counts.shape[1] or (counts < 0).any():
        raise ValueError("confusion matrix must be square with non-negative counts")
    total = counts.sum()
    if total == 0:
        raise ValueError("confusion matrix is empty")
    rows, cols, diag = counts.sum(axis=1), counts.sum(axis=0), np.diag(counts)
    per_class = {}
    precisions, recalls, f1s = [], [], []
    for k, name in enumerate(cm.labels):
        p = _ratio(diag[k], cols[k])
        r = _ratio(diag[k], rows[k])
        f = _ratio(2 * p * r, p + r)
        per_class[name] = ClassMetrics(float(p), float(r), float(f), int(rows[k]))
        precisions.append(p)
        recalls.append(r)
        f1s.append(f)
    weights = rows / total
    auc = NA
    if probs is not None:
        if y_true is None:
            raise ValueError("y_true is required with probs")
        auc = auc_ovr(probs, y_true)
    return EvalReport(
        per_class=per_class,
        accuracy=float(diag.sum() / total),
        macro_precision=float(np.mean(precisions)),
        macro_recall=float(np.mean(recalls)),
        macro_f1=float(np.mean(f1s)),
        weighted_precision=float(np.dot(weights, precisions)),
        weighted_recall=float(np.dot(weights, recalls)),
        weighted_f1=float(np.dot(weights, f1s)),
        kappa=float(cohen_kappa(counts)),
        auc_macro=auc,
        confusion=cm,
        wall_time_s=wall_time_s,
    )


def evaluate(y_true, y_pred, probs=None, wall_time_s=None, labels=LABELS) -> EvalReport:
    cm = confusion(y_true, y_pred, len(labels), labels)
    return report(cm, probs, y_true, wall_time_s)


def plot_confusion(cm: ConfusionMatrix, path, title="Confusion matrix"):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(4.5, 4))
    ax.imshow(cm.counts, cmap="Blues")
    ax.set_xticks(range(len(cm.labels)), cm.labels)
    ax.set_yticks(range(len(cm.labels)), cm.labels)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    peak = cm.counts.max()
    for i in range(cm.counts.shape[0]):
        for j in range(cm.counts.shape[1]):
            ax.text(j, i, int(cm.counts[i, j]), ha="center", va="center",
                    color="white" if cm.counts[i, j] > peak / 2 else "black")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)

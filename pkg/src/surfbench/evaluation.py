"""Confusion matrices and per-class precision / recall / F1."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .model import predict


@dataclass
class EvalReport:
    confusion: np.ndarray     # rows = true class, columns = predicted class
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    mean_accuracy: float
    class_names: tuple = ()

    @property
    def support(self):
        return self.confusion.sum(axis=1)

    def table(self):
        """Per-class metrics as fixed-width text."""
        names = self.class_names or tuple(str(k) for k in range(len(self.f1)))
        width = max(10, max(len(n) for n in names))
        lines = [f"{'Class':<{width}}  Precision  Recall     F1 score   Support"]
        for k, name in enumerate(names):
            lines.append(f"{name:<{width}}  {self.precision[k]:.5f}    {self.recall[k]:.5f}    "
                         f"{self.f1[k]:.5f}    {self.support[k]}")
        lines.append(f"{'Accuracy':<{width}}  {self.mean_accuracy:.5f}")
        return "\n".join(lines)

    def matrix(self):
        names = self.class_names or tuple(str(k) for k in range(len(self.f1)))
        width = max(8, max(len(n) for n in names)) + 2
        lines = [" " * width + "".join(f"{n:>{width}}" for n in names)]
        for name, row in zip(names, self.confusion):
            lines.append(f"{name:<{width}}" + "".join(f"{int(c):>{width}d}" for c in row))
        return "\n".join(lines)

    def write_confusion_csv(self, path):
        names = self.class_names or tuple(str(k) for k in range(len(self.f1)))
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["true\\predicted", *names])
            for name, row in zip(names, self.confusion):
                w.writerow([name, *(int(c) for c in row)])
        return path

    def write_metrics_csv(self, path):
        names = self.class_names or tuple(str(k) for k in range(len(self.f1)))
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["class", "precision", "recall", "f1", "support"])
            for k, name in enumerate(names):
                w.writerow([name, repr(float(self.precision[k])), repr(float(self.recall[k])),
                            repr(float(self.f1[k])), int(self.support[k])])
            w.writerow(["mean_accuracy", "", "", "", repr(float(self.mean_accuracy))])
        return path


def confusion_matrix(y_true, y_pred, n_classes):
    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred must have the same length")
    for y in (y_true, y_pred):
        if len(y) and (y.min() < 0 or y.max() >= n_classes):
            raise ValueError(f"labels must lie in [0, {n_classes})")
    C = np.zeros((n_classes, n_classes), dtype=int)
    np.add.at(C, (y_true, y_pred), 1)
    return C


def _safe_div(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def report_from_confusion(C, class_names=()):
    C = np.asarray(C, dtype=int)
    tp = np.diag(C).astype(float)
    precision = _safe_div(tp, C.sum(axis=0))
    recall = _safe_div(tp, C.sum(axis=1))
    f1 = _safe_div(2 * precision * recall, precision + recall)
    total = C.sum()
    accuracy = float(tp.sum() / total) if total else 0.0
    return EvalReport(C, precision, recall, f1, accuracy, tuple(class_names))


def report_from_labels(y_true, y_pred, n_classes=None, class_names=()):
    if n_classes is None:
        n_classes = len(class_names) or int(max(np.max(y_true), np.max(y_pred))) + 1
    return report_from_confusion(confusion_matrix(y_true, y_pred, n_classes), class_names)


def evaluate(model, windows):
    """Argmax predictions on labeled windows, summarised as an :class:`EvalReport`."""
    y = np.asarray(windows.y, dtype=int)
    if len(y) == 0:
        raise ValueError("empty test set")
    K = len(model.class_names)
    if y.min() < 0 or y.max() >= K:
        raise ValueError(f"test labels must lie in [0, {K})")
    return report_from_labels(y, predict(model, windows.X), K, model.class_names)

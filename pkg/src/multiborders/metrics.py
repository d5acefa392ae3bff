"""Scores for multi-class predictions: accuracy, uncertainty coefficient, correlation."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


class LengthMismatch(ValueError):
    pass


class LabelOutOfRange(ValueError):
    pass


@dataclass
class MetricsReport:
    accuracy: float
    uncertainty_coefficient: float
    pearson_correlation: float
    confusion: np.ndarray
    uc_degenerate: bool = False
    correlation_degenerate: bool = False

    def as_dict(self) -> dict:
        return {
            "n": int(self.confusion.sum()),
            "accuracy": self.accuracy,
            "uncertainty_coefficient": self.uncertainty_coefficient,
            "pearson_correlation": self.pearson_correlation,
            "uc_degenerate": self.uc_degenerate,
            "correlation_degenerate": self.correlation_degenerate,
        }

    def format(self) -> str:
        d = self.as_dict()
        lines = [f"{'n':<26}{d['n']}"]
        for key in ("accuracy", "uncertainty_coefficient", "pearson_correlation"):
            lines.append(f"{key:<26}{d[key]:.6f}")
        for key in ("uc_degenerate", "correlation_degenerate"):
            if d[key]:
                lines.append(f"{key:<26}yes")
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True)


def confusion_matrix(truth, predicted, n_classes) -> np.ndarray:
    """Counts with rows = true class, columns = predicted class."""
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truth, predicted), 1)
    return cm


def _entropy(counts) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def uncertainty_coefficient(cm) -> tuple[float, bool]:
    """U(C|K) = I(C;K) / H(C) with C the true class (rows)."""
    h_true = _entropy(cm.sum(axis=1))
    if h_true == 0.0:
        constant_equal = np.count_nonzero(cm) == 1 and np.trace(cm) == cm.sum()
        return (1.0 if constant_equal else 0.0), True
    mutual = h_true + _entropy(cm.sum(axis=0)) - _entropy(cm.ravel())
    return float(min(1.0, max(0.0, mutual / h_true))), False


def compute_metrics(truth, predicted, n_classes: int) -> MetricsReport:
    truth = np.asarray(truth, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if truth.shape != predicted.shape or truth.ndim != 1:
        raise LengthMismatch(f"{truth.shape} true labels vs {predicted.shape} predictions")
    if truth.size == 0:
        raise LengthMismatch("need at least one label")
    for name, labels in (("true", truth), ("predicted", predicted)):
        if labels.min() < 0 or labels.max() >= n_classes:
            raise LabelOutOfRange(f"{name} labels must lie in [0, {n_classes})")

    cm = confusion_matrix(truth, predicted, n_classes)
    accuracy = float(np.trace(cm) / cm.sum())
    uc, uc_degenerate = uncertainty_coefficient(cm)
    if np.all(truth == truth[0]) or np.all(predicted == predicted[0]):
        corr, corr_degenerate = 0.0, True
    else:
        corr, corr_degenerate = float(np.corrcoef(truth, predicted)[0, 1]), False
    return MetricsReport(accuracy, uc, corr, cm, uc_degenerate, corr_degenerate)

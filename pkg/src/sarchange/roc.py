"""Receiver operating characteristic of a per-pixel change score."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EvaluationError, InputError

__all__ = ["RocCurve", "roc_curve", "MAX_THRESHOLDS"]

MAX_THRESHOLDS = 10_000


@dataclass(frozen=True, eq=False)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    def rate_at_fpr(self, fpr: float) -> float:
        """Largest true-positive rate reached with false-positive rate <= ``fpr``."""
        ok = self.fpr <= fpr
        return float(self.tpr[ok].max()) if ok.any() else 0.0


def roc_curve(scores, truth, max_thresholds: int = MAX_THRESHOLDS) -> RocCurve:
    """ROC curve of ``score >= threshold`` against a boolean truth mask.

    Thresholds are the unique score values, or ``max_thresholds``
    quantile-spaced values when there are more unique scores than that.
    The curve starts at (0, 0) and ends at (1, 1); the AUC uses the
    trapezoid rule.
    """
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(truth).reshape(-1).astype(bool)
    if s.shape != y.shape:
        raise InputError(f"scores ({np.shape(scores)}) and truth ({np.shape(truth)}) differ in shape")
    if np.isnan(s).any():
        raise InputError("scores contain NaN")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise EvaluationError("truth must contain both changed and unchanged pixels")
    pos = np.sort(s[y])
    neg = np.sort(s[~y])
    unique = np.unique(s)
    if unique.size > max_thresholds:
        unique = np.unique(np.quantile(unique, np.linspace(0.0, 1.0, max_thresholds)))
        unique[0] = s.min()
    thresholds = unique[::-1]
    tp = n_pos - np.searchsorted(pos, thresholds, side="left")
    fp = n_neg - np.searchsorted(neg, thresholds, side="left")
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    thresholds = np.concatenate([[np.inf], thresholds])
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) * 0.5))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, auc=auc)

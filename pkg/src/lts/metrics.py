"""Micro/Macro F1 for single-label multiclass predictions."""
from __future__ import annotations

import numpy as np


def _check(pred, gold):
    pred = np.asarray(pred, dtype=np.int64)
    gold = np.asarray(gold, dtype=np.int64)
    if pred.shape != gold.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {gold.shape}")
    if pred.size == 0:
        raise ValueError("empty input")
    return pred, gold


def confusion(pred, gold, num_classes: int | None = None) -> np.ndarray:
    """``C[i, j]`` = number of samples with gold class i predicted as j."""
    pred, gold = _check(pred, gold)
    n = int(max(pred.max(), gold.max())) + 1
    if num_classes is not None:
        n = max(n, num_classes)
    cm = np.zeros((n, n), dtype=np.int64)
    np.add.at(cm, (gold, pred), 1)
    return cm


def micro_f1(pred, gold) -> float:
    # pooled TP/FP/FN over classes; for one label per sample this is accuracy
    pred, gold = _check(pred, gold)
    tp = np.sum(pred == gold)
    fp = fn = len(pred) - tp
    return float(2 * tp / (2 * tp + fp + fn))


def per_class_f1(pred, gold, num_classes: int | None = None) -> np.ndarray:
    cm = confusion(pred, gold, num_classes)
    tp = np.diag(cm).astype(float)
    denom = cm.sum(axis=0) + cm.sum(axis=1)   # (tp+fp) + (tp+fn)
    with np.errstate(invalid="ignore", divide="ignore"):
        f1 = np.where(denom > 0, 2 * tp / denom, 0.0)
    return f1


def macro_f1(pred, gold, num_classes: int | None = None) -> float:
    """Unweighted mean of per-class F1.

    Classes run over ``range(num_classes)`` when given (a class absent from
    both inputs then scores 0), otherwise over the labels that occur.
    """
    f1 = per_class_f1(pred, gold, num_classes)
    if num_classes is None:
        pred, gold = _check(pred, gold)
        f1 = f1[np.union1d(pred, gold)]
    return float(f1.mean())

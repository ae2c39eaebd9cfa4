"""Classification metrics reported by the harness, all in percent."""

import numpy as np


def _as_label_vectors(preds, truth):
    preds = np.asarray(preds, dtype=np.int64).reshape(-1)
    truth = np.asarray(truth, dtype=np.int64).reshape(-1)
    if preds.shape != truth.shape:
        raise ValueError(f"{preds.size} predictions for {truth.size} labels")
    if preds.size == 0:
        raise ValueError("Cannot score an empty prediction vector")
    return preds, truth


def accuracy(preds, truth):
    """100 * correct / total."""
    preds, truth = _as_label_vectors(preds, truth)
    return 100.0 * float(np.mean(preds == truth))


def confusion_matrix(preds, truth, n_classes):
    """Counts with rows = true class, columns = predicted class."""
    preds, truth = _as_label_vectors(preds, truth)
    if np.any((preds < 0) | (preds >= n_classes) | (truth < 0) | (truth >= n_classes)):
        raise ValueError(f"Labels must lie in [0, {n_classes})")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (truth, preds), 1)
    return cm


def macro_f1(preds, truth, n_classes):
    """Unweighted mean of per-class F1 = 2PR / (P + R); a class with P + R = 0 scores 0."""
    cm = confusion_matrix(preds, truth, n_classes)
    tp = np.diag(cm).astype(np.float64)
    predicted = cm.sum(axis=0)
    actual = cm.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, actual, out=np.zeros_like(tp), where=actual > 0)
    denom = precision + recall
    f1 = np.divide(2.0 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)
    return 100.0 * float(np.mean(f1))

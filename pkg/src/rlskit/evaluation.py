"""One-vs-all label coding, argmax decoding and accuracy reports."""
from dataclasses import dataclass

import numpy as np

from .errors import LabelError, ShapeError
from .numeric import as_mat


@dataclass(frozen=True)
class PerfReport:
    accuracy: float
    per_class_accuracy: np.ndarray  # NaN for classes absent from ``truth``
    confusion: np.ndarray  # rows: true class, cols: predicted class
    macro_accuracy: float

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "macro_accuracy": self.macro_accuracy,
            "per_class_accuracy": [None if np.isnan(v) else float(v)
                                   for v in self.per_class_accuracy],
            "confusion": self.confusion.tolist(),
        }


def _as_labels(labels, name="labels"):
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ShapeError(f"{name} must be 1-D, got shape {labels.shape}")
    if labels.size and not np.issubdtype(labels.dtype, np.integer):
        if not np.all(np.mod(labels, 1) == 0):
            raise LabelError(f"{name} must be integers")
    return labels.astype(np.int64)


def encode_one_vs_all(labels, T):
    """n×T matrix with +1 at (i, labelᵢ) and −1 elsewhere."""
    labels = _as_labels(labels)
    if labels.size and (labels.min() < 0 or labels.max() >= T):
        raise LabelError(f"labels must lie in [0, {T}), got range "
                         f"[{labels.min()}, {labels.max()}]")
    y = -np.ones((labels.size, T))
    y[np.arange(labels.size), labels] = 1.0
    return y


def decode_argmax(scores):
    """Row-wise argmax; ties go to the smallest class index."""
    scores = as_mat(scores, "scores")
    if scores.shape[1] < 1:
        raise ShapeError("scores need at least one column")
    return np.argmax(scores, axis=1)


def performance(pred, truth, T):
    pred = _as_labels(pred, "pred")
    truth = _as_labels(truth, "truth")
    if pred.shape != truth.shape:
        raise ShapeError(f"pred has {pred.size} entries, truth has {truth.size}")
    for name, v in (("pred", pred), ("truth", truth)):
        if v.size and (v.min() < 0 or v.max() >= T):
            raise LabelError(f"{name} labels outside [0, {T})")
    confusion = np.zeros((T, T), dtype=np.int64)
    np.add.at(confusion, (truth, pred), 1)
    support = confusion.sum(axis=1)
    n = truth.size
    accuracy = float(np.trace(confusion) / n) if n else float("nan")
    with np.errstate(invalid="ignore", divide="ignore"):
        per_class = np.where(support > 0,
                             np.diag(confusion) / np.maximum(support, 1), np.nan)
    present = support > 0
    macro = float(per_class[present].mean()) if present.any() else float("nan")
    return PerfReport(accuracy=accuracy, per_class_accuracy=per_class,
                      confusion=confusion, macro_accuracy=macro)


def rmse(pred, truth):
    pred = as_mat(pred, "pred")
    truth = as_mat(truth, "truth")
    if pred.shape != truth.shape:
        raise ShapeError(f"shape mismatch {pred.shape} vs {truth.shape}")
    return float(np.sqrt(np.mean((pred - truth) ** 2)))

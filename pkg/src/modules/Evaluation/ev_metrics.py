# -*- coding: utf-8 -*-

"""Classification metrics (Acc / AUC / F1) and pixel-space ADE."""

from typing import Dict, Sequence

import numpy as np

from src.modules.Dataset.Dataset import BBOX_SLICE, CENTER_SLICE
from src.utils.utils_errors import ArgumentError, UndefinedMetricError

ADE_CHANNELS = ("bbox", "center")


def _binary_pair(preds: Sequence, labels: Sequence, what: str):
    preds = np.asarray(preds).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if preds.size == 0 or labels.size == 0:
        raise ArgumentError(f"{what}: empty input")
    if preds.size != labels.size:
        raise ArgumentError(f"{what}: {preds.size} predictions for {labels.size} labels")
    return preds, labels


def confusion_counts(preds: Sequence[int], labels: Sequence[int]) -> Dict[str, int]:
    preds, labels = _binary_pair(preds, labels, "confusion_counts")
    p = preds.astype(int) == 1
    y = labels.astype(int) == 1
    return {
        "tp": int(np.sum(p & y)),
        "tn": int(np.sum(~p & ~y)),
        "fp": int(np.sum(p & ~y)),
        "fn": int(np.sum(~p & y)),
    }


def accuracy(preds: Sequence[int], labels: Sequence[int]) -> float:
    c = confusion_counts(preds, labels)
    return (c["tp"] + c["tn"]) / float(sum(c.values()))


def f1(preds: Sequence[int], labels: Sequence[int]) -> float:
    """2PR / (P + R); 0 when there is no true positive."""
    c = confusion_counts(preds, labels)
    if c["tp"] == 0:
        return 0.0
    precision = c["tp"] / float(c["tp"] + c["fp"])
    recall = c["tp"] / float(c["tp"] + c["fn"])
    return 2.0 * precision * recall / (precision + recall)


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """
    Probability that a random positive outscores a random negative (ties 0.5),
    i.e. the trapezoidal area under the ROC curve.
    """
    scores, labels = _binary_pair(scores, labels, "auc")
    scores = scores.astype(np.float64)
    y = labels.astype(int) == 1
    pos, neg = scores[y], scores[~y]
    if pos.size == 0 or neg.size == 0:
        raise UndefinedMetricError("AUC is undefined when only one class is present")
    diff = pos[:, None] - neg[None, :]
    concordant = np.sum(diff > 0) + 0.5 * np.sum(diff == 0)
    return float(concordant / (pos.size * neg.size))


def ade(pred: np.ndarray, truth: np.ndarray, channels: str = "center") -> float:
    """
    Mean per-frame Euclidean error in pixels over [.., T, 7] matrices.
    bbox: average of the top-left and bottom-right corner distances;
    center: distance between the centers.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ArgumentError(f"ade: shape mismatch {pred.shape} vs {truth.shape}")
    if channels == "bbox":
        d = pred[..., BBOX_SLICE] - truth[..., BBOX_SLICE]
        tl = np.linalg.norm(d[..., 0:2], axis=-1)
        br = np.linalg.norm(d[..., 2:4], axis=-1)
        return float(np.mean((tl + br) / 2.0))
    if channels == "center":
        d = pred[..., CENTER_SLICE] - truth[..., CENTER_SLICE]
        return float(np.mean(np.linalg.norm(d, axis=-1)))
    raise ArgumentError(f"Unknown ADE channels '{channels}'. Expected one of {', '.join(ADE_CHANNELS)}")


def classification_metrics(probs: Sequence[float], labels: Sequence[int], threshold: float = 0.5) -> Dict[str, float]:
    """acc / auc / f1 for one cell; auc is NaN when the cell holds a single class."""
    probs = np.asarray(probs, dtype=np.float64).reshape(-1)
    preds = (probs >= threshold).astype(int)
    try:
        auc_value = auc(probs, labels)
    except UndefinedMetricError:
        auc_value = float("nan")
    return {"acc": accuracy(preds, labels), "auc": auc_value, "f1": f1(preds, labels)}

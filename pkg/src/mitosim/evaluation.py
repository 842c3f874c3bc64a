"""Pixel-wise segmentation metrics: confusion matrices, IoU and F1 means.

Classes absent from both the ground truth and the prediction are excluded
from per-matrix means; otherwise overlap-free images would contribute
undefined 0/0 terms for the overlap class. Dataset aggregation defaults to
averaging per-image scores; pooling all confusion matrices first is offered
as well since both conventions appear in practice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


@dataclass
class ConfusionMatrix:
    """counts[g][p] = pixels with ground-truth class g predicted as p."""

    counts: np.ndarray   # (k, k) int64

    def validate(self) -> None:
        if self.counts.ndim != 2 or self.counts.shape[0] != self.counts.shape[1]:
            raise ValueError("confusion matrix must be square")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")

    @property
    def k(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if self.k != other.k:
            raise ValueError("class counts differ")
        return ConfusionMatrix(counts=self.counts + other.counts)


def confusion(pred: np.ndarray, gt: np.ndarray, k: int) -> ConfusionMatrix:
    """Count pixels per (ground truth, prediction) class pair."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError("prediction and ground truth dimensions differ")
    if pred.dtype == bool:
        pred = pred.astype(np.int64)
    if gt.dtype == bool:
        gt = gt.astype(np.int64)
    if pred.min() < 0 or pred.max() >= k or gt.min() < 0 or gt.max() >= k:
        raise ValueError(f"labels must lie in [0, {k})")
    idx = gt.astype(np.int64).ravel() * k + pred.astype(np.int64).ravel()
    counts = np.bincount(idx, minlength=k * k).reshape(k, k)
    return ConfusionMatrix(counts=counts)


def _class_terms(cm: ConfusionMatrix):
    counts = cm.counts.astype(np.float64)
    tp = np.diag(counts)
    fn = counts.sum(axis=1) - tp
    fp = counts.sum(axis=0) - tp
    present = (tp + fn + fp) > 0
    if not present.any():
        raise ValueError("no class present in ground truth or prediction")
    return tp, fp, fn, present


def miou(cm: ConfusionMatrix) -> float:
    """Mean over present classes of TP / (TP + FP + FN)."""
    tp, fp, fn, present = _class_terms(cm)
    iou = tp[present] / (tp + fp + fn)[present]
    return float(iou.mean())


def f1(cm: ConfusionMatrix) -> float:
    """Mean over present classes of 2*TP / (2*TP + FP + FN)."""
    tp, fp, fn, present = _class_terms(cm)
    score = 2 * tp[present] / (2 * tp + fp + fn)[present]
    return float(score.mean())


def aggregate(cms: Sequence[ConfusionMatrix], global_pool: bool = False) -> dict:
    """Dataset-level mIoU and F1.

    Per-image averaging (the default) takes the mean of per-image scores;
    global pooling sums the matrices first and scores the total.
    """
    cms = list(cms)
    if not cms:
        raise ValueError("no confusion matrices to aggregate")
    if global_pool:
        pooled = cms[0]
        for cm in cms[1:]:
            pooled = pooled + cm
        return {"miou": miou(pooled), "f1": f1(pooled)}
    return {
        "miou": float(np.mean([miou(cm) for cm in cms])),
        "f1": float(np.mean([f1(cm) for cm in cms])),
    }

"""
metrics.py
----------
Binary segmentation metrics per query and their means.

    IoU = |pred & gt| / |pred | gt|      (1 when both are empty)
    PA  = (TP + TN) / pixels
    P   = TP / (TP + FP)                 (0 when nothing is predicted)
"""

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class QueryMetrics:
    iou: float
    pa: float
    p: float

    def __post_init__(self):
        for name in ("iou", "pa", "p"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")


@dataclass(frozen=True)
class SegMetrics:
    """
    Parameters:
        miou, mpa, mp (float): Means over queries
        per_query (dict): query label -> QueryMetrics
    """
    miou: float
    mpa: float
    mp: float
    per_query: dict = field(default_factory=dict)


def metrics(pred: np.ndarray, gt: np.ndarray, valid: np.ndarray = None) -> QueryMetrics:
    """
    IoU, pixel accuracy and precision of one predicted mask.

    Parameters:
        pred, gt (np.ndarray): (H, W) boolean masks
        valid (np.ndarray): Optional (H, W) mask of pixels that count

    Raises:
        ValueError on shape mismatch
    """
    pred, gt = np.asarray(pred, dtype=bool), np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"Prediction {pred.shape} and ground truth {gt.shape} differ in shape")
    if valid is not None:
        valid = np.asarray(valid, dtype=bool)
        if valid.shape != gt.shape:
            raise ValueError(f"Valid mask {valid.shape} does not match {gt.shape}")
        pred, gt = pred[valid], gt[valid]

    tp = int(np.sum(pred & gt))
    fp = int(np.sum(pred & ~gt))
    union = int(np.sum(pred | gt))
    total = pred.size

    iou = 1.0 if union == 0 else tp / union
    pa = 1.0 if total == 0 else float(np.sum(pred == gt)) / total
    p = 0.0 if tp + fp == 0 else tp / (tp + fp)
    return QueryMetrics(iou, pa, p)


def average(results: list) -> QueryMetrics:
    """
    Component-wise mean of several QueryMetrics.
    """
    if not results:
        raise ValueError("Nothing to average")
    return QueryMetrics(float(np.mean([r.iou for r in results])),
                        float(np.mean([r.pa for r in results])),
                        float(np.mean([r.p for r in results])))


def summarize(per_query: dict) -> SegMetrics:
    """
    Mean over queries of per-query metrics (each already averaged over views).
    """
    mean = average(list(per_query.values()))
    return SegMetrics(mean.iou, mean.pa, mean.p, dict(per_query))

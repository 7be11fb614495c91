"""Mask and box metrics plus the refiner loss terms.

Empty-vs-empty comparisons score 1 (a correct empty prediction), one-sided
empties score 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from maskpath.errors import EmptyAccumulator, KMismatch
from maskpath.masks import (
    as_binary,
    as_soft,
    boundary_band,
    check_same_shape,
    image_diagonal,
    signed_distance_normalized,
)
from maskpath.raster import NormalizedBox

BCE_CLIP = 1e-7
DICE_EPS = 1e-6
BOUNDARY_EPS = 1e-6
BOUNDARY_GAMMA = 10.0
WARMUP_START = 1000
WARMUP_LENGTH = 500


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    fn: int

    @classmethod
    def of(cls, pred, gt) -> "ConfusionCounts":
        pred, gt = as_binary(pred), as_binary(gt)
        check_same_shape(pred, gt)
        tp = int(np.count_nonzero(pred & gt))
        return cls(tp, int(np.count_nonzero(pred)) - tp, int(np.count_nonzero(gt)) - tp)


def _ratio(num: int, den: int) -> float:
    return 1.0 if den == 0 else float(num) / float(den)


def iou(a, b) -> float:
    c = ConfusionCounts.of(a, b)
    return _ratio(c.tp, c.tp + c.fp + c.fn)


def box_iou(a, b) -> float:
    ax0, ay0, ax1, ay1 = NormalizedBox.coerce(a).corners()
    bx0, by0, bx1, by1 = NormalizedBox.coerce(b).corners()
    iw = max(0.0, min(ax1, bx1) - max(ax0, bx0))
    ih = max(0.0, min(ay1, by1) - max(ay0, by0))
    inter = iw * ih
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union if union > 0 else 0.0


@dataclass(frozen=True)
class CIoUAccumulator:
    """Pooled intersection and union counts; merging is associative and commutative."""

    sum_intersection: int = 0
    sum_union: int = 0
    n: int = 0

    def add(self, pred, gt) -> "CIoUAccumulator":
        c = ConfusionCounts.of(pred, gt)
        return self.add_counts(c.tp, c.tp + c.fp + c.fn)

    def add_counts(self, intersection: int, union: int) -> "CIoUAccumulator":
        return CIoUAccumulator(self.sum_intersection + intersection, self.sum_union + union, self.n + 1)

    def merge(self, other: "CIoUAccumulator") -> "CIoUAccumulator":
        return CIoUAccumulator(
            self.sum_intersection + other.sum_intersection, self.sum_union + other.sum_union, self.n + other.n
        )

    def value(self) -> float:
        if self.sum_union == 0:
            raise EmptyAccumulator("cIoU undefined: pooled union is zero")
        return self.sum_intersection / self.sum_union


def ciou_update(acc: CIoUAccumulator, pred, gt) -> CIoUAccumulator:
    return acc.add(pred, gt)


def ciou_final(acc: CIoUAccumulator) -> float:
    return acc.value()


def tversky(pred, gt, alpha: float, beta: float) -> float:
    """TP / (TP + alpha FP + beta FN); alpha = beta = 1 gives IoU, 0.5 gives Dice."""
    if alpha < 0 or beta < 0:
        raise ValueError("Tversky weights must be non-negative")
    c = ConfusionCounts.of(pred, gt)
    if c.tp == 0 and c.fp == 0 and c.fn == 0:
        return 1.0
    den = c.tp + alpha * c.fp + beta * c.fn
    return c.tp / den if den > 0 else 0.0


def boundary_eps(shape: tuple[int, int], eps_frac: float) -> float:
    return eps_frac * image_diagonal(*shape)


def boundary_iou(pred, gt, eps_frac: float = 0.05) -> float:
    """IoU of the inner boundary bands, band width ``eps_frac`` times the image diagonal."""
    if eps_frac <= 0:
        raise ValueError(f"eps_frac must be positive, got {eps_frac}")
    pred, gt = as_binary(pred), as_binary(gt)
    check_same_shape(pred, gt)
    eps = boundary_eps(pred.shape, eps_frac)
    return iou(boundary_band(pred, eps), boundary_band(gt, eps))


def soft_iou(pred, gt) -> float:
    p = as_soft(pred)
    m = as_binary(gt).astype(np.float64)
    check_same_shape(p, m)
    inter = float(np.sum(p * m))
    den = float(np.sum(p)) + float(np.sum(m)) - inter
    return 1.0 if den == 0 else inter / den


def _clipped(pred) -> np.ndarray:
    return np.clip(as_soft(pred), BCE_CLIP, 1.0 - BCE_CLIP)


def bce_map(pred, gt) -> np.ndarray:
    p = _clipped(pred)
    y = as_binary(gt)
    check_same_shape(p, y)
    return -np.where(y, np.log(p), np.log1p(-p))


def bce(pred, gt) -> float:
    return float(np.mean(bce_map(pred, gt)))


def dice_loss(pred, gt) -> float:
    p = _clipped(pred)
    m = as_binary(gt).astype(np.float64)
    check_same_shape(p, m)
    return 1.0 - 2.0 * float(np.sum(p * m)) / (float(np.sum(p)) + float(np.sum(m)) + DICE_EPS)


def seg_loss(preds: Sequence, gt) -> float:
    """Mean over hypotheses of BCE + Dice loss."""
    if len(preds) == 0:
        raise KMismatch("need at least one hypothesis")
    return float(np.mean([bce(p, gt) + dice_loss(p, gt) for p in preds]))


def boundary_weights(gt, gamma: float = BOUNDARY_GAMMA) -> np.ndarray:
    return np.exp(-gamma * np.abs(signed_distance_normalized(gt)))


def boundary_weighted_bce(pred, gt, gamma: float = BOUNDARY_GAMMA) -> float:
    w = boundary_weights(gt, gamma)
    return float(np.sum(w * bce_map(pred, gt)) / (np.sum(w) + BOUNDARY_EPS))


def quality_target(pred, gt) -> float:
    """Regression target for a hypothesis' quality score (treated as a constant)."""
    return soft_iou(pred, gt)


def boundary_warmup(step: int) -> float:
    """Boundary-loss weight: 0 for the first 1000 steps, linear to 1 over the next 500."""
    if step < WARMUP_START:
        return 0.0
    return min(1.0, (step - WARMUP_START) / WARMUP_LENGTH)


def refiner_step_loss(masks: Sequence, scores: Sequence[float], gt, step: int, lambda_iou: float) -> float:
    """Per-step refiner loss over all K hypotheses (post-sigmoid probabilities).

    Segmentation and boundary terms are averaged over hypotheses; the quality
    term is the squared L2 norm of the score error vector.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    if len(masks) == 0 or len(masks) != scores.size:
        raise KMismatch(f"{len(masks)} masks but {scores.size} quality scores")
    targets = np.array([quality_target(m, gt) for m in masks])
    loss = seg_loss(masks, gt) + lambda_iou * float(np.sum((scores - targets) ** 2))
    weight = boundary_warmup(step)
    if weight > 0:
        loss += weight * float(np.mean([boundary_weighted_bce(m, gt) for m in masks]))
    return loss

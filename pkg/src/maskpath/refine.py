"""Iterative mask refinement loop against a pluggable refiner.

A refiner is any callable ``refiner(features, mask) -> (masks, scores)`` where
``masks`` is a ``(K, H, W)`` array of probabilities and ``scores`` holds K
quality estimates. The loop feeds back the best-scoring hypothesis each step;
nothing else crosses step boundaries.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Protocol

import numpy as np

from maskpath.errors import RefinerContractViolation
from maskpath.masks import as_binary, as_soft, check_same_shape
from maskpath.metrics import refiner_step_loss, soft_iou

DEFAULT_STEPS = 5


class Refiner(Protocol):
    def __call__(self, features: Any, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]: ...


@dataclass
class RefineStep:
    selected: int
    scores: np.ndarray
    hypotheses: np.ndarray  # (K, H, W)
    loss: Optional[float] = None

    @property
    def mask(self) -> np.ndarray:
        return self.hypotheses[self.selected]


@dataclass
class RefineTrace:
    steps: list[RefineStep] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.steps)

    def to_dict(self) -> dict:
        return {
            "selected": [s.selected for s in self.steps],
            "scores": [s.scores.tolist() for s in self.steps],
            "losses": [s.loss for s in self.steps],
        }


def _check_output(out, shape, k_expected: Optional[int]) -> tuple[np.ndarray, np.ndarray]:
    try:
        masks, scores = out
    except (TypeError, ValueError) as exc:
        raise RefinerContractViolation("refiner must return (masks, scores)") from exc
    masks = np.asarray(masks, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    if masks.ndim == 2:
        masks = masks[None]
    if masks.ndim != 3 or masks.shape[1:] != shape:
        raise RefinerContractViolation(f"hypotheses have shape {masks.shape[1:]}, expected {shape}")
    k = masks.shape[0]
    if k < 1 or scores.shape != (k,):
        raise RefinerContractViolation(f"{k} hypotheses but scores of shape {scores.shape}")
    if k_expected is not None and k != k_expected:
        raise RefinerContractViolation(f"refiner changed K from {k_expected} to {k}")
    if not np.all(np.isfinite(scores)):
        raise RefinerContractViolation("quality scores must be finite")
    if not np.all(np.isfinite(masks)) or masks.min() < 0.0 or masks.max() > 1.0:
        raise RefinerContractViolation("hypotheses must be probabilities in [0, 1]")
    return masks, scores


def refine(
    refiner: Refiner | Callable,
    initial,
    steps: int = DEFAULT_STEPS,
    features: Any = None,
) -> tuple[np.ndarray, RefineTrace]:
    """Run ``steps`` refinement iterations starting from ``initial``.

    Each iteration keeps the hypothesis with the highest quality score (lowest
    index on ties) as the next estimate. The feedback mask is passed on as-is,
    without thresholding.
    """
    if steps < 1:
        raise ValueError(f"need at least one step, got {steps}")
    current = as_soft(initial)
    trace = RefineTrace()
    k = None
    for _ in range(steps):
        masks, scores = _check_output(refiner(features, current.copy()), current.shape, k)
        k = masks.shape[0]
        best = int(np.argmax(scores))
        trace.steps.append(RefineStep(best, scores, masks))
        current = masks[best].copy()
    return current, trace


def eval_step_losses(
    trace: RefineTrace, gt, lambda_iou: float, step_offset: int = 0
) -> tuple[list[float], float]:
    """Per-step refiner losses over all hypotheses, and their mean.

    ``step_offset`` is the global training step; it is shared by every unrolled
    iteration, since the warmup schedule advances per training step.
    """
    if not trace.steps:
        raise ValueError("trace is empty")
    gt = as_binary(gt)
    losses = []
    for st in trace.steps:
        check_same_shape(st.hypotheses[0], gt)
        st.loss = refiner_step_loss(list(st.hypotheses), st.scores, gt, step_offset, lambda_iou)
        losses.append(st.loss)
    return losses, float(np.mean(losses))


class OracleRefiner:
    """Test double that blends the current estimate toward a known target.

    Hypothesis 0 is ``(1 - blend) * current + blend * target``; hypothesis
    ``k > 0`` is hypothesis 0 scaled by ``1 - k / (2K)``, which strictly lowers
    its SoftIoU whenever hypothesis 0 overlaps the target. Scores are the true
    SoftIoU of each hypothesis. ``calls`` counts invocations.
    """

    def __init__(self, target, blend: float = 0.5, hypotheses: int = 3):
        self.target = as_binary(target)
        if not self.target.any():
            raise ValueError("oracle target must be non-empty")
        if not 0.0 < blend <= 1.0:
            raise ValueError(f"blend must lie in (0, 1], got {blend}")
        if hypotheses < 1:
            raise ValueError("need at least one hypothesis")
        self.blend = blend
        self.k = hypotheses
        self.calls = 0

    def __call__(self, features, mask):
        self.calls += 1
        mask = as_soft(mask)
        check_same_shape(mask, self.target)
        base = (1.0 - self.blend) * mask + self.blend * self.target
        hyps = np.stack([base * (1.0 - j / (2.0 * self.k)) for j in range(self.k)])
        scores = np.array([soft_iou(h, self.target) for h in hyps])
        return hyps, scores


class IdentityRefiner:
    """Returns the input as its single hypothesis."""

    def __init__(self):
        self.calls = 0

    def __call__(self, features, mask):
        self.calls += 1
        return np.asarray(mask, dtype=np.float64)[None], np.array([1.0])

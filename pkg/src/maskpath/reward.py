"""Piecewise group reward for path rollouts.

Each group of rollouts is scored in one of three regimes chosen from the
valid rollouts' mean box IoU and mean Tversky index: box IoU while boxes are
still poor, Tversky (coverage) while masks miss too much, boundary IoU after
that. Invalid rollouts score 0 and do not enter the means.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Optional, Sequence, Union

import numpy as np

from maskpath.errors import ConfigError, EmptyGroup, InvalidRollout, MaskpathError
from maskpath.masks import as_binary
from maskpath.metrics import box_iou, boundary_iou, tversky
from maskpath.path import DEFAULT_L_MAX, PathToken, VectorPath, parse, tokenize
from maskpath.raster import NormalizedBox, mask_to_box, rasterize

log = logging.getLogger(__name__)


class Regime(str, enum.Enum):
    BOX = "Box"
    COVERAGE = "Coverage"
    BOUNDARY = "Boundary"


@dataclass(frozen=True)
class RewardConfig:
    """Reward thresholds and metric parameters.

    The defaults are placeholders chosen for this toolkit, not published values;
    only ``beta > alpha`` and ``eps_frac = 0.05`` are prescribed.
    """

    tau_box: float = 0.5
    tau_mask: float = 0.85
    alpha: float = 0.3
    beta: float = 0.7
    eps_frac: float = 0.05
    l_max: int = DEFAULT_L_MAX

    def __post_init__(self):
        if not (0 < self.tau_box < 1 and 0 < self.tau_mask < 1):
            raise ConfigError("tau_box and tau_mask must lie in (0, 1)")
        if self.alpha < 0 or not self.beta > self.alpha:
            raise ConfigError("need 0 <= alpha < beta (coverage bias)")
        if not self.eps_frac > 0:
            raise ConfigError("eps_frac must be positive")
        if self.l_max < 1:
            raise ConfigError("l_max must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RewardConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown reward config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


@dataclass
class Rollout:
    """One sampled (box, path) pair. ``path`` is a d-string or a token list."""

    box: object
    path: Union[str, Sequence[PathToken], VectorPath]

    def resolve(self, l_max: int = DEFAULT_L_MAX) -> tuple[NormalizedBox, VectorPath]:
        """Validate box and path; raises a :class:`MaskpathError` for invalid rollouts."""
        box = NormalizedBox.coerce(self.box)
        if isinstance(self.path, VectorPath):
            return box, self.path
        tokens = tokenize(self.path) if isinstance(self.path, str) else list(self.path)
        return box, parse(tokens, l_max=l_max)

    @classmethod
    def from_dict(cls, data: dict) -> "Rollout":
        return cls(box=data.get("box"), path=data.get("path", ""))


@dataclass
class ValidRollout:
    index: int
    box: NormalizedBox
    path: VectorPath


@dataclass
class GroupRewardReport:
    rewards: list[float]
    regime: Regime
    mean_box_iou: Optional[float]
    mean_tversky: Optional[float]
    valid_count: int
    errors: dict[int, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "rewards": self.rewards,
            "regime": self.regime.value,
            "group_means": {"box_iou": self.mean_box_iou, "tversky": self.mean_tversky},
            "valid_count": self.valid_count,
            "invalid": {str(k): v for k, v in sorted(self.errors.items())},
        }


def classify_rollouts(
    group: Sequence[Rollout], l_max: int = DEFAULT_L_MAX
) -> tuple[list[ValidRollout], dict[int, str]]:
    """Split a group into parsed valid rollouts and ``{index: error code}`` for the rest."""
    if not group:
        raise EmptyGroup("rollout group is empty")
    valid, invalid = [], {}
    for i, rollout in enumerate(group):
        try:
            box, path = rollout.resolve(l_max)
        except MaskpathError as exc:
            invalid[i] = exc.code
            continue
        if not path.subpaths:
            invalid[i] = "EmptyPath"
            continue
        valid.append(ValidRollout(i, box, path))
    return valid, invalid


def select_regime(mean_box: float, mean_tv: float, cfg: RewardConfig) -> Regime:
    if mean_box < cfg.tau_box:
        return Regime.BOX
    if mean_tv < cfg.tau_mask:
        return Regime.COVERAGE
    return Regime.BOUNDARY


def reward_single(
    rollout: Union[Rollout, ValidRollout],
    gt,
    image_dims: tuple[int, int],
    regime: Regime,
    cfg: RewardConfig,
    raster: Optional[np.ndarray] = None,
) -> float:
    """Reward of one valid rollout under a fixed regime."""
    if isinstance(rollout, Rollout):
        try:
            box, path = rollout.resolve(cfg.l_max)
        except MaskpathError as exc:
            raise InvalidRollout(f"rollout is invalid: {exc.code}") from exc
    else:
        box, path = rollout.box, rollout.path
    gt = as_binary(gt)
    regime = Regime(regime)
    if regime is Regime.BOX:
        return box_iou(box, mask_to_box(gt))
    if raster is None:
        raster = rasterize(box, path, *image_dims)
    if regime is Regime.COVERAGE:
        return tversky(raster, gt, cfg.alpha, cfg.beta)
    return boundary_iou(raster, gt, cfg.eps_frac)


def group_reward(
    group: Sequence[Rollout], gt, image_dims: Optional[tuple[int, int]] = None, cfg: RewardConfig = RewardConfig()
) -> GroupRewardReport:
    """Score a rollout group at native resolution.

    A group with no valid rollout reports the Box regime with all-zero rewards.
    """
    gt = as_binary(gt)
    if image_dims is None:
        image_dims = gt.shape
    if tuple(image_dims) != gt.shape:
        raise ValueError(f"image dims {image_dims} do not match ground truth {gt.shape}")
    log.info("group reward config: %s", cfg.to_dict())
    valid, invalid = classify_rollouts(group, cfg.l_max)
    rewards = [0.0] * len(group)
    if not valid:
        return GroupRewardReport(rewards, Regime.BOX, None, None, 0, invalid)

    target_box = mask_to_box(gt)
    rasters, box_ious, tvs = {}, {}, {}
    for r in valid:
        try:
            rasters[r.index] = rasterize(r.box, r.path, *image_dims)
        except MaskpathError as exc:
            invalid[r.index] = exc.code
            continue
        box_ious[r.index] = box_iou(r.box, target_box)
        tvs[r.index] = tversky(rasters[r.index], gt, cfg.alpha, cfg.beta)
    valid = [r for r in valid if r.index in rasters]
    if not valid:
        return GroupRewardReport(rewards, Regime.BOX, None, None, 0, invalid)

    mean_box = float(np.mean([box_ious[r.index] for r in valid]))
    mean_tv = float(np.mean([tvs[r.index] for r in valid]))
    regime = select_regime(mean_box, mean_tv, cfg)
    for r in valid:
        if regime is Regime.BOX:
            rewards[r.index] = box_ious[r.index]
        elif regime is Regime.COVERAGE:
            rewards[r.index] = tvs[r.index]
        else:
            rewards[r.index] = boundary_iou(rasters[r.index], gt, cfg.eps_frac)
    return GroupRewardReport(rewards, regime, mean_box, mean_tv, len(valid), invalid)

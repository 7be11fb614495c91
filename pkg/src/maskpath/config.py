"""Tool-wide configuration loaded from a single JSON document."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from maskpath.errors import ConfigError
from maskpath.raster import DEFAULT_TOLERANCE, WORKING_SIZE
from maskpath.refine import DEFAULT_STEPS
from maskpath.reward import RewardConfig


@dataclass(frozen=True)
class ToolConfig:
    reward: RewardConfig = field(default_factory=RewardConfig)
    refine_steps: int = DEFAULT_STEPS
    working_resolution: tuple[int, int] = (WORKING_SIZE, WORKING_SIZE)
    raster_tolerance: float = DEFAULT_TOLERANCE
    threads: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.refine_steps < 1:
            raise ConfigError("refine_steps must be >= 1")
        if len(self.working_resolution) != 2 or min(self.working_resolution) < 1:
            raise ConfigError("working_resolution must be two positive integers")
        if not self.raster_tolerance > 0:
            raise ConfigError("raster_tolerance must be positive")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")

    def to_dict(self) -> dict:
        return {
            "reward": self.reward.to_dict(),
            "refine_steps": self.refine_steps,
            "working_resolution": list(self.working_resolution),
            "raster_tolerance": self.raster_tolerance,
            "threads": self.threads,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ToolConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "reward" in kwargs:
            kwargs["reward"] = RewardConfig.from_dict(kwargs["reward"])
        if "working_resolution" in kwargs:
            kwargs["working_resolution"] = tuple(int(v) for v in kwargs["working_resolution"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def replace(self, **changes) -> "ToolConfig":
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data.update(changes)
        return ToolConfig(**data)


def load_config(path: str | Path | None) -> ToolConfig:
    if path is None:
        return ToolConfig()
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load config {path}: {exc}") from exc
    return ToolConfig.from_dict(data)

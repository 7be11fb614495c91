"""Region token codecs: coordinate and size bins, Fourier features, bin selection."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from maskpath.errors import BinOutOfRange, DimensionMismatch, LengthMismatch, NonPositiveSize, ValueOutOfRange
from maskpath.raster import NormalizedBox

DEFAULT_BINS = 1024
SIZE_OCTAVES = 10  # sizes span [2**-10, 1]


@dataclass(frozen=True)
class BinConfig:
    bins: int = DEFAULT_BINS

    def __post_init__(self):
        if self.bins < 2:
            raise ValueError(f"need at least 2 bins, got {self.bins}")


_DEFAULT = BinConfig()


def _check_bin(v: int, cfg: BinConfig) -> int:
    v = int(v)
    if not 0 <= v < cfg.bins:
        raise BinOutOfRange(f"bin {v} outside [0, {cfg.bins})")
    return v


def dequantize_coord(v: int, cfg: BinConfig = _DEFAULT) -> float:
    return _check_bin(v, cfg) / cfg.bins


def quantize_coord(c: float, cfg: BinConfig = _DEFAULT) -> int:
    """Largest bin whose value does not exceed ``c`` (clamped to the top bin)."""
    if not 0.0 <= c <= 1.0:
        raise ValueOutOfRange(f"coordinate {c} outside [0, 1]")
    v = math.floor(c * cfg.bins)
    # guard against c * bins rounding across an integer
    if v > 0 and v / cfg.bins > c:
        v -= 1
    elif (v + 1) / cfg.bins <= c:
        v += 1
    return min(v, cfg.bins - 1)


def dequantize_size(v: int, cfg: BinConfig = _DEFAULT) -> float:
    v = _check_bin(v, cfg)
    return 2.0 ** ((v / (cfg.bins - 1)) * SIZE_OCTAVES - SIZE_OCTAVES)


def quantize_size(s: float, cfg: BinConfig = _DEFAULT) -> int:
    """Nearest bin in log2 space; sizes outside [2**-10, 1] clamp to the end bins."""
    if not s > 0:
        raise NonPositiveSize(f"size must be positive, got {s}")
    pos = (math.log2(s) + SIZE_OCTAVES) / SIZE_OCTAVES * (cfg.bins - 1)
    return int(min(max(math.floor(pos + 0.5), 0), cfg.bins - 1))


@dataclass(frozen=True)
class FourierBasis:
    """Fixed random frequency matrix of shape ``(d_phi // 2, d_in)``.

    Entries are standard normal draws from ``numpy.random.default_rng(seed)``.
    """

    d_in: int
    d_phi: int
    seed: int = 0
    matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.d_phi <= 0 or self.d_phi % 2:
            raise ValueError(f"d_phi must be a positive even number, got {self.d_phi}")
        if self.d_in < 1:
            raise ValueError(f"d_in must be positive, got {self.d_in}")
        matrix = np.random.default_rng(self.seed).standard_normal((self.d_phi // 2, self.d_in))
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)


def fourier_features(u: Sequence[float], basis: FourierBasis) -> np.ndarray:
    """``[cos(2 pi u W^T), sin(2 pi u W^T)]``, cosine half first."""
    u = np.atleast_1d(np.asarray(u, dtype=np.float64))
    if u.shape != (basis.d_in,):
        raise DimensionMismatch(f"input has shape {u.shape}, basis expects ({basis.d_in},)")
    proj = 2.0 * np.pi * (basis.matrix @ u)
    return np.concatenate([np.cos(proj), np.sin(proj)])


def softmax(z: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64) / temperature
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def select_bin(
    logits: Sequence[float],
    mode: str = "argmax",
    temperature: float = 1.0,
    seed: Optional[int] = None,
    cfg: BinConfig = _DEFAULT,
) -> int:
    """Pick a bin from logits: ``argmax`` (first index on ties) or ``sample``.

    Sampling draws from ``softmax(logits / temperature)`` with a generator seeded
    by ``seed``; temperature 0 falls back to argmax.
    """
    z = np.asarray(logits, dtype=np.float64)
    if z.shape != (cfg.bins,):
        raise LengthMismatch(f"expected {cfg.bins} logits, got shape {z.shape}")
    if mode == "argmax" or (mode == "sample" and temperature == 0):
        return int(np.argmax(z))
    if mode != "sample":
        raise ValueError(f"unknown selection mode {mode!r}")
    if temperature < 0:
        raise ValueError("temperature must be non-negative")
    cdf = np.cumsum(softmax(z, temperature))
    u = np.random.default_rng(seed).random() * cdf[-1]
    return int(min(np.searchsorted(cdf, u, side="right"), cfg.bins - 1))


def decode_box(coord_bins: Sequence[int], size_bins: Sequence[int], cfg: BinConfig = _DEFAULT) -> NormalizedBox:
    vx, vy = coord_bins
    vw, vh = size_bins
    return NormalizedBox(
        dequantize_coord(vx, cfg), dequantize_coord(vy, cfg), dequantize_size(vw, cfg), dequantize_size(vh, cfg)
    )


def encode_box(box, cfg: BinConfig = _DEFAULT) -> tuple[tuple[int, int], tuple[int, int]]:
    box = NormalizedBox.coerce(box)
    return (
        (quantize_coord(box.cx, cfg), quantize_coord(box.cy, cfg)),
        (quantize_size(box.w, cfg), quantize_size(box.h, cfg)),
    )

"""Pixel masks: RLE and PNG codecs, resizing, distance transforms, boundary bands.

Masks are plain numpy arrays. A binary mask is a 2-D ``bool`` array, a soft
mask a 2-D ``float64`` array with values in [0, 1]. Row ``i``, column ``j``.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from maskpath.errors import DimensionMismatch, MaskLoadError, SizeMismatch, ZeroDimension

PNG_THRESHOLD = 128


def as_binary(mask: Any) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ZeroDimension(f"mask must be a non-empty 2-D array, got shape {arr.shape}")
    return arr.astype(bool, copy=False)


def as_soft(mask: Any) -> np.ndarray:
    arr = np.asarray(mask, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ZeroDimension(f"mask must be a non-empty 2-D array, got shape {arr.shape}")
    if arr.size and (not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("soft mask values must lie in [0, 1]")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")


# ---------------------------------------------------------------------------
# run-length encoding


def decode_rle(counts: Sequence[int], height: int, width: int, order: str = "F") -> np.ndarray:
    """Expand alternating background/foreground run lengths into a mask.

    ``order="F"`` is the COCO column-major convention, ``"C"`` row-major.
    """
    if height < 1 or width < 1:
        raise ZeroDimension(f"invalid mask size {height}x{width}")
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size and counts.min() < 0:
        raise SizeMismatch("negative run length")
    total = int(counts.sum())
    if total != height * width:
        raise SizeMismatch(f"run lengths sum to {total}, expected {height * width}")
    values = np.zeros(counts.size, dtype=bool)
    values[1::2] = True
    flat = np.repeat(values, counts)
    return flat.reshape((height, width), order=order)


def encode_rle(mask: Any, order: str = "F") -> list[int]:
    """Run lengths of ``mask``, always starting with a (possibly empty) background run."""
    flat = as_binary(mask).ravel(order=order)
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], change, [flat.size]))
    runs = np.diff(bounds).tolist()
    if flat[0]:
        runs.insert(0, 0)
    return runs


def compress_counts(counts: Sequence[int]) -> str:
    """COCO char-packed RLE string (5-bit groups, deltas against the run two back)."""
    out = []
    for i, count in enumerate(counts):
        x = int(count)
        if i > 2:
            x -= int(counts[i - 2])
        more = True
        while more:
            c = x & 0x1F
            x >>= 5
            more = x != -1 if c & 0x10 else x != 0
            if more:
                c |= 0x20
            out.append(chr(c + 48))
    return "".join(out)


def decompress_counts(text: str) -> list[int]:
    counts: list[int] = []
    p = 0
    while p < len(text):
        x = 0
        k = 0
        more = True
        while more:
            if p >= len(text):
                raise MaskLoadError("truncated compressed RLE string")
            c = ord(text[p]) - 48
            if c < 0 or c > 63:
                raise MaskLoadError(f"invalid character {text[p]!r} in compressed RLE")
            x |= (c & 0x1F) << (5 * k)
            more = bool(c & 0x20)
            p += 1
            k += 1
            if not more and c & 0x10:
                x |= -1 << (5 * k)
        if len(counts) > 2:
            x += counts[-2]
        counts.append(x)
    return counts


def rle_to_mask(rle: dict) -> np.ndarray:
    """Decode a COCO RLE object; ``counts`` may be a list or a compressed string."""
    try:
        height, width = (int(v) for v in rle["size"])
        counts = rle["counts"]
    except (KeyError, TypeError, ValueError) as exc:
        raise MaskLoadError(f"malformed RLE object: {exc}") from exc
    if isinstance(counts, bytes):
        counts = counts.decode("ascii")
    if isinstance(counts, str):
        counts = decompress_counts(counts)
    return decode_rle(counts, height, width, order="F")


def mask_to_rle(mask: Any, compressed: bool = False) -> dict:
    mask = as_binary(mask)
    counts = encode_rle(mask, order="F")
    return {
        "size": [int(mask.shape[0]), int(mask.shape[1])],
        "counts": compress_counts(counts) if compressed else counts,
    }


# ---------------------------------------------------------------------------
# PNG and mask references


def read_png(path: str | Path, soft: bool = False) -> np.ndarray:
    """Load an 8-bit PNG as a mask; foreground iff gray value >= 128.

    With ``soft=True`` the gray values are returned scaled to [0, 1] instead.
    """
    try:
        with Image.open(path) as img:
            gray = np.asarray(img.convert("L"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise MaskLoadError(f"cannot read PNG {path}: {exc}") from exc
    if soft:
        return gray.astype(np.float64) / 255.0
    return gray >= PNG_THRESHOLD


def write_png(mask: Any, path: str | Path) -> None:
    arr = np.asarray(mask)
    if arr.dtype == bool:
        gray = arr.astype(np.uint8) * 255
    else:
        gray = np.rint(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(gray, mode="L").save(path, format="PNG")


def load_mask(ref: Any, base_dir: str | Path | None = None, soft: bool = False) -> np.ndarray:
    """Resolve a mask reference: an RLE dict, or a path to a ``.png`` / ``.json`` file.

    Relative paths resolve against ``base_dir``. RLE masks are binary; with
    ``soft=True`` they are returned as float arrays.
    """
    if isinstance(ref, dict):
        mask = rle_to_mask(ref)
    elif isinstance(ref, (str, Path)):
        path = Path(ref)
        if not path.is_absolute() and base_dir is not None:
            path = Path(base_dir) / path
        if not path.exists():
            raise MaskLoadError(f"mask file not found: {path}")
        if path.suffix.lower() == ".json":
            try:
                mask = rle_to_mask(json.loads(path.read_text()))
            except json.JSONDecodeError as exc:
                raise MaskLoadError(f"invalid RLE JSON in {path}: {exc}") from exc
        else:
            return read_png(path, soft=soft)
    else:
        raise MaskLoadError(f"unsupported mask reference {ref!r}")
    return mask.astype(np.float64) if soft else mask


# ---------------------------------------------------------------------------
# resizing and thresholding


def _axis_weights(n_in: int, n_out: int) -> np.ndarray:
    if n_out < n_in:
        # box filter: fractional overlap of each source cell with the output cell
        scale = n_in / n_out
        lo = np.arange(n_out)[:, None] * scale
        hi = lo + scale
        j = np.arange(n_in)[None, :]
        overlap = np.clip(np.minimum(hi, j + 1) - np.maximum(lo, j), 0.0, None)
        return overlap / overlap.sum(axis=1, keepdims=True)
    # bilinear with half-pixel centres, edge-clamped
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    j0 = np.floor(src).astype(np.int64)
    j1 = np.minimum(j0 + 1, n_in - 1)
    frac = src - j0
    weights = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    np.add.at(weights, (rows, j0), 1.0 - frac)
    np.add.at(weights, (rows, j1), frac)
    return weights


def resize_mask(mask: Any, out_h: int, out_w: int) -> np.ndarray:
    """Resize a soft mask: area-average when shrinking an axis, bilinear when growing it."""
    if out_h < 1 or out_w < 1:
        raise ZeroDimension(f"target size must be positive, got {out_h}x{out_w}")
    src = as_soft(mask)
    h, w = src.shape
    if (h, w) == (out_h, out_w):
        return src.copy()
    out = src
    if out_h != h:
        out = _axis_weights(h, out_h) @ out
    if out_w != w:
        out = out @ _axis_weights(w, out_w).T
    return np.clip(out, 0.0, 1.0)


def threshold(mask: Any, t: float = 0.5) -> np.ndarray:
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {t}")
    return as_soft(mask) >= t


# ---------------------------------------------------------------------------
# distances


def _nearest_zero_distance(arr: np.ndarray) -> np.ndarray:
    # exact Euclidean: integer squared offsets to the nearest zero, rooted once
    indices = ndimage.distance_transform_edt(arr, return_distances=False, return_indices=True)
    rows, cols = np.indices(arr.shape)
    sq = (indices[0] - rows) ** 2 + (indices[1] - cols) ** 2
    return np.sqrt(sq.astype(np.float64))


def distance_from_outside(mask: Any) -> np.ndarray:
    """Distance from each foreground pixel to the nearest background pixel.

    Pixels outside the image count as background, so a foreground pixel on the
    image border is at distance 1. Background pixels carry 0.
    """
    mask = as_binary(mask)
    padded = np.pad(mask, 1, constant_values=False)
    return _nearest_zero_distance(padded)[1:-1, 1:-1]


def distance_to_inside(mask: Any) -> np.ndarray:
    """Distance from each background pixel to the nearest foreground pixel (inf if none)."""
    mask = as_binary(mask)
    if not mask.any():
        return np.full(mask.shape, np.inf)
    return _nearest_zero_distance(~mask)


def boundary_band(mask: Any, eps: float) -> np.ndarray:
    """Foreground pixels whose distance to the outside is at most ``eps``."""
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    mask = as_binary(mask)
    return mask & (distance_from_outside(mask) <= eps)


def image_diagonal(height: int, width: int) -> float:
    return math.sqrt(height * height + width * width)


def signed_distance_normalized(mask: Any) -> np.ndarray:
    """Signed distance divided by the image diagonal and clipped to [-1, 1].

    Inside pixels get ``-distance_from_outside``, outside pixels
    ``+distance_to_inside``; the zero crossing lies between them. An empty mask
    maps to +1 everywhere.
    """
    mask = as_binary(mask)
    diag = image_diagonal(*mask.shape)
    signed = np.where(mask, -distance_from_outside(mask), distance_to_inside(mask))
    return np.clip(signed / diag, -1.0, 1.0)

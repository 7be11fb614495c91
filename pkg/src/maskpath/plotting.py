"""Report figures, delimited per-sample tables and mask overlays."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from PIL import Image  # noqa: E402

from maskpath.masks import as_binary  # noqa: E402

OVERLAY_COLOR = (255, 64, 32)
OVERLAY_ALPHA = 0.5

rc = {
    "figure.figsize": (4.5, 3.0),
    "figure.dpi": 100,
    "font.size": 8,
    "axes.labelsize": 8,
    "axes.titlesize": 9,
    "axes.linewidth": 0.6,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.0,
    "legend.fontsize": 7,
    "legend.frameon": False,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

# PNG metadata pinned so identical inputs give identical files
_META = {"Software": None}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, metadata=_META)
    plt.close(fig)
    return path


def write_table(rows: Sequence[dict], path: str | Path, columns: Optional[Sequence[str]] = None) -> Path:
    path = Path(path)
    columns = list(columns or (rows[0].keys() if rows else []))
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k) for k in columns})
    return path


def score_histogram(series: dict[str, Sequence[float]], path: str | Path, title: str = "") -> Path:
    """Overlaid histograms of per-sample scores in [0, 1]."""
    with plt.rc_context(rc):
        fig, ax = plt.subplots()
        bins = np.linspace(0.0, 1.0, 21)
        for label, values in series.items():
            ax.hist(values, bins=bins, histtype="step", label=label)
        ax.set_xlim(0, 1)
        ax.set_xlabel("score")
        ax.set_ylabel("samples")
        if title:
            ax.set_title(title)
        if len(series) > 1:
            ax.legend()
        return _save(fig, Path(path))


def refine_curve(per_step: dict[str, Sequence[float]], path: str | Path) -> Path:
    with plt.rc_context(rc):
        fig, ax = plt.subplots()
        for label, values in per_step.items():
            ax.plot(np.arange(1, len(values) + 1), values, marker="o", ms=3, label=label)
        ax.set_xlabel("refinement step")
        ax.set_ylabel("value")
        ax.legend()
        return _save(fig, Path(path))


def overlay(mask, image: Optional[np.ndarray] = None, color=OVERLAY_COLOR, alpha: float = OVERLAY_ALPHA) -> np.ndarray:
    """Tint ``mask`` onto ``image``; without an image, the mask itself as 8-bit gray."""
    mask = as_binary(mask)
    if image is None:
        return mask.astype(np.uint8) * 255
    img = np.asarray(image)
    if img.ndim == 2:
        img = np.stack([img] * 3, axis=-1)
    img = img[..., :3].astype(np.uint8)
    if img.shape[:2] != mask.shape:
        raise ValueError(f"image {img.shape[:2]} and mask {mask.shape} differ in size")
    out = img.copy()
    tint = np.asarray(color, dtype=np.float64)
    blended = np.rint((1.0 - alpha) * img[mask].astype(np.float64) + alpha * tint)
    out[mask] = blended.astype(np.uint8)
    return out


def save_image(arr: np.ndarray, path: str | Path) -> None:
    mode = "L" if arr.ndim == 2 else "RGB"
    Image.fromarray(arr, mode=mode).save(path, format="PNG")

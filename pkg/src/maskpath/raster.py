"""Box-anchored rasterization of vector paths.

A path lives in a ``viewbox``-sized square (960 by default) that is mapped
affinely onto the predicted box, flattened to polygons and scan-filled at
pixel centres ``(j + 0.5, i + 0.5)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from maskpath.errors import DegenerateGeometry, EmptyMask, InvalidBox
from maskpath.masks import as_binary, resize_mask
from maskpath.path import CubicTo, LineTo, Subpath, VectorPath

VIEWBOX = 960.0
DEFAULT_TOLERANCE = 0.25
WORKING_SIZE = 378


@dataclass(frozen=True)
class NormalizedBox:
    """Box centre and extent as fractions of the image size."""

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidBox(f"non-finite box {vals}")
        if not (0.0 <= self.cx <= 1.0 and 0.0 <= self.cy <= 1.0):
            raise InvalidBox(f"box centre ({self.cx}, {self.cy}) outside [0, 1]")
        if not (0.0 < self.w <= 1.0 and 0.0 < self.h <= 1.0):
            raise InvalidBox(f"box size ({self.w}, {self.h}) outside (0, 1]")

    @classmethod
    def coerce(cls, value) -> "NormalizedBox":
        if isinstance(value, cls):
            return value
        try:
            cx, cy, w, h = (float(v) for v in value)
        except (TypeError, ValueError) as exc:
            raise InvalidBox(f"cannot read box from {value!r}") from exc
        return cls(cx, cy, w, h)

    def corners(self) -> tuple[float, float, float, float]:
        return (self.cx - self.w / 2, self.cy - self.h / 2, self.cx + self.w / 2, self.cy + self.h / 2)

    def to_list(self) -> list[float]:
        return [self.cx, self.cy, self.w, self.h]


@dataclass(frozen=True)
class PixelBox:
    """Half-open pixel rectangle ``[x0, x1) x [y0, y1)``."""

    x0: int
    y0: int
    x1: int
    y1: int

    def to_normalized(self, height: int, width: int) -> NormalizedBox:
        return NormalizedBox(
            (self.x0 + self.x1) / 2 / width,
            (self.y0 + self.y1) / 2 / height,
            (self.x1 - self.x0) / width,
            (self.y1 - self.y0) / height,
        )


def _segment_distance(p, a, b) -> float:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return math.hypot(p[0] - ax, p[1] - ay)
    t = min(1.0, max(0.0, ((p[0] - ax) * dx + (p[1] - ay) * dy) / denom))
    return math.hypot(p[0] - (ax + t * dx), p[1] - (ay + t * dy))


def _mid(a, b):
    return ((a[0] + b[0]) * 0.5, (a[1] + b[1]) * 0.5)


def flatten_cubic(c0, c1, c2, c3, tol: float = DEFAULT_TOLERANCE, max_depth: int = 24) -> np.ndarray:
    """Adaptive de Casteljau flattening of one cubic Bezier.

    A piece is accepted once both inner control points lie within ``tol`` of
    its chord segment; the curve stays inside the control hull, so every curve
    point is then within ``tol`` of the polyline. Returns an ``(n, 2)`` array;
    a fully degenerate cubic yields a single point.
    """
    if tol <= 0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    pts = [tuple(map(float, p)) for p in (c0, c1, c2, c3)]
    if pts[0] == pts[1] == pts[2] == pts[3]:
        return np.array([pts[0]])
    out = [pts[0]]
    stack = [(pts, 0)]
    while stack:
        (p0, p1, p2, p3), depth = stack.pop()
        flat = _segment_distance(p1, p0, p3) <= tol and _segment_distance(p2, p0, p3) <= tol
        if flat or depth >= max_depth:
            out.append(p3)
            continue
        p01, p12, p23 = _mid(p0, p1), _mid(p1, p2), _mid(p2, p3)
        p012, p123 = _mid(p01, p12), _mid(p12, p23)
        m = _mid(p012, p123)
        # right half pushed first so the left half is emitted first
        stack.append(((m, p123, p23, p3), depth + 1))
        stack.append(((p0, p01, p012, m), depth + 1))
    return np.array(out)


def map_path(box: NormalizedBox, path: VectorPath, height: int, width: int, viewbox: float = VIEWBOX) -> VectorPath:
    """Map path-space points onto pixel coordinates inside ``box``.

    ``(u, v)`` goes to ``((cx - w/2) + u/viewbox * w) * width`` and likewise
    for ``y``. The result has float coordinates.
    """
    box = NormalizedBox.coerce(box)
    x0 = box.cx - box.w / 2
    y0 = box.cy - box.h / 2

    def f(p):
        return ((x0 + (p[0] / viewbox) * box.w) * width, (y0 + (p[1] / viewbox) * box.h) * height)

    subpaths = []
    for sp in path.subpaths:
        segs = []
        for seg in sp.segments:
            if isinstance(seg, CubicTo):
                segs.append(CubicTo(f(seg.c1), f(seg.c2), f(seg.end)))
            else:
                segs.append(LineTo(f(seg.end)))
        subpaths.append(Subpath(f(sp.start), tuple(segs), sp.closed))
    return VectorPath(tuple(subpaths))


def path_polygons(mapped: VectorPath, tol: float = DEFAULT_TOLERANCE) -> list[np.ndarray]:
    """Flatten a mapped path into one vertex ring per subpath (closing edge implied)."""
    polys = []
    for sp in mapped.subpaths:
        ring = [np.array([sp.start], dtype=np.float64)]
        cur = sp.start
        for seg in sp.segments:
            if isinstance(seg, CubicTo):
                ring.append(flatten_cubic(cur, seg.c1, seg.c2, seg.end, tol)[1:])
            else:
                ring.append(np.array([seg.end], dtype=np.float64))
            cur = seg.end
        polys.append(np.concatenate([r.reshape(-1, 2) for r in ring]))
    return polys


def fill_polygons(polygons: Sequence[np.ndarray], height: int, width: int, rule: str = "nonzero") -> np.ndarray:
    """Scanline fill of closed polygons sampled at pixel centres.

    An edge crosses scanline ``y`` when ``min(y0, y1) <= y < max(y0, y1)``;
    a pixel is inside when the signed crossings strictly to its right sum to a
    nonzero value (``rule="nonzero"``) or are odd in number (``"evenodd"``).
    """
    if rule not in ("nonzero", "evenodd"):
        raise ValueError(f"unknown fill rule {rule!r}")
    mask = np.zeros((height, width), dtype=bool)
    edges = []
    for poly in polygons:
        poly = np.asarray(poly, dtype=np.float64).reshape(-1, 2)
        if len(poly) < 2:
            continue
        nxt = np.roll(poly, -1, axis=0)
        edges.append(np.hstack([poly, nxt]))
    if not edges:
        return mask
    e = np.vstack(edges)
    x0, y0, x1, y1 = e.T
    keep = y0 != y1
    x0, y0, x1, y1 = x0[keep], y0[keep], x1[keep], y1[keep]
    direction = np.where(y1 > y0, 1, -1)
    ylo = np.minimum(y0, y1)
    yhi = np.maximum(y0, y1)
    # rows whose centre i + 0.5 lies in [ylo, yhi)
    centres_y = np.arange(height) + 0.5
    r_start = np.searchsorted(centres_y, ylo, side="left")
    r_stop = np.searchsorted(centres_y, yhi, side="left")
    counts = np.maximum(r_stop - r_start, 0)
    if counts.sum() == 0:
        return mask
    idx = np.repeat(np.arange(len(counts)), counts)
    offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    rows = r_start[idx] + offsets
    ys = rows + 0.5
    xs = x0[idx] + (ys - y0[idx]) * (x1[idx] - x0[idx]) / (y1[idx] - y0[idx])
    dirs = direction[idx]

    order = np.lexsort((xs, rows))
    rows, xs, dirs = rows[order], xs[order], dirs[order]
    # every row's crossings sum to zero, so a global running sum resets per row
    if rule == "nonzero":
        inside = np.cumsum(dirs) != 0
    else:
        inside = np.cumsum(np.ones_like(dirs)) % 2 == 1
    starts = np.flatnonzero(inside[:-1])
    if starts.size == 0:
        return mask
    centres_x = np.arange(width) + 0.5
    col0 = np.searchsorted(centres_x, xs[starts], side="left")
    col1 = np.searchsorted(centres_x, xs[starts + 1], side="left")
    diff = np.zeros((height, width + 1), dtype=np.int64)
    np.add.at(diff, (rows[starts], col0), 1)
    np.add.at(diff, (rows[starts], col1), -1)
    return np.cumsum(diff, axis=1)[:, :width] > 0


def rasterize(
    box: NormalizedBox,
    path: VectorPath,
    height: int,
    width: int,
    tol: float = DEFAULT_TOLERANCE,
    rule: str = "nonzero",
    viewbox: float = VIEWBOX,
) -> np.ndarray:
    """Binary mask of ``path`` drawn inside ``box`` on a ``height x width`` image.

    Open subpaths are closed implicitly.
    """
    if height < 1 or width < 1:
        raise ValueError(f"image size must be positive, got {height}x{width}")
    polys = path_polygons(map_path(box, path, height, width, viewbox), tol)
    if sum(len(p) for p in polys) == 0:
        raise DegenerateGeometry("path has no vertices")
    return fill_polygons(polys, height, width, rule)


def coarse_mask(
    box: NormalizedBox,
    path: VectorPath,
    height: int,
    width: int,
    out_h: int = WORKING_SIZE,
    out_w: int = WORKING_SIZE,
    **kwargs,
) -> np.ndarray:
    """Rasterize at native resolution, then resize to the working resolution."""
    native = rasterize(box, path, height, width, **kwargs)
    return resize_mask(native.astype(np.float64), out_h, out_w)


def mask_pixel_box(mask) -> PixelBox:
    mask = as_binary(mask)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise EmptyMask("mask has no foreground pixels")
    return PixelBox(int(cols[0]), int(rows[0]), int(cols[-1]) + 1, int(rows[-1]) + 1)


def mask_to_box(mask) -> NormalizedBox:
    """Tight box around the foreground, as normalized centre and size."""
    mask = as_binary(mask)
    return mask_pixel_box(mask).to_normalized(*mask.shape)

"""Slow, obviously-correct reference implementations used only by the tests."""

from __future__ import annotations

import itertools
import math
from collections import deque

import numpy as np

from maskpath.path import CubicTo, LineTo, Subpath, VectorPath


def brute_distance_from_outside(mask: np.ndarray) -> np.ndarray:
    """All-pairs minimum over background pixels, with a one-pixel background frame."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask
    bg = np.argwhere(~padded)
    out = np.zeros((h, w))
    fg = np.argwhere(mask)
    if fg.size:
        fgp = fg + 1
        sq = ((fgp[:, None, :] - bg[None, :, :]) ** 2).sum(axis=2).min(axis=1)
        out[fg[:, 0], fg[:, 1]] = np.sqrt(sq.astype(np.float64))
    return out


def brute_band(mask: np.ndarray, eps: float) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    return mask & (brute_distance_from_outside(mask) <= eps)


def brute_distance_to_set(mask: np.ndarray) -> np.ndarray:
    """Distance from every pixel to the nearest foreground pixel."""
    fg = np.argwhere(mask)
    h, w = mask.shape
    grid = np.argwhere(np.ones((h, w), dtype=bool))
    sq = ((grid[:, None, :] - fg[None, :, :]) ** 2).sum(axis=2).min(axis=1)
    return np.sqrt(sq.astype(np.float64)).reshape(h, w)


def set_iou(a, b) -> float:
    a = {tuple(p) for p in np.argwhere(a)}
    b = {tuple(p) for p in np.argwhere(b)}
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def winding_number(polygons, px: float, py: float) -> int:
    """Crossing-rule winding number: signed edge crossings of the ray to +x."""
    wn = 0
    for poly in polygons:
        n = len(poly)
        for k in range(n):
            x0, y0 = poly[k]
            x1, y1 = poly[(k + 1) % n]
            if y0 <= py < y1:
                if x0 + (py - y0) * (x1 - x0) / (y1 - y0) > px:
                    wn += 1
            elif y1 <= py < y0:
                if x0 + (py - y0) * (x1 - x0) / (y1 - y0) > px:
                    wn -= 1
    return wn


def brute_fill(polygons, height: int, width: int, rule: str = "nonzero") -> np.ndarray:
    out = np.zeros((height, width), dtype=bool)
    for i in range(height):
        for j in range(width):
            wn = winding_number(polygons, j + 0.5, i + 0.5)
            out[i, j] = wn != 0 if rule == "nonzero" else crossing_parity(polygons, j + 0.5, i + 0.5) == 1
    return out


def crossing_parity(polygons, px, py) -> int:
    c = 0
    for poly in polygons:
        n = len(poly)
        for k in range(n):
            x0, y0 = poly[k]
            x1, y1 = poly[(k + 1) % n]
            if (y0 <= py < y1) or (y1 <= py < y0):
                if x0 + (py - y0) * (x1 - x0) / (y1 - y0) > px:
                    c += 1
    return c % 2


def components(mask: np.ndarray) -> int:
    """4-connected component count by BFS flood fill."""
    mask = np.asarray(mask, dtype=bool)
    seen = np.zeros_like(mask)
    h, w = mask.shape
    count = 0
    for i, j in np.argwhere(mask):
        if seen[i, j]:
            continue
        count += 1
        queue = deque([(i, j)])
        seen[i, j] = True
        while queue:
            a, b = queue.popleft()
            for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                na, nb = a + da, b + db
                if 0 <= na < h and 0 <= nb < w and mask[na, nb] and not seen[na, nb]:
                    seen[na, nb] = True
                    queue.append((na, nb))
    return count


def brute_assignment(a: np.ndarray, maximize: bool = True) -> list[tuple[int, int]]:
    n, m = a.shape
    sign = 1.0 if maximize else -1.0
    best, best_pairs = -math.inf, []
    if n <= m:
        for perm in itertools.permutations(range(m), n):
            v = sign * sum(a[i, perm[i]] for i in range(n))
            if v > best:
                best, best_pairs = v, [(i, perm[i]) for i in range(n)]
    else:
        for perm in itertools.permutations(range(n), m):
            v = sign * sum(a[perm[j], j] for j in range(m))
            if v > best:
                best, best_pairs = v, sorted((perm[j], j) for j in range(m))
    return best_pairs


def cubic_point(c0, c1, c2, c3, t):
    s = 1.0 - t
    return (
        s**3 * c0[0] + 3 * s * s * t * c1[0] + 3 * s * t * t * c2[0] + t**3 * c3[0],
        s**3 * c0[1] + 3 * s * s * t * c1[1] + 3 * s * t * t * c2[1] + t**3 * c3[1],
    )


def point_polyline_distance(p, poly: np.ndarray) -> float:
    a = poly[:-1]
    b = poly[1:]
    if len(poly) == 1:
        return float(math.hypot(p[0] - poly[0][0], p[1] - poly[0][1]))
    d = b - a
    denom = (d**2).sum(axis=1)
    t = np.where(denom > 0, ((np.asarray(p) - a) * d).sum(axis=1) / np.where(denom > 0, denom, 1), 0.0)
    t = np.clip(t, 0, 1)
    proj = a + t[:, None] * d
    return float(np.min(np.hypot(proj[:, 0] - p[0], proj[:, 1] - p[1])))


# ---------------------------------------------------------------------------
# generators


def random_point(rng, lo=-39, hi=999):
    return (int(rng.integers(lo, hi + 1)), int(rng.integers(lo, hi + 1)))


def random_path(rng, max_subpaths: int = 3, max_segments: int = 6) -> VectorPath:
    subs = []
    for _ in range(int(rng.integers(1, max_subpaths + 1))):
        segs = []
        for _ in range(int(rng.integers(0, max_segments + 1))):
            if rng.random() < 0.5:
                segs.append(LineTo(random_point(rng)))
            else:
                segs.append(CubicTo(random_point(rng), random_point(rng), random_point(rng)))
        subs.append(Subpath(random_point(rng), tuple(segs), bool(rng.random() < 0.8)))
    return VectorPath(tuple(subs))


def random_star_polygon(rng, max_vertices: int = 12, lo: float = 0.0, hi: float = 960.0, integer: bool = True):
    """Simple polygon: vertices at sorted angles around a centre with random radii."""
    n = int(rng.integers(3, max_vertices + 1))
    angles = np.sort(rng.uniform(0, 2 * np.pi, n))
    while np.min(np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))) < 1e-3:
        angles = np.sort(rng.uniform(0, 2 * np.pi, n))
    centre = rng.uniform(lo + 0.3 * (hi - lo), lo + 0.7 * (hi - lo), 2)
    radii = rng.uniform(0.05, 0.3, n) * (hi - lo)
    pts = centre + radii[:, None] * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    if integer:
        pts = np.rint(pts).astype(int)
    if rng.random() < 0.5:
        pts = pts[::-1]
    return [tuple(p) for p in pts.tolist()]


def winding_grid(polygons, height: int, width: int) -> np.ndarray:
    """Crossing-rule winding number at every pixel centre, one edge at a time."""
    py = (np.arange(height) + 0.5)[:, None]
    px = (np.arange(width) + 0.5)[None, :]
    wn = np.zeros((height, width), dtype=np.int64)
    for poly in polygons:
        n = len(poly)
        for k in range(n):
            x0, y0 = poly[k]
            x1, y1 = poly[(k + 1) % n]
            if y0 == y1:
                continue
            rows = (min(y0, y1) <= py) & (py < max(y0, y1))
            xc = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
            wn += np.where(rows & (xc > px), 1 if y1 > y0 else -1, 0)
    return wn


_PERMS: dict = {}


def brute_assignment_fast(a: np.ndarray, maximize: bool = True) -> list[tuple[int, int]]:
    """Exhaustive search over all injective maps of the shorter side, vectorized."""
    a = np.asarray(a, dtype=np.float64)
    t = a.shape[0] > a.shape[1]
    b = a.T if t else a
    n, m = b.shape
    if (n, m) not in _PERMS:
        _PERMS[(n, m)] = np.array(list(itertools.permutations(range(m), n)), dtype=np.int64).reshape(-1, n)
    perms = _PERMS[(n, m)]
    totals = b[np.arange(n), perms].sum(axis=1)
    best = perms[int(np.argmax(totals) if maximize else np.argmin(totals))]
    pairs = [(i, int(best[i])) for i in range(n)]
    return sorted((j, i) for i, j in pairs) if t else pairs

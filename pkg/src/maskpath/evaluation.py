"""Evaluation protocols: pooled cIoU / BIoU, Hungarian-matched LVIS mIoU, data filters."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Optional, Sequence

import numpy as np

from maskpath.errors import DataError, DimensionMismatch, EmptyDataset, ManifestError, NonFinite
from maskpath.masks import as_binary, boundary_band, load_mask
from maskpath.metrics import CIoUAccumulator, ConfusionCounts, boundary_eps, box_iou, iou

BIOU_FRAC = 0.05
BOX_IOU_MIN = 0.90
MASK_BOX_IOU_MIN = 0.92


# ---------------------------------------------------------------------------
# assignment


def _assign_rows(cost: np.ndarray) -> np.ndarray:
    """Shortest-augmenting-path Kuhn-Munkres for ``n <= m``; returns the column of each row."""
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)  # p[j]: row (1-based) matched to column j
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            reduced = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (reduced < minv[1:])
            minv[1:][better] = reduced[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    cols = np.empty(n, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j]:
            cols[p[j] - 1] = j - 1
    return cols


def hungarian(cost, maximize: bool = False) -> list[tuple[int, int]]:
    """Optimal one-to-one assignment of ``min(N, M)`` pairs, sorted by row.

    Minimizes total cost, or maximizes total value with ``maximize=True``.
    """
    a = np.asarray(cost, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"cost must be a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFinite("cost matrix has non-finite entries")
    if a.size == 0:
        return []
    if maximize:
        a = -a
    if a.shape[0] <= a.shape[1]:
        cols = _assign_rows(a)
        return [(i, int(c)) for i, c in enumerate(cols)]
    rows = _assign_rows(a.T)
    return sorted((int(r), j) for j, r in enumerate(rows))


# ---------------------------------------------------------------------------
# manifests


@dataclass
class EvalSample:
    image_id: Any
    size: tuple[int, int]
    gt: Any
    pred: Any
    expression: Optional[str] = None
    category: Optional[str] = None

    @classmethod
    def from_dict(cls, data: dict) -> "EvalSample":
        if not isinstance(data, dict):
            raise ManifestError(f"manifest entry must be an object, got {type(data).__name__}")
        missing = [k for k in ("image_id", "size", "gt", "pred") if k not in data]
        if missing:
            raise ManifestError(f"manifest entry {data.get('image_id')!r} lacks keys {missing}")
        try:
            h, w = (int(x) for x in data["size"])
        except (TypeError, ValueError) as exc:
            raise ManifestError(f"bad size for {data['image_id']!r}: {data['size']!r}") from exc
        return cls(data["image_id"], (h, w), data["gt"], data["pred"], data.get("expr"), data.get("category"))


def read_manifest(path: str | Path) -> list[EvalSample]:
    samples = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            samples.append(EvalSample.from_dict(json.loads(line)))
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
    return samples


def _tag(exc: DataError, sample_id) -> DataError:
    exc.sample_id = sample_id
    return exc


def _load_checked(ref, size, base_dir, sample_id) -> np.ndarray:
    try:
        mask = as_binary(load_mask(ref, base_dir))
    except DataError as exc:
        raise _tag(exc, sample_id)
    if mask.shape != tuple(size):
        raise _tag(DimensionMismatch(f"sample {sample_id!r}: mask {mask.shape} vs size {tuple(size)}"), sample_id)
    return mask


def _parallel_map(fn: Callable, items: Sequence, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# RefCOCO family


@dataclass
class SampleScore:
    image_id: Any
    intersection: int
    union: int
    band_intersection: int
    band_union: int

    @property
    def iou(self) -> float:
        return 1.0 if self.union == 0 else self.intersection / self.union

    @property
    def biou(self) -> float:
        return 1.0 if self.band_union == 0 else self.band_intersection / self.band_union


@dataclass
class RefcocoResult:
    ciou: float
    biou: float
    n: int
    samples: list[SampleScore] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {"ciou": self.ciou, "biou05": self.biou, "n": self.n}


def score_sample(pred, gt, eps_frac: float = BIOU_FRAC, image_id=None) -> SampleScore:
    pred, gt = as_binary(pred), as_binary(gt)
    c = ConfusionCounts.of(pred, gt)
    eps = boundary_eps(gt.shape, eps_frac)
    b = ConfusionCounts.of(boundary_band(pred, eps), boundary_band(gt, eps))
    return SampleScore(image_id, c.tp, c.tp + c.fp + c.fn, b.tp, b.tp + b.fp + b.fn)


def eval_refcoco(
    samples: Iterable[EvalSample],
    base_dir: str | Path | None = None,
    threads: int = 1,
    eps_frac: float = BIOU_FRAC,
) -> RefcocoResult:
    """Pooled cIoU and pooled boundary IoU (band width ``eps_frac`` of each image's diagonal)."""
    samples = list(samples)

    def one(s: EvalSample) -> SampleScore:
        gt = _load_checked(s.gt, s.size, base_dir, s.image_id)
        pred = _load_checked(s.pred, s.size, base_dir, s.image_id)
        return score_sample(pred, gt, eps_frac, s.image_id)

    scores = _parallel_map(one, samples, threads)
    mask_acc, band_acc = CIoUAccumulator(), CIoUAccumulator()
    for sc in scores:
        mask_acc = mask_acc.add_counts(sc.intersection, sc.union)
        band_acc = band_acc.add_counts(sc.band_intersection, sc.band_union)
    if not scores:
        raise EmptyDataset("manifest has no samples")
    # small images can have eps below one pixel, leaving every band empty;
    # that pools to 0/0 and scores 1 like an empty-vs-empty boundary_iou
    biou = band_acc.value() if band_acc.sum_union else 1.0
    return RefcocoResult(mask_acc.value(), biou, len(scores), scores)


# ---------------------------------------------------------------------------
# LVIS


@dataclass
class MatchResult:
    pairs: list[tuple[int, int, float]]
    unmatched_pred: list[int]
    unmatched_gt: list[int]


@dataclass
class LvisImageResult:
    match: MatchResult
    scores: list[float]
    image_id: Any = None


def iou_matrix(preds: Sequence, gts: Sequence) -> np.ndarray:
    out = np.zeros((len(preds), len(gts)))
    for i, p in enumerate(preds):
        for j, g in enumerate(gts):
            out[i, j] = iou(p, g)
    return out


def eval_lvis_image(preds: Sequence, gts: Sequence, image_id=None) -> LvisImageResult:
    """Hungarian-match predictions to ground truth on IoU; unmatched masks on either side score 0."""
    preds = [as_binary(p) for p in preds]
    gts = [as_binary(g) for g in gts]
    shapes = {m.shape for m in preds + gts}
    if len(shapes) > 1:
        raise DimensionMismatch(f"image {image_id!r}: masks have differing shapes {sorted(shapes)}")
    ious = iou_matrix(preds, gts)
    pairs = [(i, j, float(ious[i, j])) for i, j in hungarian(ious, maximize=True)] if ious.size else []
    used_p = {i for i, _, _ in pairs}
    used_g = {j for _, j, _ in pairs}
    match = MatchResult(
        pairs,
        [i for i in range(len(preds)) if i not in used_p],
        [j for j in range(len(gts)) if j not in used_g],
    )
    scores = [s for _, _, s in pairs] + [0.0] * (len(match.unmatched_pred) + len(match.unmatched_gt))
    return LvisImageResult(match, scores, image_id)


def eval_lvis(results: Iterable[LvisImageResult], aggregate: str = "global") -> float:
    """mIoU over per-mask scores.

    ``"global"`` averages every matched-slot score in the dataset;
    ``"per_image"`` averages per-image means instead.
    """
    results = list(results)
    if aggregate == "global":
        scores = [s for r in results for s in r.scores]
        if not scores:
            raise EmptyDataset("no LVIS scores to aggregate")
        return float(np.mean(scores))
    if aggregate == "per_image":
        means = [float(np.mean(r.scores)) for r in results if r.scores]
        if not means:
            raise EmptyDataset("no LVIS scores to aggregate")
        return float(np.mean(means))
    raise ValueError(f"unknown aggregation {aggregate!r}")


def _refs(value) -> list:
    if value is None:
        return []
    return list(value) if isinstance(value, list) else [value]


def eval_lvis_manifest(
    samples: Iterable[EvalSample], base_dir: str | Path | None = None, threads: int = 1
) -> list[LvisImageResult]:
    """Group manifest lines by image (first-seen order) and match each image."""
    grouped: dict[Any, list[EvalSample]] = {}
    for s in samples:
        grouped.setdefault(json.dumps(s.image_id, sort_keys=True), []).append(s)

    def one(group: list[EvalSample]) -> LvisImageResult:
        sid = group[0].image_id
        gts = [_load_checked(r, s.size, base_dir, sid) for s in group for r in _refs(s.gt)]
        preds = [_load_checked(r, s.size, base_dir, sid) for s in group for r in _refs(s.pred)]
        return eval_lvis_image(preds, gts, sid)

    return _parallel_map(one, list(grouped.values()), threads)


# ---------------------------------------------------------------------------
# data pipeline filters


@dataclass(frozen=True)
class FilterVerdict:
    stage: str
    passed: bool
    measured: float

    def to_dict(self) -> dict:
        return {"stage": self.stage, "passed": self.passed, "measured": self.measured}


def passes(measured: float, minimum: float) -> bool:
    """Threshold rule of the filters: only values strictly below ``minimum`` fail."""
    return not measured < minimum


def pipeline_filter(pred_boxes: Sequence, annotation_box, mask_box=None) -> list[FilterVerdict]:
    """Consistency filters for generated samples.

    MultiBox fails unless exactly one box was predicted (later stages are then
    skipped); BoxIoU90 compares it with the annotation; MaskBoxIoU92 compares
    the mask-derived box with the predicted one when given.
    """
    verdicts = [FilterVerdict("MultiBox", len(pred_boxes) == 1, float(len(pred_boxes)))]
    if len(pred_boxes) != 1:
        return verdicts
    pred = pred_boxes[0]
    measured = box_iou(pred, annotation_box)
    verdicts.append(FilterVerdict("BoxIoU90", passes(measured, BOX_IOU_MIN), measured))
    if mask_box is not None:
        measured = box_iou(mask_box, pred)
        verdicts.append(FilterVerdict("MaskBoxIoU92", passes(measured, MASK_BOX_IOU_MIN), measured))
    return verdicts

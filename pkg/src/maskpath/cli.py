"""``maskpath`` command line entry point.

Every subcommand prints one JSON document on stdout. Failures print
``{"error": <code>, "detail": <message>}`` and exit with 2 (manifest or input
file format), 3 (data error) or 64 (usage / config).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from PIL import Image

from maskpath import __version__
from maskpath.config import ToolConfig, load_config
from maskpath.errors import ConfigError, DataError, ManifestError, MaskpathError
from maskpath.evaluation import eval_lvis, eval_lvis_manifest, eval_refcoco, pipeline_filter, read_manifest
from maskpath.masks import load_mask, mask_to_rle, resize_mask, threshold, write_png
from maskpath.metrics import boundary_iou, iou, soft_iou, tversky
from maskpath.path import PathError, parse_text, path_len, serialize_d
from maskpath.plotting import overlay, refine_curve, save_image, score_histogram, write_table
from maskpath.raster import NormalizedBox, rasterize
from maskpath.refine import OracleRefiner, refine
from maskpath.region import BinConfig, decode_box, dequantize_coord, dequantize_size, encode_box
from maskpath.reward import RewardConfig, Rollout, group_reward

EXIT_OK = 0
EXIT_MANIFEST = 2
EXIT_DATA = 3
EXIT_USAGE = 64

class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _floats(text: str, n: Optional[int] = None) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise UsageError(f"expected {n} values, got {text!r}")
    return vals


def _ints(text: str, n: int) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from exc
    if len(vals) != n:
        raise UsageError(f"expected {n} values, got {text!r}")
    return vals


def _size(text: str) -> tuple[int, int]:
    try:
        h, w = (int(v) for v in text.lower().split("x"))
    except ValueError as exc:
        raise UsageError(f"size must look like HxW, got {text!r}") from exc
    if h < 1 or w < 1:
        raise UsageError(f"size must be positive, got {text!r}")
    return h, w


def _box(text: str) -> NormalizedBox:
    return NormalizedBox.coerce(_floats(text, 4))


# ---------------------------------------------------------------------------
# subcommands


def cmd_parse(args, cfg: ToolConfig) -> dict:
    path = parse_text(args.path, l_max=args.l_max)
    return {
        "d": serialize_d(path),
        "tokens": path_len(path),
        "subpaths": len(path.subpaths),
        "closed": [sp.closed for sp in path.subpaths],
    }


def cmd_rasterize(args, cfg: ToolConfig) -> dict:
    h, w = _size(args.size)
    path = parse_text(args.path)
    mask = rasterize(_box(args.box), path, h, w, tol=cfg.raster_tolerance, rule=args.rule)
    out = {"size": [h, w], "area": int(mask.sum()), "auto_closed": path.has_open_subpath}
    if args.out == "png":
        if not args.output:
            raise UsageError("--out png needs --output FILE")
        write_png(mask, args.output)
        out["output"] = str(args.output)
    else:
        rle = mask_to_rle(mask, compressed=args.compressed)
        if args.output:
            Path(args.output).write_text(json.dumps(rle))
            out["output"] = str(args.output)
        else:
            out["rle"] = rle
    return out


def cmd_region(args, cfg: ToolConfig) -> dict:
    bins = BinConfig(args.bins)
    if args.action == "decode":
        if args.coords is None and args.sizes is None:
            raise UsageError("region decode needs --coords and/or --size")
        out = {}
        if args.coords is not None:
            out["coords"] = [dequantize_coord(v, bins) for v in _ints(args.coords, 2)]
        if args.sizes is not None:
            out["sizes"] = [dequantize_size(v, bins) for v in _ints(args.sizes, 2)]
        if args.coords is not None and args.sizes is not None:
            out["box"] = decode_box(_ints(args.coords, 2), _ints(args.sizes, 2), bins).to_list()
        return out
    if args.box is None:
        raise UsageError("region quantize needs --box")
    coords, sizes = encode_box(_box(args.box), bins)
    return {"coord_bins": list(coords), "size_bins": list(sizes)}


def _metric(pred_ref, gt_ref, metric: str) -> dict:
    gt = load_mask(gt_ref)
    if metric == "iou":
        return {"iou": iou(load_mask(pred_ref), gt)}
    if metric == "softiou":
        return {"softiou": soft_iou(load_mask(pred_ref, soft=True), gt)}
    if metric.startswith("biou@"):
        frac = _floats(metric[5:], 1)[0]
        return {metric: boundary_iou(load_mask(pred_ref), gt, frac)}
    if metric.startswith("tversky:"):
        a, b = _floats(metric[8:], 2)
        return {"tversky": tversky(load_mask(pred_ref), gt, a, b)}
    raise UsageError(f"unknown metric {metric!r}")


def cmd_score(args, cfg: ToolConfig) -> dict:
    return _metric(args.pred, args.gt, args.metric)


def _read_rollouts(path: str) -> list[Rollout]:
    rollouts = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ManifestError(f"cannot read rollouts {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            data = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ManifestError(f"{path}:{lineno}: rollout must be an object")
        rollouts.append(Rollout.from_dict(data))
    return rollouts


def cmd_reward(args, cfg: ToolConfig) -> dict:
    rcfg = cfg.reward
    if args.reward_config:
        try:
            rcfg = RewardConfig.from_dict(json.loads(Path(args.reward_config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load reward config: {exc}") from exc
    gt = load_mask(args.gt)
    report = group_reward(_read_rollouts(args.group), gt, gt.shape, rcfg)
    out = report.to_dict()
    out["config"] = rcfg.to_dict()
    return out


def _to_working(mask: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    return resize_mask(mask.astype(np.float64), *size)


def cmd_refine(args, cfg: ToolConfig) -> dict:
    steps = args.steps if args.steps is not None else cfg.refine_steps
    size = cfg.working_resolution
    initial_native = load_mask(args.initial, soft=True)
    initial = _to_working(initial_native, size)
    target = threshold(_to_working(load_mask(args.oracle_target), size), 0.5)
    refiner = OracleRefiner(target, blend=args.blend, hypotheses=args.hypotheses)
    final, trace = refine(refiner, initial, steps=steps)
    per_step = [soft_iou(st.mask, target) for st in trace.steps]
    out = {
        "steps": steps,
        "calls": refiner.calls,
        "soft_iou_initial": soft_iou(initial, target),
        "soft_iou_per_step": per_step,
        "trace": trace.to_dict(),
        "config": cfg.to_dict(),
    }
    if args.output:
        native = resize_mask(final, *initial_native.shape)
        write_png(native, args.output)
        out["output"] = str(args.output)
    if args.report:
        report = Path(args.report)
        report.mkdir(parents=True, exist_ok=True)
        rows = [
            {"step": i + 1, "selected": st.selected, "best_score": float(st.scores[st.selected]), "soft_iou": s}
            for i, (st, s) in enumerate(zip(trace.steps, per_step))
        ]
        write_table(rows, report / "refine_steps.csv")
        refine_curve({"soft IoU": per_step, "best score": [r["best_score"] for r in rows]}, report / "refine_steps.png")
        out["report"] = str(report)
    return out


def _manifest_base(path: str) -> Path:
    return Path(path).resolve().parent


def cmd_eval_refcoco(args, cfg: ToolConfig) -> dict:
    samples = read_manifest(args.manifest)
    result = eval_refcoco(samples, base_dir=_manifest_base(args.manifest), threads=cfg.threads)
    if args.report:
        report = Path(args.report)
        report.mkdir(parents=True, exist_ok=True)
        rows = [
            {
                "image_id": s.image_id,
                "intersection": s.intersection,
                "union": s.union,
                "iou": s.iou,
                "band_intersection": s.band_intersection,
                "band_union": s.band_union,
                "biou": s.biou,
            }
            for s in result.samples
        ]
        write_table(rows, report / "per_sample.csv")
        score_histogram(
            {"IoU": [s.iou for s in result.samples], "BIoU@0.05": [s.biou for s in result.samples]},
            report / "score_hist.png",
            title=f"cIoU {result.ciou:.4f}  BIoU@0.05 {result.biou:.4f}",
        )
    return result.to_dict()


def cmd_eval_lvis(args, cfg: ToolConfig) -> dict:
    samples = read_manifest(args.manifest)
    results = eval_lvis_manifest(samples, base_dir=_manifest_base(args.manifest), threads=cfg.threads)
    miou = eval_lvis(results, aggregate=args.aggregate)
    if args.report:
        report = Path(args.report)
        report.mkdir(parents=True, exist_ok=True)
        rows = [
            {
                "image_id": r.image_id,
                "pairs": len(r.match.pairs),
                "unmatched_pred": len(r.match.unmatched_pred),
                "unmatched_gt": len(r.match.unmatched_gt),
                "mean_score": float(np.mean(r.scores)) if r.scores else None,
            }
            for r in results
        ]
        write_table(rows, report / "per_image.csv")
        score_histogram({"mask score": [s for r in results for s in r.scores]}, report / "score_hist.png",
                        title=f"mIoU {miou:.4f}")
    return {"miou": miou, "masks": sum(len(r.scores) for r in results), "images": len(results)}


def cmd_filter(args, cfg: ToolConfig) -> dict:
    boxes = [_box(b) for b in args.pred_boxes.split(";") if b.strip()] if args.pred_boxes else []
    mask_box = _box(args.mask_box) if args.mask_box else None
    verdicts = pipeline_filter(boxes, _box(args.ann_box), mask_box)
    return {"passed": all(v.passed for v in verdicts), "verdicts": [v.to_dict() for v in verdicts]}


def cmd_overlay(args, cfg: ToolConfig) -> dict:
    mask = load_mask(args.mask)
    image = None
    if args.image:
        try:
            with Image.open(args.image) as img:
                image = np.asarray(img.convert("RGB"))
        except OSError as exc:
            raise DataError(f"cannot read image {args.image}: {exc}") from exc
    color = tuple(int(v) for v in _floats(args.color, 3))
    try:
        arr = overlay(mask, image, color=color, alpha=args.alpha)
        save_image(arr, args.out)
    except (OSError, ValueError) as exc:
        raise DataError(str(exc)) from exc
    return {"output": str(args.out), "area": int(mask.sum())}


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    # global flags are accepted before or after the subcommand
    # the actions are shared by every parser, so their SUPPRESS defaults must
    # not be overridden with set_defaults; run() supplies the fallbacks
    common = _Parser(add_help=False)
    common.add_argument("--tool-config", dest="tool_config", default=argparse.SUPPRESS, help="tool config JSON")
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS, help="worker threads for evaluation")
    common.add_argument("--pretty", action="store_true", default=argparse.SUPPRESS, help="indent JSON output")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="seed recorded in the effective config")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = _Parser(prog="maskpath", description="Vector-path mask toolkit", parents=[common])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", dest="tool_config", default=argparse.SUPPRESS, help="tool config JSON")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add = sub.add_parser

    def add_parser(name, **kw):
        return _add(name, parents=[common], **kw)

    sub.add_parser = add_parser

    s = sub.add_parser("parse", help="validate a path and print its canonical form")
    s.add_argument("--path", required=True)
    s.add_argument("--l-max", type=int, default=1024)
    s.set_defaults(func=cmd_parse)

    s = sub.add_parser("rasterize", help="rasterize a path inside a box")
    s.add_argument("--box", required=True, help="cx,cy,w,h")
    s.add_argument("--path", required=True)
    s.add_argument("--size", required=True, help="HxW")
    s.add_argument("--out", choices=["png", "rle"], default="rle")
    s.add_argument("--output")
    s.add_argument("--compressed", action="store_true", help="compressed COCO RLE string")
    s.add_argument("--rule", choices=["nonzero", "evenodd"], default="nonzero")
    s.set_defaults(func=cmd_rasterize)

    s = sub.add_parser("region", help="region bin codecs")
    s.add_argument("action", choices=["decode", "quantize"])
    s.add_argument("--coords", help="v_cx,v_cy")
    s.add_argument("--size", dest="sizes", help="v_w,v_h")
    s.add_argument("--box", help="cx,cy,w,h")
    s.add_argument("--bins", type=int, default=1024)
    s.set_defaults(func=cmd_region)

    s = sub.add_parser("score", help="compare two masks")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--metric", default="iou", help="iou | biou@F | tversky:a,b | softiou")
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("reward", help="piecewise group reward")
    s.add_argument("--group", required=True, help="rollouts JSONL")
    s.add_argument("--gt", required=True)
    s.add_argument("--config", dest="reward_config", help="reward config JSON")
    s.set_defaults(func=cmd_reward)

    s = sub.add_parser("refine", help="run the refinement loop with the blend oracle")
    s.add_argument("--initial", required=True)
    s.add_argument("--oracle-target", required=True)
    s.add_argument("--blend", type=float, default=0.5)
    s.add_argument("--steps", type=int)
    s.add_argument("--hypotheses", type=int, default=3)
    s.add_argument("--output", help="final mask PNG at native resolution")
    s.add_argument("--report", help="directory for per-step CSV and figure")
    s.set_defaults(func=cmd_refine)

    s = sub.add_parser("eval-refcoco", help="pooled cIoU and BIoU@0.05")
    s.add_argument("--manifest", required=True)
    s.add_argument("--report", help="directory for per-sample CSV and figure")
    s.set_defaults(func=cmd_eval_refcoco)

    s = sub.add_parser("eval-lvis", help="Hungarian-matched mIoU")
    s.add_argument("--manifest", required=True)
    s.add_argument("--aggregate", choices=["global", "per_image"], default="global")
    s.add_argument("--report", help="directory for per-image CSV and figure")
    s.set_defaults(func=cmd_eval_lvis)

    s = sub.add_parser("filter", help="data-pipeline consistency filters")
    s.add_argument("--pred-boxes", default="", help="boxes separated by ';'")
    s.add_argument("--ann-box", required=True)
    s.add_argument("--mask-box")
    s.set_defaults(func=cmd_filter)

    s = sub.add_parser("overlay", help="write a mask overlay PNG")
    s.add_argument("--mask", required=True)
    s.add_argument("--image")
    s.add_argument("--out", required=True)
    s.add_argument("--color", default="255,64,32")
    s.add_argument("--alpha", type=float, default=0.5)
    s.set_defaults(func=cmd_overlay)
    return p


def _emit(obj: dict, pretty: bool, stream=None) -> None:
    stream = stream or sys.stdout
    if pretty:
        text = json.dumps(obj, indent=2)
    else:
        text = json.dumps(obj, separators=(",", ":"))
    stream.write(text + "\n")


def run(argv: Optional[Sequence[str]] = None) -> int:
    pretty = False
    try:
        args = build_parser().parse_args(argv)
        pretty = getattr(args, "pretty", False)
        verbose = getattr(args, "verbose", False)
        logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, stream=sys.stderr)
        cfg = load_config(getattr(args, "tool_config", None))
        overrides = {}
        for key in ("threads", "seed"):
            if getattr(args, key, None) is not None:
                overrides[key] = getattr(args, key)
        if overrides:
            cfg = cfg.replace(**overrides)
        result = args.func(args, cfg)
    except UsageError as exc:
        _emit({"error": "UsageError", "detail": str(exc)}, pretty)
        return EXIT_USAGE
    except ConfigError as exc:
        _emit({"error": exc.code, "detail": str(exc)}, pretty)
        return EXIT_USAGE
    except ManifestError as exc:
        _emit({"error": exc.code, "detail": str(exc)}, pretty)
        return EXIT_MANIFEST
    except (PathError, DataError, MaskpathError) as exc:
        err = {"error": exc.code, "detail": str(exc)}
        sample_id = getattr(exc, "sample_id", None)
        if sample_id is not None:
            err["sample_id"] = sample_id
            print(f"first failing sample: {sample_id}", file=sys.stderr)
        _emit(err, pretty)
        return EXIT_DATA
    _emit(result, pretty)
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

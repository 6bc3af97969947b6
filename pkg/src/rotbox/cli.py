"""Command-line front door: every operator over the declared file formats.

One binary with subcommands; every subcommand is a thin wrapper around a
library call. Parameters come from flags, optionally defaulted from a
JSON config file (--config), flags winning. Output files are written
atomically (write to a sibling temp file, then rename). Text output
carries floats at 6 significant digits; only binary tensors keep full
precision.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys

import numpy as np

from . import _kernels, anchors as anchors_mod, bench as bench_mod
from . import harness as harness_mod
from . import patch as patch_mod
from . import proposals as proposals_mod
from . import rbox as rbox_mod
from . import rroi as rroi_mod

DELTA_KEYS = ("dx", "dy", "dw", "dh", "dt")


def _f6(x: float) -> float:
    return float(f"{float(x):.6g}")


@contextlib.contextmanager
def _atomic_output(path):
    """Yield a temp path that is renamed onto `path` on success and
    removed on failure."""
    tmp = f"{path}.tmp.{os.getpid()}"
    try:
        yield tmp
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


def _write_text(path, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    with _atomic_output(path) as tmp:
        with open(tmp, "w", encoding="utf-8") as f:
            f.write(text)


def _indexed_path(path: str, i: int, total: int) -> str:
    if total == 1:
        return path
    root, ext = os.path.splitext(path)
    return f"{root}.{i:03d}{ext}"


def _read_records(path):
    try:
        return rbox_mod.read_box_jsonl(path)
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from e


def _scored(records, default_score: float = 1.0):
    return [proposals_mod.ScoredBox(box, default_score if score is None else score,
                                    0 if class_id is None else class_id)
            for box, score, class_id in records]


# --- subcommand handlers ------------------------------------------------------


def _cmd_iou(args, cfg):
    boxes_a = [r[0] for r in _read_records(args.boxes_a)]
    boxes_b = [r[0] for r in _read_records(args.boxes_b)]
    if not boxes_a or not boxes_b:
        raise ValueError("iou needs at least one box on each side")
    from .geom import rotated_iou_matrix

    matrix = rotated_iou_matrix(boxes_a, boxes_b)
    lines = [",".join(f"{v:.6g}" for v in row) for row in matrix]
    _write_text(args.output, "\n".join(lines) + "\n")
    return 0


def _cmd_nms(args, cfg):
    thr = _resolve(args, cfg, "iou_threshold", 0.5)
    angle_gate = _resolve(args, cfg, "angle_gate", None)
    records = _read_records(args.boxes)
    scored = _scored(records)
    keep = proposals_mod.rotated_nms(scored, thr, angle_gate)
    _write_text(args.output, rbox_mod.boxes_to_jsonl(records[k] for k in keep))
    return 0


def _cmd_propose(args, cfg):
    anchor_rows = []
    scores = []
    deltas = []
    with open(args.records, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                box, _, _ = rbox_mod.box_from_obj(obj)
                scores.append(float(obj["score"]))
                deltas.append([float(obj[k]) for k in DELTA_KEYS])
            except (ValueError, KeyError, TypeError) as e:
                raise ValueError(f"{args.records}: line {lineno}: bad proposal "
                                 f"record ({e})") from e
            anchor_rows.append([box.cx, box.cy, box.w, box.h, box.theta])
    out = proposals_mod.generate_proposals(
        np.asarray(scores), np.asarray(deltas), np.asarray(anchor_rows),
        pre_nms_topk=_resolve(args, cfg, "pre_nms_topk", 2000),
        post_nms_topk=_resolve(args, cfg, "post_nms_topk", 1000),
        nms_threshold=_resolve(args, cfg, "nms_threshold", 0.7),
        min_size=_resolve(args, cfg, "min_size", 0.0))
    _write_text(args.output,
                rbox_mod.boxes_to_jsonl((sb.box, sb.score, None) for sb in out))
    return 0


def _cmd_anchors(args, cfg):
    if args.spec is not None:
        with open(args.spec, "r", encoding="utf-8") as f:
            spec = anchors_mod.AnchorSpec.from_json(f.read())
    else:
        spec = anchors_mod.AnchorSpec()  # the shipped default profile
    width = _resolve(args, cfg, "width", 1)
    height = _resolve(args, cfg, "height", 1)
    grid = anchors_mod.grid_anchors(spec, width, height)
    _write_text(args.output, rbox_mod.boxes_to_jsonl(grid))
    return 0


def _cmd_roialign(args, cfg):
    tensor = rroi_mod.read_rten(args.tensor)
    boxes = [r[0] for r in _read_records(args.boxes)]
    if not boxes:
        raise ValueError("roialign needs at least one box")
    cfg_align = rroi_mod.RoiAlignConfig(
        pooled_h=_resolve(args, cfg, "pooled_h", 7),
        pooled_w=_resolve(args, cfg, "pooled_w", 7),
        spatial_scale=_resolve(args, cfg, "spatial_scale", 1.0 / 16.0),
        sampling_ratio=_resolve(args, cfg, "sampling_ratio", 2))
    pooled = rroi_mod.rroi_align_batch(tensor, boxes, cfg_align)
    for i in range(len(boxes)):
        out_path = _indexed_path(args.output, i, len(boxes))
        with _atomic_output(out_path) as tmp:
            rroi_mod.write_rten(tmp, rroi_mod.Tensor(pooled[i]))
    return 0


def _cmd_extract_patch(args, cfg):
    img = patch_mod.read_netpbm(args.image)
    boxes = [r[0] for r in _read_records(args.boxes)]
    if not boxes:
        raise ValueError("extract-patch needs at least one box")
    for i, box in enumerate(boxes):
        out = patch_mod.extract_patch(img, box)
        out_path = _indexed_path(args.output, i, len(boxes))
        with _atomic_output(out_path) as tmp:
            patch_mod.write_netpbm(tmp, out)
    return 0


def _cmd_synth(args, cfg):
    with open(args.spec, "r", encoding="utf-8") as f:
        spec = harness_mod.SceneSpec.from_json(f.read())
    img, boxes = harness_mod.synth_scene(spec)
    with _atomic_output(args.output) as tmp:
        patch_mod.write_netpbm(tmp, img)
    sidecar = args.boxes_out or os.path.splitext(args.output)[0] + ".jsonl"
    _write_text(sidecar, rbox_mod.boxes_to_jsonl(boxes))
    return 0


def _cmd_augment(args, cfg):
    img = patch_mod.read_netpbm(args.image)
    boxes = [r[0] for r in _read_records(args.boxes)]
    out_img, out_boxes = harness_mod.augment_rotate(img, boxes, args.angle)
    with _atomic_output(args.output) as tmp:
        patch_mod.write_netpbm(tmp, out_img)
    sidecar = args.boxes_out or os.path.splitext(args.output)[0] + ".jsonl"
    _write_text(sidecar, rbox_mod.boxes_to_jsonl(out_boxes))
    return 0


def _cmd_eval(args, cfg):
    preds = _scored(_read_records(args.predictions))
    gts = [r[0] for r in _read_records(args.ground_truth)]
    result = harness_mod.eval_detections(
        preds, gts,
        iou_threshold=_resolve(args, cfg, "iou_threshold", 0.5),
        angle_threshold=_resolve(args, cfg, "angle_threshold", 30.0))
    obj = {"true_positives": result.true_positives,
           "false_positives": result.false_positives,
           "false_negatives": result.false_negatives,
           "precision": _f6(result.precision),
           "recall": _f6(result.recall),
           "f1": _f6(result.f1)}
    _write_text(args.output, json.dumps(obj) + "\n")
    return 0


def _cmd_bench(args, cfg):
    ops = bench_mod.DEFAULT_OPS if args.op == "all" else (args.op,)
    if args.backend == "both":
        backends = _kernels.available_backends()
    elif args.backend == "auto":
        backends = [_kernels.BACKEND]
    else:
        backends = [args.backend]
    sizes = {}
    if args.iou_pairs is not None:
        sizes["iou"] = args.iou_pairs
    if args.nms_boxes is not None:
        sizes["nms"] = args.nms_boxes
    if args.rois is not None:
        sizes["roialign"] = args.rois
    report = bench_mod.run_benchmarks(ops=ops, backends=backends,
                                      repeat=_resolve(args, cfg, "repeat", 3),
                                      sizes=sizes)
    sys.stdout.write(bench_mod.format_report(report))
    if args.output:
        for row in report["results"]:
            row["seconds"] = _f6(row["seconds"])
            row["items_per_s"] = _f6(row["items_per_s"])
        _write_text(args.output, json.dumps(report, indent=2) + "\n")
    return 0


# --- parser -------------------------------------------------------------------


def _resolve(args, cfg: dict, key: str, default):
    """Flag value if given, else config-file value, else the default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    if key in cfg:
        return cfg[key]
    return default


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="rotbox",
        description="Rotated-box detection geometry toolbox")
    p.add_argument("--config", help="JSON file with default parameter values "
                                    "(explicit flags win)")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("iou", help="pairwise IoU matrix of two box files (CSV)")
    sp.add_argument("boxes_a")
    sp.add_argument("boxes_b")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=_cmd_iou)

    sp = sub.add_parser("nms", help="rotated non-maximum suppression")
    sp.add_argument("boxes")
    sp.add_argument("--iou-threshold", type=float, dest="iou_threshold")
    sp.add_argument("--angle-gate", type=float, dest="angle_gate",
                    help="suppress only within this angular distance (degrees)")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=_cmd_nms)

    sp = sub.add_parser("propose", help="generate proposals from anchor records "
                                        "carrying score and dx,dy,dw,dh,dt")
    sp.add_argument("records")
    sp.add_argument("--pre-nms-topk", type=int, dest="pre_nms_topk")
    sp.add_argument("--post-nms-topk", type=int, dest="post_nms_topk")
    sp.add_argument("--nms-threshold", type=float, dest="nms_threshold")
    sp.add_argument("--min-size", type=float, dest="min_size")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=_cmd_propose)

    sp = sub.add_parser("anchors", help="dump grid anchors for an anchor spec "
                                        "(default: the shipped profile)")
    sp.add_argument("--spec", help="anchor spec JSON file")
    sp.add_argument("--width", type=int, help="feature grid width in cells")
    sp.add_argument("--height", type=int, help="feature grid height in cells")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=_cmd_anchors)

    sp = sub.add_parser("roialign", help="rotated RoI align over an RTEN tensor")
    sp.add_argument("tensor")
    sp.add_argument("boxes")
    sp.add_argument("--pooled-h", type=int, dest="pooled_h")
    sp.add_argument("--pooled-w", type=int, dest="pooled_w")
    sp.add_argument("--spatial-scale", type=float, dest="spatial_scale")
    sp.add_argument("--sampling-ratio", type=int, dest="sampling_ratio")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=_cmd_roialign)

    sp = sub.add_parser("extract-patch", help="upright patches for rotated boxes")
    sp.add_argument("image", help="PGM/PPM input image")
    sp.add_argument("boxes")
    sp.add_argument("-o", "--output", required=True)
    sp.set_defaults(func=_cmd_extract_patch)

    sp = sub.add_parser("synth", help="render a synthetic scene from a spec")
    sp.add_argument("spec", help="scene spec JSON file")
    sp.add_argument("-o", "--output", required=True, help="output PGM path")
    sp.add_argument("--boxes-out", dest="boxes_out",
                    help="ground-truth JSONL path (default: alongside the image)")
    sp.set_defaults(func=_cmd_synth)

    sp = sub.add_parser("augment", help="rotate an image and its boxes")
    sp.add_argument("image")
    sp.add_argument("boxes")
    sp.add_argument("--angle", type=float, required=True)
    sp.add_argument("-o", "--output", required=True)
    sp.add_argument("--boxes-out", dest="boxes_out")
    sp.set_defaults(func=_cmd_augment)

    sp = sub.add_parser("eval", help="match predictions against ground truth")
    sp.add_argument("predictions")
    sp.add_argument("ground_truth")
    sp.add_argument("--iou-threshold", type=float, dest="iou_threshold")
    sp.add_argument("--angle-threshold", type=float, dest="angle_threshold")
    sp.add_argument("-o", "--output")
    sp.set_defaults(func=_cmd_eval)

    sp = sub.add_parser("bench", help="time the hot kernels (rotated vs "
                                      "axis-aligned, per backend)")
    sp.add_argument("--op", choices=("all",) + bench_mod.DEFAULT_OPS, default="all")
    sp.add_argument("--backend",
                    choices=("auto", "both") + _kernels.BACKENDS, default="auto")
    sp.add_argument("--repeat", type=int)
    sp.add_argument("--iou-pairs", type=int, dest="iou_pairs")
    sp.add_argument("--nms-boxes", type=int, dest="nms_boxes")
    sp.add_argument("--rois", type=int)
    sp.add_argument("-o", "--output", help="also write a JSON report")
    sp.set_defaults(func=_cmd_bench)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _kernels.max_threads()  # validate ROTBOX_THREADS early
        cfg = {}
        if args.config:
            with open(args.config, "r", encoding="utf-8") as f:
                cfg = json.load(f)
            if not isinstance(cfg, dict):
                raise ValueError(f"{args.config}: config must be a JSON object")
        return args.func(args, cfg)
    except FileNotFoundError as e:
        print(f"error: missing file: {e.filename}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as e:
        print(f"error: invalid JSON: {e}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

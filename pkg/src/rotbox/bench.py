"""Micro-benchmarks for the hot kernels.

Each operator is timed in its rotated form and its axis-aligned
counterpart, on every available kernel backend, to document two
comparisons: compiled extension vs pure-Python fallback, and the
rotated-vs-axis-aligned operator cost at equal workload (the production
claim being that supporting rotation does not slow inference down).
Numbers are reported, not gated.
"""

from __future__ import annotations

import time

import numpy as np

from . import _kernels

DEFAULT_OPS = ("iou", "nms", "roialign")


def _random_boxes(rng: np.random.Generator, n: int, span: float = 512.0,
                  lo: float = 4.0, hi: float = 64.0) -> np.ndarray:
    return np.column_stack([
        rng.uniform(0.0, span, n), rng.uniform(0.0, span, n),
        rng.uniform(lo, hi, n), rng.uniform(lo, hi, n),
        rng.uniform(-180.0, 180.0, n),
    ])


def _bounding_rects(boxes: np.ndarray) -> np.ndarray:
    t = np.radians(boxes[:, 4])
    rx = 0.5 * boxes[:, 2] * np.abs(np.cos(t)) + 0.5 * boxes[:, 3] * np.abs(np.sin(t))
    ry = 0.5 * boxes[:, 2] * np.abs(np.sin(t)) + 0.5 * boxes[:, 3] * np.abs(np.cos(t))
    return np.column_stack([boxes[:, 0] - rx, boxes[:, 1] - ry,
                            boxes[:, 0] + rx, boxes[:, 1] + ry])


def _time_best(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_iou(impl, n_pairs: int = 20000, repeat: int = 3, seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    a = _random_boxes(rng, n_pairs)
    b = _random_boxes(rng, n_pairs)
    # Keep pairs near each other so the clip path actually runs.
    b[:, 0] = a[:, 0] + rng.uniform(-30.0, 30.0, n_pairs)
    b[:, 1] = a[:, 1] + rng.uniform(-30.0, 30.0, n_pairs)
    ra, rb = _bounding_rects(a), _bounding_rects(b)
    t_rot = _time_best(lambda: impl.iou_pairs(a, b), repeat)
    t_ax = _time_best(lambda: impl.iou_pairs_aabb(ra, rb), repeat)
    return [
        {"op": "iou", "variant": "rotated", "n": n_pairs,
         "seconds": t_rot, "items_per_s": n_pairs / t_rot, "unit": "pairs/s"},
        {"op": "iou", "variant": "axis_aligned", "n": n_pairs,
         "seconds": t_ax, "items_per_s": n_pairs / t_ax, "unit": "pairs/s"},
    ]


def bench_nms(impl, n_boxes: int = 1000, iou_threshold: float = 0.5,
              repeat: int = 3, seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    boxes = _random_boxes(rng, n_boxes, span=256.0)
    scores = rng.uniform(0.0, 1.0, n_boxes)
    rects = _bounding_rects(boxes)
    t_rot = _time_best(lambda: impl.nms_rotated(boxes, scores, iou_threshold), repeat)
    t_ax = _time_best(lambda: impl.nms_aabb(rects, scores, iou_threshold), repeat)
    return [
        {"op": "nms", "variant": "rotated", "n": n_boxes,
         "seconds": t_rot, "items_per_s": n_boxes / t_rot, "unit": "boxes/s"},
        {"op": "nms", "variant": "axis_aligned", "n": n_boxes,
         "seconds": t_ax, "items_per_s": n_boxes / t_ax, "unit": "boxes/s"},
    ]


def bench_roialign(impl, n_rois: int = 64, channels: int = 256, size: int = 56,
                   pooled: int = 7, sampling_ratio: int = 2, repeat: int = 3,
                   seed: int = 0) -> list[dict]:
    rng = np.random.default_rng(seed)
    feat = rng.standard_normal((channels, size, size)).astype(np.float32)
    boxes = _random_boxes(rng, n_rois, span=float(size), lo=4.0, hi=float(size) / 2.0)
    rects = _bounding_rects(boxes)
    t_rot = _time_best(
        lambda: impl.roi_align_rotated(feat, boxes, pooled, pooled, 1.0, sampling_ratio),
        repeat)
    t_ax = _time_best(
        lambda: impl.roi_align_aabb(feat, rects, pooled, pooled, 1.0, sampling_ratio),
        repeat)
    shape = f"{pooled}x{pooled}x{channels}"
    return [
        {"op": "roialign", "variant": "rotated", "n": n_rois, "shape": shape,
         "seconds": t_rot, "items_per_s": n_rois / t_rot, "unit": "rois/s"},
        {"op": "roialign", "variant": "axis_aligned", "n": n_rois, "shape": shape,
         "seconds": t_ax, "items_per_s": n_rois / t_ax, "unit": "rois/s"},
    ]


def run_benchmarks(ops=DEFAULT_OPS, backends=None, repeat: int = 3,
                   seed: int = 0, sizes: dict | None = None) -> dict:
    """Run the selected benchmarks and return a report dict.

    sizes may override per-op workload, e.g. {"iou": 5000} pairs,
    {"nms": 500} boxes, {"roialign": 32} RoIs.
    """
    if backends is None:
        backends = _kernels.available_backends()
    sizes = sizes or {}
    results = []
    for name in backends:
        impl = _kernels.get_impl(name)
        for op in ops:
            if op == "iou":
                rows = bench_iou(impl, n_pairs=sizes.get("iou", 20000),
                                 repeat=repeat, seed=seed)
            elif op == "nms":
                rows = bench_nms(impl, n_boxes=sizes.get("nms", 1000),
                                 repeat=repeat, seed=seed)
            elif op == "roialign":
                rows = bench_roialign(impl, n_rois=sizes.get("roialign", 64),
                                      repeat=repeat, seed=seed)
            else:
                raise ValueError(f"unknown benchmark op {op!r}; "
                                 f"expected one of {DEFAULT_OPS}")
            for row in rows:
                row["backend"] = name
            results.extend(rows)
    return {"active_backend": _kernels.BACKEND,
            "max_threads": _kernels.max_threads(),
            "results": results}


def format_report(report: dict) -> str:
    lines = [f"active kernel backend: {report['active_backend']}",
             f"{'op':<10} {'variant':<14} {'backend':<8} {'n':>8} "
             f"{'seconds':>12} {'throughput':>16}"]
    for row in report["results"]:
        thr = f"{row['items_per_s']:,.0f} {row['unit']}"
        lines.append(f"{row['op']:<10} {row['variant']:<14} {row['backend']:<8} "
                     f"{row['n']:>8} {row['seconds']:>12.6f} {thr:>16}")
    return "\n".join(lines) + "\n"

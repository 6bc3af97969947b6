"""Box regression deltas, rotated NMS, and the composite inference
operators: proposal generation and the per-class detection limiter.

Delta parameterization: the center offset is projected into the anchor's
rotated frame and normalized by the anchor extents, extents are log
ratios, and the angle offset is expressed in units of 180 degrees and
wrapped to (-0.5, 0.5]. The wrap keeps regression targets small and
continuous at the angle-range boundary instead of clamping; offsets
beyond +-90 degrees alias to the 180-degree twin, which the 30-degree
positive-label angle gate keeps out of training anyway.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geom import boxes_to_array
from .rbox import RotatedBox, normalize_angle


@dataclass(frozen=True)
class BoxDeltas:
    """Regression offsets from an anchor to a target box."""

    dx: float
    dy: float
    dw: float
    dh: float
    dt: float

    def __post_init__(self):
        for name in ("dx", "dy", "dw", "dh", "dt"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if not -0.5 < self.dt <= 0.5:
            raise ValueError(f"dt must lie in (-0.5, 0.5], got {self.dt}")


@dataclass(frozen=True)
class ScoredBox:
    box: RotatedBox
    score: float
    class_id: int = 0

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {self.score}")
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")


def _wrap_half(x: float) -> float:
    """Wrap to (-0.5, 0.5]."""
    t = math.fmod(x, 1.0)
    if t <= -0.5:
        t += 1.0
    elif t > 0.5:
        t -= 1.0
    return t


def encode_deltas(anchor: RotatedBox, target: RotatedBox) -> BoxDeltas:
    """Deltas that carry the anchor onto the target.

    The center offset is expressed in the anchor frame, which makes the
    encoding equivariant under joint rigid motion of anchor and target.
    """
    t = math.radians(anchor.theta)
    c, s = math.cos(t), math.sin(t)
    ox = target.cx - anchor.cx
    oy = target.cy - anchor.cy
    return BoxDeltas(
        dx=(ox * c + oy * s) / anchor.w,
        dy=(-ox * s + oy * c) / anchor.h,
        dw=math.log(target.w / anchor.w),
        dh=math.log(target.h / anchor.h),
        dt=_wrap_half((target.theta - anchor.theta) / 180.0),
    )


def decode_deltas(anchor: RotatedBox, deltas: BoxDeltas,
                  clamp_log: float = 4.0) -> RotatedBox:
    """Inverse of encode_deltas, with log extents clamped to +-clamp_log
    before exponentiation and the resulting angle normalized."""
    t = math.radians(anchor.theta)
    c, s = math.cos(t), math.sin(t)
    ox = deltas.dx * anchor.w
    oy = deltas.dy * anchor.h
    return RotatedBox(
        cx=anchor.cx + ox * c - oy * s,
        cy=anchor.cy + ox * s + oy * c,
        w=anchor.w * math.exp(min(max(deltas.dw, -clamp_log), clamp_log)),
        h=anchor.h * math.exp(min(max(deltas.dh, -clamp_log), clamp_log)),
        theta=normalize_angle(anchor.theta + deltas.dt * 180.0),
    )


def decode_deltas_batch(anchors: np.ndarray, deltas: np.ndarray,
                        clamp_log: float = 4.0) -> np.ndarray:
    """Vectorized decode: (N, 5) anchors x (N, 5) deltas -> (N, 5) boxes."""
    anchors = np.asarray(anchors, dtype=np.float64)
    deltas = np.asarray(deltas, dtype=np.float64)
    if anchors.shape != deltas.shape or anchors.ndim != 2 or anchors.shape[1] != 5:
        raise ValueError(f"expected matching (N, 5) arrays, got "
                         f"{anchors.shape} and {deltas.shape}")
    t = np.radians(anchors[:, 4])
    c, s = np.cos(t), np.sin(t)
    ox = deltas[:, 0] * anchors[:, 2]
    oy = deltas[:, 1] * anchors[:, 3]
    out = np.empty_like(anchors)
    out[:, 0] = anchors[:, 0] + ox * c - oy * s
    out[:, 1] = anchors[:, 1] + ox * s + oy * c
    out[:, 2] = anchors[:, 2] * np.exp(np.clip(deltas[:, 2], -clamp_log, clamp_log))
    out[:, 3] = anchors[:, 3] * np.exp(np.clip(deltas[:, 3], -clamp_log, clamp_log))
    theta = np.mod(anchors[:, 4] + deltas[:, 4] * 180.0, 360.0)
    theta[theta > 180.0] -= 360.0
    out[:, 4] = theta
    return out


def rotated_nms(boxes: Sequence[ScoredBox], iou_threshold: float,
                angle_gate: float | None = None) -> list[int]:
    """Greedy non-maximum suppression on rotated IoU.

    Returns kept indices in descending score order (score ties break
    toward the lower original index). A candidate is suppressed when its
    IoU with an already-kept box exceeds iou_threshold. By default the
    angle plays no role beyond its effect on geometry: same-pixel boxes
    with different angles are duplicates of one region. Passing
    angle_gate restricts suppression to kept boxes within that angular
    distance, mirroring skew-aware NMS variants.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    if not boxes:
        return []
    arr = boxes_to_array([sb.box for sb in boxes])
    scores = np.array([sb.score for sb in boxes], dtype=np.float64)
    if angle_gate is None:
        from . import _kernels

        return [int(i) for i in _kernels.impl.nms_rotated(arr, scores, iou_threshold)]
    return _nms_angle_gated(arr, scores, iou_threshold, angle_gate)


def _nms_angle_gated(arr, scores, iou_threshold, angle_gate):
    from .geom import angle_distance, rotated_iou
    from .rbox import RotatedBox as RB

    order = np.argsort(-scores, kind="stable")
    objs = [RB(*row) for row in arr]
    keep: list[int] = []
    for idx in order:
        suppressed = False
        for k in keep:
            if (angle_distance(objs[idx].theta, objs[k].theta) <= angle_gate
                    and rotated_iou(objs[idx], objs[k]) > iou_threshold):
                suppressed = True
                break
        if not suppressed:
            keep.append(int(idx))
    return keep


def generate_proposals(objectness: Sequence[float] | np.ndarray,
                       deltas: np.ndarray | Sequence[BoxDeltas],
                       anchors: Sequence[RotatedBox] | np.ndarray,
                       pre_nms_topk: int = 2000,
                       post_nms_topk: int = 1000,
                       nms_threshold: float = 0.7,
                       min_size: float = 0.0) -> list[ScoredBox]:
    """Turn per-anchor scores and regression deltas into proposals.

    Steps: keep the pre_nms_topk best-scoring anchors, decode their
    deltas, drop boxes with an extent below min_size, run rotated NMS,
    truncate to post_nms_topk. Decoded boxes overflowing the image are
    deliberately not clipped; clipping a rotated text box cuts characters
    off, so out-of-bounds regions are zero-padded downstream instead.
    """
    scores = np.asarray(objectness, dtype=np.float64)
    anchor_arr = anchors if isinstance(anchors, np.ndarray) else boxes_to_array(anchors)
    anchor_arr = np.asarray(anchor_arr, dtype=np.float64)
    if isinstance(deltas, np.ndarray):
        delta_arr = np.asarray(deltas, dtype=np.float64)
    else:
        delta_arr = np.array([(d.dx, d.dy, d.dw, d.dh, d.dt) for d in deltas],
                             dtype=np.float64)
    n = len(scores)
    if anchor_arr.shape[0] != n or delta_arr.shape[0] != n:
        raise ValueError(f"length mismatch: {n} scores, {delta_arr.shape[0]} deltas, "
                         f"{anchor_arr.shape[0]} anchors")
    if pre_nms_topk < 1 or post_nms_topk < 1:
        raise ValueError("top-k limits must be >= 1")
    if not 0.0 <= nms_threshold <= 1.0:
        raise ValueError(f"nms_threshold must be in [0, 1], got {nms_threshold}")

    order = np.argsort(-scores, kind="stable")[:pre_nms_topk]
    decoded = decode_deltas_batch(anchor_arr[order], delta_arr[order])

    big_enough = (decoded[:, 2] >= min_size) & (decoded[:, 3] >= min_size)
    order = order[big_enough]
    decoded = decoded[big_enough]

    from . import _kernels

    keep = _kernels.impl.nms_rotated(decoded, scores[order], nms_threshold)
    keep = keep[:post_nms_topk]
    return [ScoredBox(RotatedBox(*decoded[k]), float(scores[order[k]]))
            for k in keep]


def box_with_nms_limit(detections: Sequence[ScoredBox],
                       score_threshold: float = 0.05,
                       nms_threshold: float = 0.3,
                       max_detections: int = 100) -> list[ScoredBox]:
    """Per-class score filtering and NMS, then a global detection cap.

    Within each class, detections below score_threshold are dropped and
    rotated NMS is applied; survivors from all classes are merged, sorted
    by descending score (ties by lower original index) and truncated to
    max_detections.
    """
    if max_detections < 0:
        raise ValueError(f"max_detections must be >= 0, got {max_detections}")
    survivors: list[int] = []
    by_class: dict[int, list[int]] = {}
    for i, det in enumerate(detections):
        if det.score >= score_threshold:
            by_class.setdefault(det.class_id, []).append(i)
    for class_id in sorted(by_class):
        idxs = by_class[class_id]
        kept = rotated_nms([detections[i] for i in idxs], nms_threshold)
        survivors.extend(idxs[k] for k in kept)
    survivors.sort(key=lambda i: (-detections[i].score, i))
    return [detections[i] for i in survivors[:max_detections]]

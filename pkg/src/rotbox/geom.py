"""Rotated-box proximity: exact IoU via convex clipping, angle distance,
and anchor labeling.

The scalar functions here are the reference semantics for the package.
Batched variants dispatch to the kernel backend selected at import time
(compiled extension when available, pure Python otherwise); the backends
are required to agree with the scalar code.
"""

from __future__ import annotations

import enum
import math
from typing import Sequence

import numpy as np

from .rbox import Point, RotatedBox, to_corners

# Half-plane test tolerance and the area below which an intersection is
# treated as empty. These make near-degenerate clips (collinear edges,
# exact touching) deterministic.
CLIP_EPS = 1e-9
MIN_INTER_AREA = 1e-12

Polygon = Sequence[Point]


class AnchorLabel(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    IGNORE = "ignore"


def convex_clip(subject: Polygon, clip: Polygon) -> list[Point]:
    """Intersection of two convex polygons (Sutherland-Hodgman).

    Both polygons must be convex and consistently wound (positive signed
    area, as produced by to_corners). Returns the intersection polygon,
    possibly empty.
    """
    output = list(subject)
    n = len(clip)
    for i in range(n):
        if not output:
            return []
        e1 = clip[i]
        e2 = clip[(i + 1) % n]
        ex, ey = e2[0] - e1[0], e2[1] - e1[1]
        inp = output
        output = []
        sx, sy = inp[-1]
        s_cross = ex * (sy - e1[1]) - ey * (sx - e1[0])
        s_in = s_cross >= -CLIP_EPS
        for px, py in inp:
            p_cross = ex * (py - e1[1]) - ey * (px - e1[0])
            p_in = p_cross >= -CLIP_EPS
            if p_in:
                if not s_in:
                    t = s_cross / (s_cross - p_cross)
                    output.append((sx + t * (px - sx), sy + t * (py - sy)))
                output.append((px, py))
            elif s_in:
                t = s_cross / (s_cross - p_cross)
                output.append((sx + t * (px - sx), sy + t * (py - sy)))
            sx, sy = px, py
            s_in, s_cross = p_in, p_cross
    return output


def polygon_area(p: Polygon) -> float:
    """Shoelace area; zero for fewer than 3 vertices."""
    n = len(p)
    if n < 3:
        return 0.0
    acc = 0.0
    x0, y0 = p[-1]
    for x1, y1 in p:
        acc += x0 * y1 - x1 * y0
        x0, y0 = x1, y1
    return abs(acc) * 0.5


def rotated_iou(a: RotatedBox, b: RotatedBox) -> float:
    """Intersection over union of two rotated boxes.

    Angles matter only through the geometry: a box and its 180-degree
    twin have IoU 1.
    """
    inter = polygon_area(convex_clip(to_corners(a), to_corners(b)))
    if inter < MIN_INTER_AREA:
        return 0.0
    union = a.w * a.h + b.w * b.h - inter
    return min(max(inter / union, 0.0), 1.0)


def angle_distance(a_theta: float, b_theta: float) -> float:
    """Minimal absolute angular difference in degrees, in [0, 180]."""
    if not (math.isfinite(a_theta) and math.isfinite(b_theta)):
        raise ValueError("angles must be finite")
    d = abs(math.fmod(a_theta - b_theta, 360.0))
    return 360.0 - d if d > 180.0 else d


def boxes_to_array(boxes: Sequence[RotatedBox]) -> np.ndarray:
    """(N, 5) float64 array of (cx, cy, w, h, theta) rows."""
    out = np.empty((len(boxes), 5), dtype=np.float64)
    for i, b in enumerate(boxes):
        out[i, 0], out[i, 1], out[i, 2], out[i, 3], out[i, 4] = b.cx, b.cy, b.w, b.h, b.theta
    return out


def array_to_boxes(arr: np.ndarray) -> list[RotatedBox]:
    arr = np.asarray(arr, dtype=np.float64)
    return [RotatedBox(*row) for row in arr.reshape(-1, 5)]


def rotated_iou_matrix(boxes_a: Sequence[RotatedBox] | np.ndarray,
                       boxes_b: Sequence[RotatedBox] | np.ndarray) -> np.ndarray:
    """(N, M) IoU matrix, computed by the active kernel backend."""
    from . import _kernels

    a = boxes_a if isinstance(boxes_a, np.ndarray) else boxes_to_array(boxes_a)
    b = boxes_b if isinstance(boxes_b, np.ndarray) else boxes_to_array(boxes_b)
    return _kernels.impl.iou_matrix(np.ascontiguousarray(a, dtype=np.float64),
                                    np.ascontiguousarray(b, dtype=np.float64))


def raster_iou(a: RotatedBox, b: RotatedBox, resolution: int = 2048) -> float:
    """Grid-sampled IoU estimate, the independent oracle for rotated_iou.

    Both boxes are rasterized over a resolution x resolution grid covering
    the union of their bounding rectangles using boundary-inclusive
    point-in-box tests at cell centers; the result is count(both) /
    count(either).
    """
    if resolution < 64:
        raise ValueError(f"resolution must be >= 64, got {resolution}")
    from . import _kernels

    arr_a = boxes_to_array([a])
    arr_b = boxes_to_array([b])
    return float(_kernels.impl.raster_iou_pairs(arr_a, arr_b, resolution)[0])


def _best_anchor_per_gt(iou: np.ndarray) -> np.ndarray:
    """Index of the highest-IoU anchor for each ground truth.

    Ties break toward the lowest anchor index; a ground truth with no
    overlapping anchor (all IoU zero) donates nothing (index -1).
    """
    best = np.argmax(iou, axis=0)
    best[iou[best, np.arange(iou.shape[1])] <= 0.0] = -1
    return best


def classify_anchors(anchors: Sequence[RotatedBox],
                     ground_truths: Sequence[RotatedBox],
                     iou_hi: float = 0.7,
                     iou_lo: float = 0.3,
                     angle_max: float = 30.0) -> list[AnchorLabel]:
    """Label every anchor positive, negative, or ignore.

    An anchor is positive when it overlaps some ground truth with
    IoU > iou_hi, or is that ground truth's highest-IoU anchor among the
    batch, and in either case the intersection angle is below angle_max.
    An anchor is negative when its best IoU is below iou_lo, or when all
    of its above-iou_hi overlaps point at ground truths more than
    angle_max degrees away (same pixels, wrong reading order). Everything
    else is ignored.

    The highest-IoU fallback is per ground truth and is still subject to
    the angle gate: a best-by-IoU anchor with an incompatible angle is
    ignored, not promoted.
    """
    if len(ground_truths) == 0:
        raise ValueError("ground_truths must be non-empty")
    if not (0.0 <= iou_lo <= iou_hi <= 1.0):
        raise ValueError(f"need 0 <= iou_lo <= iou_hi <= 1, got {iou_lo}, {iou_hi}")
    if len(anchors) == 0:
        return []

    iou = rotated_iou_matrix(anchors, ground_truths)
    dang = np.empty_like(iou)
    for j, gt in enumerate(ground_truths):
        for i, anc in enumerate(anchors):
            dang[i, j] = angle_distance(anc.theta, gt.theta)

    best = _best_anchor_per_gt(iou)
    angle_ok = dang < angle_max
    high = iou > iou_hi

    candidate = high.copy()
    for j, i in enumerate(best):
        if i >= 0:
            candidate[i, j] = True
    positive = np.any(candidate & angle_ok, axis=1)

    max_iou = iou.max(axis=1)
    has_high = np.any(high, axis=1)
    all_high_misaligned = np.all(~high | (dang > angle_max), axis=1)
    negative = ~positive & ((max_iou < iou_lo) | (has_high & all_high_misaligned))

    labels = []
    for i in range(len(anchors)):
        if positive[i]:
            labels.append(AnchorLabel.POSITIVE)
        elif negative[i]:
            labels.append(AnchorLabel.NEGATIVE)
        else:
            labels.append(AnchorLabel.IGNORE)
    return labels


def classify_anchor(anchor: RotatedBox,
                    ground_truths: Sequence[RotatedBox],
                    iou_hi: float = 0.7,
                    iou_lo: float = 0.3,
                    angle_max: float = 30.0) -> AnchorLabel:
    """Single-anchor form of classify_anchors.

    With only one anchor under consideration it is trivially the
    highest-IoU anchor for every ground truth it overlaps.
    """
    return classify_anchors([anchor], ground_truths, iou_hi, iou_lo, angle_max)[0]

"""Pure Python / numpy kernel backend.

Same contracts as the compiled backend in _native.pyx. Scalar geometry is
delegated to rotbox.geom so that this backend and the reference semantics
are literally the same code; numpy is used for batching, rasterization
and the RoI align sampling grid.
"""

from __future__ import annotations

import math

import numpy as np


def _pair_iou(a, b) -> float:
    # Bounding-circle reject, then exact clip.
    ra = 0.5 * math.hypot(a[2], a[3])
    rb = 0.5 * math.hypot(b[2], b[3])
    if math.hypot(b[0] - a[0], b[1] - a[1]) > ra + rb:
        return 0.0
    from .. import geom, rbox

    return geom.rotated_iou(rbox.RotatedBox(*a), rbox.RotatedBox(*b))


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = np.zeros((a.shape[0], b.shape[0]), dtype=np.float64)
    # Prune pairs whose bounding circles are disjoint before clipping.
    ra = 0.5 * np.hypot(a[:, 2], a[:, 3])
    rb = 0.5 * np.hypot(b[:, 2], b[:, 3])
    d2 = (a[:, None, 0] - b[None, :, 0]) ** 2 + (a[:, None, 1] - b[None, :, 1]) ** 2
    near = d2 <= (ra[:, None] + rb[None, :]) ** 2
    from .. import geom, rbox

    boxes_a = [rbox.RotatedBox(*row) for row in a]
    boxes_b = [rbox.RotatedBox(*row) for row in b]
    for i, j in zip(*np.nonzero(near)):
        out[i, j] = geom.rotated_iou(boxes_a[i], boxes_b[j])
    return out


def iou_pairs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return np.array([_pair_iou(a[i], b[i]) for i in range(a.shape[0])], dtype=np.float64)


def nms_rotated(boxes: np.ndarray, scores: np.ndarray, iou_threshold: float) -> np.ndarray:
    """Greedy suppression; returns kept indices in descending score order.

    Score ties break toward the lower original index. A candidate is
    dropped when its IoU with an already kept box exceeds the threshold.
    """
    boxes = np.asarray(boxes, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    keep: list[int] = []
    for idx in order:
        cand = boxes[idx]
        ok = True
        for k in keep:
            if _pair_iou(cand, boxes[k]) > iou_threshold:
                ok = False
                break
        if ok:
            keep.append(int(idx))
    return np.asarray(keep, dtype=np.int64)


def raster_iou_pairs(a: np.ndarray, b: np.ndarray, resolution: int) -> np.ndarray:
    """Grid-sampled IoU per pair: boundary-inclusive point-in-box tests at
    cell centers of a resolution^2 grid over the union of bounding rects."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = np.empty(a.shape[0], dtype=np.float64)
    for i in range(a.shape[0]):
        out[i] = _raster_iou_one(a[i], b[i], resolution)
    return out


def _corner_bounds(box):
    cx, cy, w, h, theta = box
    t = math.radians(theta)
    rx = 0.5 * w * abs(math.cos(t)) + 0.5 * h * abs(math.sin(t))
    ry = 0.5 * w * abs(math.sin(t)) + 0.5 * h * abs(math.cos(t))
    return cx - rx, cx + rx, cy - ry, cy + ry


def _inside_grid(box, xs, ys):
    cx, cy, w, h, theta = box
    t = math.radians(theta)
    c, s = math.cos(t), math.sin(t)
    dx = xs[None, :] - cx
    dy = ys[:, None] - cy
    lx = dx * c + dy * s
    ly = -dx * s + dy * c
    return (np.abs(lx) <= 0.5 * w) & (np.abs(ly) <= 0.5 * h)


def _raster_iou_one(a, b, resolution: int, chunk: int = 256) -> float:
    ax0, ax1, ay0, ay1 = _corner_bounds(a)
    bx0, bx1, by0, by1 = _corner_bounds(b)
    x0, x1 = min(ax0, bx0), max(ax1, bx1)
    y0, y1 = min(ay0, by0), max(ay1, by1)
    step_x = (x1 - x0) / resolution
    step_y = (y1 - y0) / resolution
    xs = x0 + (np.arange(resolution) + 0.5) * step_x
    both = either = 0
    for lo in range(0, resolution, chunk):
        ys = y0 + (np.arange(lo, min(lo + chunk, resolution)) + 0.5) * step_y
        in_a = _inside_grid(a, xs, ys)
        in_b = _inside_grid(b, xs, ys)
        both += int(np.count_nonzero(in_a & in_b))
        either += int(np.count_nonzero(in_a | in_b))
    if either == 0:
        return 0.0
    return both / either


def roi_align_rotated(feat: np.ndarray, boxes: np.ndarray, pooled_h: int,
                      pooled_w: int, spatial_scale: float,
                      sampling_ratio: int) -> np.ndarray:
    """Rotated RoI align over a (C, H, W) float32 feature map.

    Pooled rows run along each box's height direction, columns along its
    width. Every bin averages an s x s grid of bilinear samples (s per
    axis is sampling_ratio, or ceil(bin extent) when 0); samples falling
    outside the map interpolate against implicit zeros.
    """
    feat = np.asarray(feat, dtype=np.float32)
    boxes = np.asarray(boxes, dtype=np.float64)
    C, H, W = feat.shape
    K = boxes.shape[0]
    out = np.zeros((K, C, pooled_h, pooled_w), dtype=np.float32)
    for k in range(K):
        cx, cy, w, h = boxes[k, :4] * spatial_scale
        t = math.radians(boxes[k, 4])
        c, s = math.cos(t), math.sin(t)
        bin_w = w / pooled_w
        bin_h = h / pooled_h
        sx = sampling_ratio if sampling_ratio > 0 else max(1, math.ceil(bin_w))
        sy = sampling_ratio if sampling_ratio > 0 else max(1, math.ceil(bin_h))
        # Local sample offsets along the width / height axes.
        lx = -0.5 * w + (np.arange(pooled_w)[:, None] + (np.arange(sx)[None, :] + 0.5) / sx).ravel() * bin_w
        ly = -0.5 * h + (np.arange(pooled_h)[:, None] + (np.arange(sy)[None, :] + 0.5) / sy).ravel() * bin_h
        fx = cx + lx[None, :] * c - ly[:, None] * s
        fy = cy + lx[None, :] * s + ly[:, None] * c
        vals = _bilinear_gather(feat, fx, fy)  # (C, ph*sy, pw*sx)
        vals = vals.reshape(C, pooled_h, sy, pooled_w, sx)
        out[k] = vals.mean(axis=(2, 4)).astype(np.float32)
    return out


def _bilinear_gather(feat: np.ndarray, fx: np.ndarray, fy: np.ndarray) -> np.ndarray:
    """Bilinear samples of (C, H, W) data at continuous (fx, fy), zero
    outside bounds; cell (i, j) is located at continuous (i, j)."""
    C, H, W = feat.shape
    x0 = np.floor(fx).astype(np.int64)
    y0 = np.floor(fy).astype(np.int64)
    dx = fx - x0
    dy = fy - y0
    acc = np.zeros((C,) + fx.shape, dtype=np.float64)
    for oy, wy in ((0, 1.0 - dy), (1, dy)):
        for ox, wx in ((0, 1.0 - dx), (1, dx)):
            xi = x0 + ox
            yi = y0 + oy
            ok = (xi >= 0) & (xi < W) & (yi >= 0) & (yi < H)
            wgt = wx * wy * ok
            vals = feat[:, np.clip(yi, 0, H - 1), np.clip(xi, 0, W - 1)]
            acc += wgt[None] * vals
    return acc


# --- Axis-aligned twins (benchmark comparison only) ---------------------------


def iou_matrix_aabb(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """IoU matrix for (x1, y1, x2, y2) rectangles."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ix1 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix2 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    inter = np.clip(ix2 - ix1, 0.0, None) * np.clip(iy2 - iy1, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, inter / union, 0.0)
    return iou


def iou_pairs_aabb(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    ix1 = np.maximum(a[:, 0], b[:, 0])
    iy1 = np.maximum(a[:, 1], b[:, 1])
    ix2 = np.minimum(a[:, 2], b[:, 2])
    iy2 = np.minimum(a[:, 3], b[:, 3])
    inter = np.clip(ix2 - ix1, 0.0, None) * np.clip(iy2 - iy1, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a + area_b - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(union > 0, inter / union, 0.0)


def nms_aabb(boxes: np.ndarray, scores: np.ndarray, iou_threshold: float) -> np.ndarray:
    boxes = np.asarray(boxes, dtype=np.float64)
    scores = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-scores, kind="stable")
    keep: list[int] = []
    for idx in order:
        if all(iou_pairs_aabb(boxes[idx][None], boxes[k][None])[0] <= iou_threshold
               for k in keep):
            keep.append(int(idx))
    return np.asarray(keep, dtype=np.int64)


def roi_align_aabb(feat: np.ndarray, boxes: np.ndarray, pooled_h: int,
                   pooled_w: int, spatial_scale: float,
                   sampling_ratio: int) -> np.ndarray:
    """Axis-aligned RoI align over (x1, y1, x2, y2) boxes; same sampling
    conventions as the rotated operator restricted to theta = 0."""
    feat = np.asarray(feat, dtype=np.float32)
    boxes = np.asarray(boxes, dtype=np.float64)
    C, H, W = feat.shape
    K = boxes.shape[0]
    out = np.zeros((K, C, pooled_h, pooled_w), dtype=np.float32)
    for k in range(K):
        x1, y1, x2, y2 = boxes[k] * spatial_scale
        bin_w = (x2 - x1) / pooled_w
        bin_h = (y2 - y1) / pooled_h
        sx = sampling_ratio if sampling_ratio > 0 else max(1, math.ceil(bin_w))
        sy = sampling_ratio if sampling_ratio > 0 else max(1, math.ceil(bin_h))
        fx = x1 + (np.arange(pooled_w)[:, None] + (np.arange(sx)[None, :] + 0.5) / sx).ravel() * bin_w
        fy = y1 + (np.arange(pooled_h)[:, None] + (np.arange(sy)[None, :] + 0.5) / sy).ravel() * bin_h
        FX, FY = np.meshgrid(fx, fy)
        vals = _bilinear_gather(feat, FX, FY)
        vals = vals.reshape(C, pooled_h, sy, pooled_w, sx)
        out[k] = vals.mean(axis=(2, 4)).astype(np.float32)
    return out

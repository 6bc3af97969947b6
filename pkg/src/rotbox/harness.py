"""Synthetic scenes, rotation augmentation, and rotated-detection
metrics: the desk-scale stand-in for a labeled dataset.

Scene generation is a pure function of the seed, driven by an explicitly
specified 64-bit linear congruential generator so that a reimplementation
in any language reproduces scenes exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geom import angle_distance, rotated_iou, rotated_iou_matrix
from .patch import ImageBuffer, sample_bilinear_u8
from .proposals import ScoredBox
from .rbox import RotatedBox

MAX_ATTEMPTS_PER_BOX = 1000


class Lcg64:
    """64-bit linear congruential generator (Knuth MMIX constants).

    Recurrence: state <- (6364136223846793005 * state
    + 1442695040888963407) mod 2^64. Each draw advances the state once;
    uniform() maps the top 53 bits of the new state onto [0, 1) as
    (state >> 11) / 2^53. The recurrence, constants, and draw order are
    part of the scene format: equal seeds give bit-equal scenes.
    """

    MULTIPLIER = 6364136223846793005
    INCREMENT = 1442695040888963407
    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = seed & self.MASK

    def next_u64(self) -> int:
        self.state = (self.MULTIPLIER * self.state + self.INCREMENT) & self.MASK
        return self.state

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = self.next_u64() >> 11
        return lo + (hi - lo) * (u / 9007199254740992.0)  # 2^53


@dataclass(frozen=True)
class SceneSpec:
    """Parameters of a synthetic scene of filled rotated rectangles."""

    image_width: int
    image_height: int
    n_boxes: int
    extent_range: tuple[float, float] = (20.0, 80.0)
    angle_range: tuple[float, float] = (-90.0, 90.0)
    fill_value: int = 255
    background_value: int = 0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "extent_range", tuple(float(v) for v in self.extent_range))
        object.__setattr__(self, "angle_range", tuple(float(v) for v in self.angle_range))
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dims must be >= 1")
        if self.n_boxes < 0:
            raise ValueError("n_boxes must be >= 0")
        lo, hi = self.extent_range
        if not (0 < lo <= hi):
            raise ValueError(f"bad extent_range {self.extent_range}")
        if self.angle_range[0] > self.angle_range[1]:
            raise ValueError(f"bad angle_range {self.angle_range}")
        for name in ("fill_value", "background_value"):
            v = getattr(self, name)
            if not 0 <= v <= 255:
                raise ValueError(f"{name} must be an 8-bit value, got {v}")
        if self.fill_value == self.background_value:
            raise ValueError("fill_value must differ from background_value")

    def to_json(self) -> str:
        return json.dumps({
            "image_width": self.image_width, "image_height": self.image_height,
            "n_boxes": self.n_boxes, "extent_range": list(self.extent_range),
            "angle_range": list(self.angle_range), "fill_value": self.fill_value,
            "background_value": self.background_value, "seed": self.seed,
        })

    @classmethod
    def from_json(cls, text: str) -> "SceneSpec":
        obj = json.loads(text)
        if not isinstance(obj, dict):
            raise ValueError("scene spec must be a JSON object")
        required = {"image_width", "image_height", "n_boxes"}
        missing = required - obj.keys()
        if missing:
            raise ValueError(f"scene spec missing keys: {sorted(missing)}")
        kwargs = {k: obj[k] for k in
                  ("image_width", "image_height", "n_boxes", "fill_value",
                   "background_value", "seed") if k in obj}
        if "extent_range" in obj:
            kwargs["extent_range"] = tuple(obj["extent_range"])
        if "angle_range" in obj:
            kwargs["angle_range"] = tuple(obj["angle_range"])
        return cls(**kwargs)


@dataclass(frozen=True)
class MatchResult:
    """Detection match counts and the derived precision/recall/f1.

    Empty denominators count as perfect: precision is 1 with no
    predictions, recall is 1 with no ground truth; f1 is 0 when both
    precision and recall are 0.
    """

    true_positives: int
    false_positives: int
    false_negatives: int
    precision: float
    recall: float
    f1: float

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "MatchResult":
        precision = tp / (tp + fp) if tp + fp > 0 else 1.0
        recall = tp / (tp + fn) if tp + fn > 0 else 1.0
        f1 = (2.0 * precision * recall / (precision + recall)
              if precision + recall > 0 else 0.0)
        return cls(tp, fp, fn, precision, recall, f1)

    def to_json(self) -> str:
        return json.dumps({
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "precision": self.precision, "recall": self.recall, "f1": self.f1,
        })


def render_boxes(width: int, height: int, boxes: Sequence[RotatedBox],
                 fill_value: int, background_value: int) -> ImageBuffer:
    """Rasterize filled rotated rectangles: a pixel is filled when its
    center (x + 0.5, y + 0.5) lies inside a box, boundary inclusive."""
    img = np.full((height, width), background_value, dtype=np.uint8)
    for box in boxes:
        t = math.radians(box.theta)
        c, s = math.cos(t), math.sin(t)
        rx = 0.5 * box.w * abs(c) + 0.5 * box.h * abs(s)
        ry = 0.5 * box.w * abs(s) + 0.5 * box.h * abs(c)
        x0 = max(0, int(math.floor(box.cx - rx)))
        x1 = min(width, int(math.ceil(box.cx + rx)) + 1)
        y0 = max(0, int(math.floor(box.cy - ry)))
        y1 = min(height, int(math.ceil(box.cy + ry)) + 1)
        if x0 >= x1 or y0 >= y1:
            continue
        xs = np.arange(x0, x1, dtype=np.float64) + 0.5 - box.cx
        ys = np.arange(y0, y1, dtype=np.float64) + 0.5 - box.cy
        lx = xs[None, :] * c + ys[:, None] * s
        ly = -xs[None, :] * s + ys[:, None] * c
        inside = (np.abs(lx) <= 0.5 * box.w) & (np.abs(ly) <= 0.5 * box.h)
        img[y0:y1, x0:x1][inside] = fill_value
    return ImageBuffer(img)


def synth_scene(spec: SceneSpec) -> tuple[ImageBuffer, list[RotatedBox]]:
    """Deterministic scene of filled rotated rectangles plus ground truth.

    Boxes are rejection-sampled: for each box the draws are, in order,
    (w, h, theta, cx, cy), with w and h uniform over extent_range, theta
    uniform over angle_range, and the center uniform over positions that
    keep the box's bounding rectangle inside the image. An attempt is
    discarded when the box cannot fit or overlaps an accepted box with
    IoU >= 0.1; after 1000 failed attempts for a single box the spec is
    deemed unsatisfiable.
    """
    rng = Lcg64(spec.seed)
    boxes: list[RotatedBox] = []
    for _ in range(spec.n_boxes):
        for attempt in range(MAX_ATTEMPTS_PER_BOX + 1):
            if attempt == MAX_ATTEMPTS_PER_BOX:
                raise RuntimeError(
                    f"gave up after {MAX_ATTEMPTS_PER_BOX} attempts placing box "
                    f"{len(boxes) + 1}/{spec.n_boxes}; spec too crowded")
            w = rng.uniform(*spec.extent_range)
            h = rng.uniform(*spec.extent_range)
            theta = rng.uniform(*spec.angle_range)
            t = math.radians(theta)
            rx = 0.5 * w * abs(math.cos(t)) + 0.5 * h * abs(math.sin(t))
            ry = 0.5 * w * abs(math.sin(t)) + 0.5 * h * abs(math.cos(t))
            if 2.0 * rx > spec.image_width or 2.0 * ry > spec.image_height:
                continue
            cx = rng.uniform(rx, spec.image_width - rx)
            cy = rng.uniform(ry, spec.image_height - ry)
            cand = RotatedBox(cx, cy, w, h, theta)
            if all(rotated_iou(cand, b) < 0.1 for b in boxes):
                boxes.append(cand)
                break
    img = render_boxes(spec.image_width, spec.image_height, boxes,
                       spec.fill_value, spec.background_value)
    return img, boxes


def augment_rotate(img: ImageBuffer, boxes: Sequence[RotatedBox],
                   angle: float) -> tuple[ImageBuffer, list[RotatedBox]]:
    """Rotate an image and its boxes by `angle` degrees about the image
    center, onto a canvas sized to the rotated image's bounding rect
    (zero fill). Box angles advance by the same amount."""
    if angle == 0.0:
        return img, list(boxes)
    w, h = img.width, img.height
    t = math.radians(angle)
    c, s = math.cos(t), math.sin(t)
    rx = 0.5 * w * abs(c) + 0.5 * h * abs(s)
    ry = 0.5 * w * abs(s) + 0.5 * h * abs(c)
    out_w = max(1, int(math.ceil(2.0 * rx - 1e-7)))
    out_h = max(1, int(math.ceil(2.0 * ry - 1e-7)))
    # Map output pixel centers back through the inverse rotation.
    px = np.arange(out_w, dtype=np.float64) + 0.5 - out_w / 2.0
    py = np.arange(out_h, dtype=np.float64) + 0.5 - out_h / 2.0
    sx = w / 2.0 + px[None, :] * c + py[:, None] * s
    sy = h / 2.0 - px[None, :] * s + py[:, None] * c
    rotated = ImageBuffer(sample_bilinear_u8(img, sx, sy))
    out_boxes = []
    for b in boxes:
        ox = b.cx - w / 2.0
        oy = b.cy - h / 2.0
        out_boxes.append(RotatedBox(out_w / 2.0 + ox * c - oy * s,
                                    out_h / 2.0 + ox * s + oy * c,
                                    b.w, b.h, b.theta + angle))
    return rotated, out_boxes


def eval_detections(predictions: Sequence[ScoredBox],
                    ground_truths: Sequence[RotatedBox],
                    iou_threshold: float = 0.5,
                    angle_threshold: float = 30.0) -> MatchResult:
    """Greedy matching of predictions to ground truths.

    Predictions are visited in descending score order (ties by lower
    index); each one matches the unmatched ground truth with the highest
    rotated IoU, provided that IoU >= iou_threshold and the intersection
    angle is <= angle_threshold. A prediction equal to a ground truth but
    rotated 180 degrees therefore counts as a false positive: same
    pixels, wrong reading order.
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ValueError(f"iou_threshold must be in [0, 1], got {iou_threshold}")
    if angle_threshold < 0.0:
        raise ValueError(f"angle_threshold must be >= 0, got {angle_threshold}")
    n_gt = len(ground_truths)
    if not predictions:
        return MatchResult.from_counts(0, 0, n_gt)
    if n_gt == 0:
        return MatchResult.from_counts(0, len(predictions), 0)
    order = sorted(range(len(predictions)),
                   key=lambda i: (-predictions[i].score, i))
    iou = rotated_iou_matrix([predictions[i].box for i in order], ground_truths)
    tp = fp = 0
    unmatched = set(range(n_gt))
    for row, i in enumerate(order):
        best_j = -1
        best_iou = -1.0
        for j in sorted(unmatched):  # IoU ties break toward the lowest gt index
            if iou[row, j] > best_iou:
                best_iou = iou[row, j]
                best_j = j
        if (best_j >= 0 and best_iou >= iou_threshold and
                angle_distance(predictions[i].box.theta,
                               ground_truths[best_j].theta) <= angle_threshold):
            tp += 1
            unmatched.discard(best_j)
        else:
            fp += 1
    return MatchResult.from_counts(tp, fp, len(unmatched))

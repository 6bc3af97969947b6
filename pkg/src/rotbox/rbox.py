"""Rotated box representation and conversions.

A rotated box is the 5-tuple (cx, cy, w, h, theta): geometric center,
extent along the width direction, extent perpendicular to it, and the
orientation of the width direction in degrees measured from the positive
x-axis. The coordinate frame is image convention (x right, y down);
positive theta rotates the width vector from +x toward +y.

theta is stored normalized to (-180, 180]. A box and its 180-degree twin
cover the same pixels but are distinct values: they imply opposite text
reading directions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

Point = tuple[float, float]


def normalize_angle(theta: float) -> float:
    """Map an angle in degrees to the equivalent value in (-180, 180]."""
    if not math.isfinite(theta):
        raise ValueError(f"angle must be finite, got {theta!r}")
    t = math.fmod(theta, 360.0)
    if t <= -180.0:
        t += 360.0
    elif t > 180.0:
        t -= 360.0
    return t


@dataclass(frozen=True)
class RotatedBox:
    """Oriented rectangle (cx, cy, w, h, theta), theta in degrees."""

    cx: float
    cy: float
    w: float
    h: float
    theta: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"box extents must be positive, got w={self.w}, h={self.h}")
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def translated(self, dx: float, dy: float) -> "RotatedBox":
        return RotatedBox(self.cx + dx, self.cy + dy, self.w, self.h, self.theta)

    def rotated(self, dtheta: float) -> "RotatedBox":
        """Same box spun in place by dtheta degrees (center fixed)."""
        return RotatedBox(self.cx, self.cy, self.w, self.h, self.theta + dtheta)


@dataclass(frozen=True)
class AxisAlignedRect:
    """Axis-aligned rectangle with x1 <= x2 and y1 <= y2."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        if self.x1 > self.x2 or self.y1 > self.y2:
            raise ValueError(f"degenerate rect ordering: {self}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1


def to_corners(box: RotatedBox) -> list[Point]:
    """Corner polygon of a box, in consistent winding order.

    Vertices are center + (+-w/2) * u + (+-h/2) * v with u = (cos t, sin t)
    and v = (-sin t, cos t), ordered (-,-), (+,-), (+,+), (-,+) in the
    (width, height) sign pattern.
    """
    t = math.radians(box.theta)
    c, s = math.cos(t), math.sin(t)
    wx, wy = 0.5 * box.w * c, 0.5 * box.w * s
    hx, hy = -0.5 * box.h * s, 0.5 * box.h * c
    return [
        (box.cx - wx - hx, box.cy - wy - hy),
        (box.cx + wx - hx, box.cy + wy - hy),
        (box.cx + wx + hx, box.cy + wy + hy),
        (box.cx - wx + hx, box.cy - wy + hy),
    ]


def from_corners(corners: list[Point]) -> RotatedBox:
    """Reconstruct the box whose to_corners() output is `corners`."""
    if len(corners) != 4:
        raise ValueError(f"expected 4 corners, got {len(corners)}")
    (x0, y0), (x1, y1), (x2, y2), (x3, y3) = corners
    cx = (x0 + x1 + x2 + x3) / 4.0
    cy = (y0 + y1 + y2 + y3) / 4.0
    w = math.hypot(x1 - x0, y1 - y0)
    h = math.hypot(x3 - x0, y3 - y0)
    theta = math.degrees(math.atan2(y1 - y0, x1 - x0))
    return RotatedBox(cx, cy, w, h, theta)


def horizontal_bounding_rect(box: RotatedBox) -> AxisAlignedRect:
    """Smallest axis-aligned rectangle containing all four corners."""
    xs, ys = zip(*to_corners(box))
    return AxisAlignedRect(min(xs), min(ys), max(xs), max(ys))


def area(box: RotatedBox) -> float:
    return box.w * box.h


# --- JSONL serialization (shared by all CLI tools) ---------------------------
#
# One JSON object per line with keys cx, cy, w, h, theta and optional
# score (float in [0, 1]) and class (integer >= 0). Angles in degrees.
# Floats are emitted with 6 significant digits.

BoxRecord = tuple[RotatedBox, "float | None", "int | None"]


def _f6(x: float) -> float:
    return float(f"{float(x):.6g}")


def box_to_obj(box: RotatedBox, score: float | None = None,
               class_id: int | None = None) -> dict:
    obj = {"cx": _f6(box.cx), "cy": _f6(box.cy), "w": _f6(box.w),
           "h": _f6(box.h), "theta": _f6(box.theta)}
    if score is not None:
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {score}")
        obj["score"] = _f6(score)
    if class_id is not None:
        if class_id < 0:
            raise ValueError(f"class must be >= 0, got {class_id}")
        obj["class"] = int(class_id)
    return obj


def box_from_obj(obj: dict) -> BoxRecord:
    try:
        box = RotatedBox(float(obj["cx"]), float(obj["cy"]), float(obj["w"]),
                         float(obj["h"]), float(obj["theta"]))
    except KeyError as e:
        raise ValueError(f"box record missing key {e.args[0]!r}") from e
    score = obj.get("score")
    if score is not None:
        score = float(score)
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"score must be in [0, 1], got {score}")
    class_id = obj.get("class")
    if class_id is not None:
        class_id = int(class_id)
        if class_id < 0:
            raise ValueError(f"class must be >= 0, got {class_id}")
    return box, score, class_id


def boxes_to_jsonl(records) -> str:
    """Serialize records to JSONL text.

    Accepts bare RotatedBox values or (box, score, class_id) tuples.
    """
    lines = []
    for rec in records:
        if isinstance(rec, RotatedBox):
            rec = (rec, None, None)
        lines.append(json.dumps(box_to_obj(*rec)))
    return "".join(line + "\n" for line in lines)


def boxes_from_jsonl(text: str) -> list[BoxRecord]:
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ValueError(f"line {lineno}: invalid JSON: {e}") from e
        if not isinstance(obj, dict):
            raise ValueError(f"line {lineno}: expected a JSON object")
        try:
            records.append(box_from_obj(obj))
        except ValueError as e:
            raise ValueError(f"line {lineno}: {e}") from e
    return records


def read_box_jsonl(path) -> list[BoxRecord]:
    with open(path, "r", encoding="utf-8") as f:
        return boxes_from_jsonl(f.read())


def write_box_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(boxes_to_jsonl(records))

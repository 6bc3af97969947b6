"""Rotated anchor generation: the scale x aspect-ratio x angle cross
product at one location, tiled over a feature-map grid.

The default profile uses 5 scales (32, 64, 128, 256, 512), 7 aspect
ratios (1/32 .. 2) and 7 angle anchors every 30 degrees across
(-90, 90], i.e. 245 anchors per cell; the angle dimension multiplies the
anchor count by 7 relative to an axis-aligned RPN. Full-360 coverage is a
pure config change (extend the angle list).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .rbox import RotatedBox

PAPER_SCALES = (32.0, 64.0, 128.0, 256.0, 512.0)
PAPER_RATIOS = (0.03125, 0.0625, 0.125, 0.25, 0.5, 1.0, 2.0)
PAPER_ANGLES = (-90.0, -60.0, -30.0, 0.0, 30.0, 60.0, 90.0)
DEFAULT_STRIDE = 16.0


@dataclass(frozen=True)
class AnchorSpec:
    """Anchor template set: scales in pixels, ratios as h/w, angles in
    degrees, and the feature stride in pixels per cell.

    Ratio is height over width, so ratios below 1 give the wide boxes
    text lines need.
    """

    scales: tuple[float, ...] = PAPER_SCALES
    ratios: tuple[float, ...] = PAPER_RATIOS
    angles: tuple[float, ...] = PAPER_ANGLES
    stride: float = DEFAULT_STRIDE

    def __post_init__(self):
        object.__setattr__(self, "scales", tuple(float(s) for s in self.scales))
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))
        object.__setattr__(self, "stride", float(self.stride))
        if not self.scales or not self.ratios or not self.angles:
            raise ValueError("scales, ratios and angles must be non-empty")
        if any(s <= 0 for s in self.scales):
            raise ValueError(f"scales must be positive: {self.scales}")
        if any(r <= 0 for r in self.ratios):
            raise ValueError(f"ratios must be positive: {self.ratios}")
        if any(not -180.0 < a <= 180.0 for a in self.angles):
            raise ValueError(f"angles must lie in (-180, 180]: {self.angles}")
        if self.stride < 1:
            raise ValueError(f"stride must be >= 1, got {self.stride}")

    def to_json(self) -> str:
        return json.dumps({"scales": list(self.scales), "ratios": list(self.ratios),
                           "angles": list(self.angles), "stride": self.stride})

    @classmethod
    def from_json(cls, text: str) -> "AnchorSpec":
        obj = json.loads(text)
        if not isinstance(obj, dict):
            raise ValueError("anchor spec must be a JSON object")
        missing = {"scales", "ratios", "angles", "stride"} - obj.keys()
        if missing:
            raise ValueError(f"anchor spec missing keys: {sorted(missing)}")
        return cls(scales=tuple(obj["scales"]), ratios=tuple(obj["ratios"]),
                   angles=tuple(obj["angles"]), stride=obj["stride"])


def cell_anchors(spec: AnchorSpec) -> list[RotatedBox]:
    """All (scale, ratio, angle) anchor boxes centered at the origin.

    For scale s and ratio r the box is w = s / sqrt(r), h = s * sqrt(r),
    preserving area s^2. Order is scale-major, then ratio, then angle.
    """
    out = []
    for s in spec.scales:
        for r in spec.ratios:
            root = math.sqrt(r)
            w = s / root
            h = s * root
            for a in spec.angles:
                out.append(RotatedBox(0.0, 0.0, w, h, a))
    return out


def grid_anchors(spec: AnchorSpec, feature_width: int, feature_height: int) -> list[RotatedBox]:
    """Cell anchors translated to every cell center of a feature grid.

    Cell (i, j) is centered at ((i + 0.5) * stride, (j + 0.5) * stride).
    Output is row-major over cells, anchor index fastest. Anchors reaching
    past the image border are kept: padding happens downstream, in RoI
    align and patch extraction, never by filtering here.
    """
    if feature_width < 1 or feature_height < 1:
        raise ValueError(f"feature grid must be at least 1x1, got "
                         f"{feature_width}x{feature_height}")
    base = cell_anchors(spec)
    out = []
    for j in range(feature_height):
        cy = (j + 0.5) * spec.stride
        for i in range(feature_width):
            cx = (i + 0.5) * spec.stride
            for a in base:
                out.append(RotatedBox(cx + a.cx, cy + a.cy, a.w, a.h, a.theta))
    return out

"""Rotated RoI align: fixed-size feature extraction under a rotated box.

Every sample point is mapped continuously (no rounding anywhere, unlike
quantized RoI pooling) and points outside the feature map interpolate
against implicit zeros, so boxes reaching past the border pool cleanly
without any anchor filtering upstream.

Coordinate convention: the value of cell (i, j) lives at continuous
(x=i, y=j), with no half-cell shift. This differs from the image modules,
which place pixel centers at +0.5; each convention is pinned by its own
exact-agreement tests.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from .rbox import RotatedBox

RTEN_MAGIC = b"RTEN"
RTEN_VERSION = 1


class Tensor:
    """Dense (channels, height, width) float32 feature map."""

    def __init__(self, data: np.ndarray):
        data = np.asarray(data, dtype=np.float32)
        if data.ndim != 3:
            raise ValueError(f"expected (C, H, W) data, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("tensor values must be finite")
        self.data = np.ascontiguousarray(data)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]

    def __eq__(self, other) -> bool:
        return isinstance(other, Tensor) and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"Tensor(C={self.channels}, H={self.height}, W={self.width})"


@dataclass(frozen=True)
class RoiAlignConfig:
    """Pooled output shape, feature cells per image pixel, and samples per
    bin axis (0 selects ceil(bin extent) adaptively)."""

    pooled_h: int = 7
    pooled_w: int = 7
    spatial_scale: float = 1.0 / 16.0
    sampling_ratio: int = 2

    def __post_init__(self):
        if self.pooled_h < 1 or self.pooled_w < 1:
            raise ValueError(f"pooled dims must be >= 1, got "
                             f"{self.pooled_h}x{self.pooled_w}")
        if self.spatial_scale <= 0:
            raise ValueError(f"spatial_scale must be > 0, got {self.spatial_scale}")
        if self.sampling_ratio < 0:
            raise ValueError(f"sampling_ratio must be >= 0, got {self.sampling_ratio}")


def bilinear_sample(t: Tensor, channel: int, x: float, y: float) -> float:
    """Bilinear interpolation of one channel at continuous (x, y).

    Coordinates outside [-1, width] x [-1, height] return 0; partially
    outside samples interpolate against implicit zeros.
    """
    if not 0 <= channel < t.channels:
        raise ValueError(f"channel {channel} out of range 0..{t.channels - 1}")
    w, h = t.width, t.height
    if x < -1.0 or x > w or y < -1.0 or y > h:
        return 0.0
    x0 = math.floor(x)
    y0 = math.floor(y)
    dx = x - x0
    dy = y - y0
    plane = t.data[channel]
    acc = 0.0
    for oy, wy in ((0, 1.0 - dy), (1, dy)):
        yi = y0 + oy
        if not 0 <= yi < h:
            continue
        for ox, wx in ((0, 1.0 - dx), (1, dx)):
            xi = x0 + ox
            if 0 <= xi < w:
                acc += wx * wy * float(plane[yi, xi])
    return acc


def rroi_align(t: Tensor, box: RotatedBox, cfg: RoiAlignConfig) -> Tensor:
    """Pool a rotated image-space box into a (C, pooled_h, pooled_w) tensor.

    The box is scaled by spatial_scale into feature coordinates and split
    into pooled_h x pooled_w bins along its local height/width axes, so
    pooled rows follow the box's height direction and columns its width:
    the output reads like upright text for a correct detection. Each bin
    averages a grid of bilinear samples taken at points mapped through
    center + R(theta) * local.
    """
    out = rroi_align_batch(t, [box], cfg)
    return Tensor(out[0])


def rroi_align_batch(t: Tensor, boxes, cfg: RoiAlignConfig) -> np.ndarray:
    """Vectorized form: returns (K, C, pooled_h, pooled_w) float32."""
    from . import _kernels
    from .geom import boxes_to_array

    arr = boxes if isinstance(boxes, np.ndarray) else boxes_to_array(boxes)
    return _kernels.impl.roi_align_rotated(
        t.data, np.asarray(arr, dtype=np.float64), cfg.pooled_h, cfg.pooled_w,
        cfg.spatial_scale, cfg.sampling_ratio)


# --- RTEN tensor file format --------------------------------------------------
#
# magic "RTEN", then little-endian uint32: version (1), ndim (3), C, H, W,
# followed by C*H*W little-endian float32 values, channel-major, row-major.


def write_rten(path, t: Tensor) -> None:
    with open(path, "wb") as f:
        f.write(RTEN_MAGIC)
        f.write(struct.pack("<II", RTEN_VERSION, 3))
        f.write(struct.pack("<III", t.channels, t.height, t.width))
        f.write(np.ascontiguousarray(t.data, dtype="<f4").tobytes())


def read_rten(path) -> Tensor:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != RTEN_MAGIC:
        raise ValueError(f"not an RTEN file: bad magic {raw[:4]!r}")
    if len(raw) < 4 + 5 * 4:
        raise ValueError("truncated RTEN header")
    version, ndim = struct.unpack_from("<II", raw, 4)
    if version != RTEN_VERSION:
        raise ValueError(f"unsupported RTEN version {version}")
    if ndim != 3:
        raise ValueError(f"expected 3 dimensions, got {ndim}")
    c, h, w = struct.unpack_from("<III", raw, 12)
    expected = 24 + 4 * c * h * w
    if len(raw) != expected:
        raise ValueError(f"RTEN payload size mismatch: expected {expected} bytes, "
                         f"got {len(raw)}")
    data = np.frombuffer(raw, dtype="<f4", offset=24).reshape(c, h, w)
    return Tensor(data.copy())

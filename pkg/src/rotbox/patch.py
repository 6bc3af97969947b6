"""Detection-to-recognition bridge: extract an upright w x h pixel patch
for a predicted rotated box.

Rotated boxes are never clipped to the image (that would cut characters
off a rectangular detection); instead the image is virtually extended
with zeros. The staged pipeline crops the box's horizontal bounding
rectangle, zero-pads it so the box center sits at the patch center, then
warps rotation and crop in one bilinear resampling pass. The staging only
bounds working memory: its output is bit-identical to warping a
zero-extended copy of the whole image.

Pixel convention: the sample point of pixel (u, v) is (u + 0.5, v + 0.5)
in continuous coordinates. 8-bit outputs round half away from zero.
"""

from __future__ import annotations

import math
import re

import numpy as np

from .rbox import AxisAlignedRect, RotatedBox, horizontal_bounding_rect


class ImageBuffer:
    """8-bit raster, (height, width, channels) with 1 (gray) or 3 (RGB)
    interleaved channels."""

    def __init__(self, data: np.ndarray):
        data = np.asarray(data, dtype=np.uint8)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise ValueError(f"expected (H, W) or (H, W, 1|3) data, got {data.shape}")
        self.data = np.ascontiguousarray(data)

    @classmethod
    def blank(cls, width: int, height: int, channels: int = 1,
              value: int = 0) -> "ImageBuffer":
        if width < 1 or height < 1:
            raise ValueError(f"image dims must be >= 1, got {width}x{height}")
        return cls(np.full((height, width, channels), value, dtype=np.uint8))

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def __eq__(self, other) -> bool:
        return isinstance(other, ImageBuffer) and np.array_equal(self.data, other.data)

    def __repr__(self) -> str:
        return f"ImageBuffer({self.width}x{self.height}x{self.channels})"


def crop_rect(img: ImageBuffer, rect: AxisAlignedRect) -> ImageBuffer:
    """Copy of the rect region, rounded outward to whole pixels; parts of
    the rect outside the image are zero-filled."""
    x0 = math.floor(rect.x1)
    y0 = math.floor(rect.y1)
    x1 = math.ceil(rect.x2)
    y1 = math.ceil(rect.y2)
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"rect degenerate after outward rounding: {rect}")
    out = np.zeros((y1 - y0, x1 - x0, img.channels), dtype=np.uint8)
    sx0, sx1 = max(0, x0), min(img.width, x1)
    sy0, sy1 = max(0, y0), min(img.height, y1)
    if sx0 < sx1 and sy0 < sy1:
        out[sy0 - y0:sy1 - y0, sx0 - x0:sx1 - x0] = img.data[sy0:sy1, sx0:sx1]
    return ImageBuffer(out)


def pad_to_center(img: ImageBuffer, box_center_in_crop: tuple[float, float]
                  ) -> tuple[ImageBuffer, tuple[int, int]]:
    """Zero-pad so the given point sits at the buffer's geometric center.

    Padding is whole pixels, so the point is centered exactly when twice
    its coordinate is integral and to within 0.25 px otherwise; the
    returned (left, top) translation is what downstream coordinates must
    be shifted by, which keeps the staged warp exact regardless.
    """
    px, py = box_center_in_crop
    dx = int(math.floor((img.width - 2.0 * px) + 0.5))
    dy = int(math.floor((img.height - 2.0 * py) + 0.5))
    pad_l, pad_r = max(0, dx), max(0, -dx)
    pad_t, pad_b = max(0, dy), max(0, -dy)
    if pad_l == pad_r == pad_t == pad_b == 0:
        return img, (0, 0)
    out = np.zeros((img.height + pad_t + pad_b, img.width + pad_l + pad_r,
                    img.channels), dtype=np.uint8)
    out[pad_t:pad_t + img.height, pad_l:pad_l + img.width] = img.data
    return ImageBuffer(out), (pad_l, pad_t)


def sample_bilinear_u8(img: ImageBuffer, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Bilinear samples of the image at continuous coordinates, zero
    outside bounds, rounded half away from zero to uint8.

    sx and sy are same-shaped coordinate arrays; returns uint8 of shape
    sx.shape + (channels,).
    """
    h, w = img.height, img.width
    gx = sx - 0.5
    gy = sy - 0.5
    x0 = np.floor(gx).astype(np.int64)
    y0 = np.floor(gy).astype(np.int64)
    dx = gx - x0
    dy = gy - y0
    acc = np.zeros(sx.shape + (img.channels,), dtype=np.float64)
    data = img.data.astype(np.float64)
    for oy, wy in ((0, 1.0 - dy), (1, dy)):
        yi = y0 + oy
        oky = (yi >= 0) & (yi < h)
        yc = np.clip(yi, 0, h - 1)
        for ox, wx in ((0, 1.0 - dx), (1, dx)):
            xi = x0 + ox
            ok = oky & (xi >= 0) & (xi < w)
            wgt = wx * wy * ok
            acc += wgt[..., None] * data[yc, np.clip(xi, 0, w - 1)]
    return np.clip(np.floor(acc + 0.5), 0.0, 255.0).astype(np.uint8)


def warp_rotate_crop(img: ImageBuffer, box: RotatedBox) -> ImageBuffer:
    """Rotate and crop in one pass: the upright round(w) x round(h) patch
    of the box, bilinearly resampled with zero fill outside the image.

    Output pixel (u, v) samples the input at
    center + R(theta) * (u - w/2 + 0.5, v - h/2 + 0.5), so text running
    along the box's width direction comes out horizontal, left to right.
    """
    if box.w < 0.5 or box.h < 0.5:
        raise ValueError(f"box extent rounds below one pixel: w={box.w}, h={box.h}")
    out_w = max(1, int(math.floor(box.w + 0.5)))
    out_h = max(1, int(math.floor(box.h + 0.5)))
    t = math.radians(box.theta)
    c, s = math.cos(t), math.sin(t)
    lx = np.arange(out_w, dtype=np.float64) - box.w / 2.0 + 0.5
    ly = np.arange(out_h, dtype=np.float64) - box.h / 2.0 + 0.5
    sx = box.cx + lx[None, :] * c - ly[:, None] * s
    sy = box.cy + lx[None, :] * s + ly[:, None] * c
    return ImageBuffer(sample_bilinear_u8(img, sx, sy))


def extract_patch(img: ImageBuffer, box: RotatedBox) -> ImageBuffer:
    """Upright patch for a predicted box: crop the horizontal bounding
    rect, center the box by zero padding, then warp.

    Equivalent to warp_rotate_crop on a zero-extended original image,
    bit for bit, including boxes overflowing the image.
    """
    rect = horizontal_bounding_rect(box)
    crop = crop_rect(img, rect)
    ox = math.floor(rect.x1)
    oy = math.floor(rect.y1)
    padded, (pad_l, pad_t) = pad_to_center(crop, (box.cx - ox, box.cy - oy))
    moved = box.translated(pad_l - ox, pad_t - oy)
    return warp_rotate_crop(padded, moved)


# --- Netpbm image I/O ---------------------------------------------------------
#
# Binary PGM (P5) for grayscale, binary PPM (P6) for RGB, maxval 255.
# The only image interchange formats the tools support; round-trips are
# bit-exact.


def write_netpbm(path, img: ImageBuffer) -> None:
    magic = b"P5" if img.channels == 1 else b"P6"
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n255\n" % (img.width, img.height))
        f.write(img.data.tobytes())


def read_netpbm(path) -> ImageBuffer:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] not in (b"P5", b"P6"):
        raise ValueError(f"not a binary PGM/PPM file: magic {raw[:2]!r}")
    channels = 1 if raw[:2] == b"P5" else 3
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed through the end of the line.
    pos = 2
    fields = []
    while len(fields) < 3:
        m = re.compile(rb"[ \t\r\n]+(?:#[^\n]*\n?)*").match(raw, pos)
        if m:
            pos = m.end()
        tok = re.compile(rb"[0-9]+").match(raw, pos)
        if not tok:
            raise ValueError("malformed netpbm header")
        fields.append(int(tok.group()))
        pos = tok.end()
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"only maxval 255 supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    expected = width * height * channels
    payload = raw[pos:pos + expected]
    if len(payload) != expected:
        raise ValueError(f"netpbm payload size mismatch: expected {expected} "
                         f"bytes, got {len(payload)}")
    data = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, channels)
    return ImageBuffer(data.copy())

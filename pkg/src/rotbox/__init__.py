"""Geometric operator stack for rotated-text detection pipelines.

Rotated boxes and their algebra, rotated anchors, angle-aware labeling,
rotated NMS and proposal generation, rotated RoI align, and upright patch
extraction, plus a synthetic-scene harness and CLI.

Hot kernels run on a compiled extension when available and fall back to
pure Python otherwise; see rotbox._kernels.
"""

from ._kernels import BACKEND as kernel_backend
from .anchors import AnchorSpec, cell_anchors, grid_anchors
from .geom import (AnchorLabel, angle_distance, classify_anchor,
                   classify_anchors, convex_clip, polygon_area, raster_iou,
                   rotated_iou, rotated_iou_matrix)
from .harness import (MatchResult, SceneSpec, augment_rotate, eval_detections,
                      synth_scene)
from .patch import (ImageBuffer, crop_rect, extract_patch, pad_to_center,
                    read_netpbm, warp_rotate_crop, write_netpbm)
from .proposals import (BoxDeltas, ScoredBox, box_with_nms_limit,
                        decode_deltas, encode_deltas, generate_proposals,
                        rotated_nms)
from .rbox import (AxisAlignedRect, RotatedBox, area, horizontal_bounding_rect,
                   normalize_angle, to_corners)
from .rroi import (RoiAlignConfig, Tensor, bilinear_sample, read_rten,
                   rroi_align, write_rten)

__version__ = "0.1.0"

__all__ = [
    "AnchorLabel", "AnchorSpec", "AxisAlignedRect", "BoxDeltas", "ImageBuffer",
    "MatchResult", "RoiAlignConfig", "RotatedBox", "SceneSpec", "ScoredBox",
    "Tensor", "angle_distance", "area", "augment_rotate", "bilinear_sample",
    "box_with_nms_limit", "cell_anchors", "classify_anchor", "classify_anchors",
    "convex_clip", "crop_rect", "decode_deltas", "encode_deltas",
    "eval_detections", "extract_patch", "generate_proposals", "grid_anchors",
    "horizontal_bounding_rect", "kernel_backend", "normalize_angle",
    "pad_to_center", "polygon_area", "raster_iou", "read_netpbm", "read_rten",
    "rotated_iou", "rotated_iou_matrix", "rotated_nms", "rroi_align",
    "synth_scene", "to_corners", "warp_rotate_crop", "write_netpbm",
    "write_rten", "__version__",
]

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel backend.

Twin of rotbox._kernels._fallback: same signatures, same semantics, same
arithmetic ordering (the two backends are cross-checked in the tests).
"""

from libc.math cimport ceil, cos, fabs, floor, hypot, sin
from libc.stdlib cimport free, malloc

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double DEG = 0.017453292519943295  # pi / 180
cdef double CLIP_EPS = 1e-9
cdef double MIN_INTER_AREA = 1e-12


cdef inline void _corners(const double* b, double* px, double* py) noexcept nogil:
    # b = (cx, cy, w, h, theta); vertex order (-,-), (+,-), (+,+), (-,+)
    cdef double t = b[4] * DEG
    cdef double c = cos(t)
    cdef double s = sin(t)
    cdef double wx = 0.5 * b[2] * c
    cdef double wy = 0.5 * b[2] * s
    cdef double hx = -0.5 * b[3] * s
    cdef double hy = 0.5 * b[3] * c
    px[0] = b[0] - wx - hx; py[0] = b[1] - wy - hy
    px[1] = b[0] + wx - hx; py[1] = b[1] + wy - hy
    px[2] = b[0] + wx + hx; py[2] = b[1] + wy + hy
    px[3] = b[0] - wx + hx; py[3] = b[1] - wy + hy


cdef double _inter_area(const double* ax, const double* ay,
                        const double* bx, const double* by) noexcept nogil:
    # Sutherland-Hodgman clip of quad A by quad B, then shoelace area.
    cdef double outx[16]
    cdef double outy[16]
    cdef double inx[16]
    cdef double iny[16]
    cdef int n_out = 4
    cdef int n_in, i, j
    cdef double e1x, e1y, ex, ey, sx, sy, s_cross, p_cross, t
    cdef bint s_in, p_in
    for i in range(4):
        outx[i] = ax[i]
        outy[i] = ay[i]
    for i in range(4):
        if n_out == 0:
            return 0.0
        e1x = bx[i]
        e1y = by[i]
        ex = bx[(i + 1) & 3] - e1x
        ey = by[(i + 1) & 3] - e1y
        n_in = n_out
        for j in range(n_in):
            inx[j] = outx[j]
            iny[j] = outy[j]
        n_out = 0
        sx = inx[n_in - 1]
        sy = iny[n_in - 1]
        s_cross = ex * (sy - e1y) - ey * (sx - e1x)
        s_in = s_cross >= -CLIP_EPS
        for j in range(n_in):
            p_cross = ex * (iny[j] - e1y) - ey * (inx[j] - e1x)
            p_in = p_cross >= -CLIP_EPS
            if p_in:
                if not s_in:
                    t = s_cross / (s_cross - p_cross)
                    outx[n_out] = sx + t * (inx[j] - sx)
                    outy[n_out] = sy + t * (iny[j] - sy)
                    n_out += 1
                outx[n_out] = inx[j]
                outy[n_out] = iny[j]
                n_out += 1
            elif s_in:
                t = s_cross / (s_cross - p_cross)
                outx[n_out] = sx + t * (inx[j] - sx)
                outy[n_out] = sy + t * (iny[j] - sy)
                n_out += 1
            sx = inx[j]
            sy = iny[j]
            s_in = p_in
            s_cross = p_cross
    if n_out < 3:
        return 0.0
    cdef double acc = 0.0
    cdef double x0 = outx[n_out - 1]
    cdef double y0 = outy[n_out - 1]
    for j in range(n_out):
        acc += x0 * outy[j] - outx[j] * y0
        x0 = outx[j]
        y0 = outy[j]
    return fabs(acc) * 0.5


cdef double _pair_iou(const double* a, const double* b) noexcept nogil:
    cdef double ra = 0.5 * hypot(a[2], a[3])
    cdef double rb = 0.5 * hypot(b[2], b[3])
    if hypot(b[0] - a[0], b[1] - a[1]) > ra + rb:
        return 0.0
    cdef double ax[4]
    cdef double ay[4]
    cdef double bx[4]
    cdef double by[4]
    _corners(a, ax, ay)
    _corners(b, bx, by)
    cdef double inter = _inter_area(ax, ay, bx, by)
    if inter < MIN_INTER_AREA:
        return 0.0
    cdef double u = a[2] * a[3] + b[2] * b[3] - inter
    cdef double iou = inter / u
    if iou < 0.0:
        return 0.0
    if iou > 1.0:
        return 1.0
    return iou


def iou_matrix(a, b):
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0]
    cdef Py_ssize_t m = bv.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(m):
                ov[i, j] = _pair_iou(&av[i, 0], &bv[j, 0])
    return out


def iou_pairs(a, b):
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    if av.shape[0] != bv.shape[0]:
        raise ValueError("shape mismatch")
    cdef Py_ssize_t n = av.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            ov[i] = _pair_iou(&av[i, 0], &bv[i, 0])
    return out


def nms_rotated(boxes, scores, double iou_threshold):
    cdef double[:, ::1] bv = np.ascontiguousarray(boxes, dtype=np.float64)
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    cdef cnp.int64_t[::1] order = np.argsort(-scores, kind="stable").astype(np.int64)
    cdef Py_ssize_t n = bv.shape[0]
    keep = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] kv = keep
    cdef Py_ssize_t n_keep = 0
    cdef Py_ssize_t oi, ki
    cdef cnp.int64_t idx
    cdef bint ok
    with nogil:
        for oi in range(n):
            idx = order[oi]
            ok = True
            for ki in range(n_keep):
                if _pair_iou(&bv[idx, 0], &bv[kv[ki], 0]) > iou_threshold:
                    ok = False
                    break
            if ok:
                kv[n_keep] = idx
                n_keep += 1
    return keep[:n_keep].copy()


def raster_iou_pairs(a, b, int resolution):
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    if av.shape[0] != bv.shape[0]:
        raise ValueError("shape mismatch")
    cdef Py_ssize_t n = av.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            ov[i] = _raster_iou_one(&av[i, 0], &bv[i, 0], resolution)
    return out


cdef void _bounds(const double* b, double* x0, double* x1,
                  double* y0, double* y1) noexcept nogil:
    cdef double t = b[4] * DEG
    cdef double rx = 0.5 * b[2] * fabs(cos(t)) + 0.5 * b[3] * fabs(sin(t))
    cdef double ry = 0.5 * b[2] * fabs(sin(t)) + 0.5 * b[3] * fabs(cos(t))
    x0[0] = b[0] - rx
    x1[0] = b[0] + rx
    y0[0] = b[1] - ry
    y1[0] = b[1] + ry


cdef double _raster_iou_one(const double* a, const double* b,
                            int resolution) noexcept nogil:
    cdef double ax0, ax1, ay0, ay1, bx0, bx1, by0, by1
    _bounds(a, &ax0, &ax1, &ay0, &ay1)
    _bounds(b, &bx0, &bx1, &by0, &by1)
    cdef double x0 = min(ax0, bx0)
    cdef double x1 = max(ax1, bx1)
    cdef double y0 = min(ay0, by0)
    cdef double y1 = max(ay1, by1)
    cdef double step_x = (x1 - x0) / resolution
    cdef double step_y = (y1 - y0) / resolution
    cdef double ta = a[4] * DEG
    cdef double tb = b[4] * DEG
    cdef double ca = cos(ta), sa = sin(ta)
    cdef double cb = cos(tb), sb = sin(tb)
    cdef double wa2 = 0.5 * a[2], ha2 = 0.5 * a[3]
    cdef double wb2 = 0.5 * b[2], hb2 = 0.5 * b[3]
    cdef long both = 0, either = 0
    cdef int ix, iy
    cdef double px, py, arow_x, arow_y, brow_x, brow_y
    cdef bint in_a, in_b
    for iy in range(resolution):
        py = y0 + (iy + 0.5) * step_y
        # Row-constant parts of the box-frame coordinates.
        arow_x = (py - a[1]) * sa - a[0] * ca
        arow_y = (py - a[1]) * ca + a[0] * sa
        brow_x = (py - b[1]) * sb - b[0] * cb
        brow_y = (py - b[1]) * cb + b[0] * sb
        for ix in range(resolution):
            px = x0 + (ix + 0.5) * step_x
            in_a = (fabs(px * ca + arow_x) <= wa2 and
                    fabs(-px * sa + arow_y) <= ha2)
            in_b = (fabs(px * cb + brow_x) <= wb2 and
                    fabs(-px * sb + brow_y) <= hb2)
            if in_a and in_b:
                both += 1
                either += 1
            elif in_a or in_b:
                either += 1
    if either == 0:
        return 0.0
    return <double>both / <double>either


def roi_align_rotated(feat, boxes, int pooled_h, int pooled_w,
                      double spatial_scale, int sampling_ratio):
    cdef float[:, :, ::1] fv = np.ascontiguousarray(feat, dtype=np.float32)
    cdef double[:, ::1] bv = np.ascontiguousarray(boxes, dtype=np.float64)
    cdef Py_ssize_t C = fv.shape[0]
    cdef Py_ssize_t H = fv.shape[1]
    cdef Py_ssize_t W = fv.shape[2]
    cdef Py_ssize_t K = bv.shape[0]
    out = np.zeros((K, C, pooled_h, pooled_w), dtype=np.float32)
    cdef float[:, :, :, ::1] ov = out
    cdef double* acc = <double*>malloc(C * sizeof(double))
    if acc == NULL:
        raise MemoryError()
    cdef Py_ssize_t k, r, col, jx, jy, ch
    cdef double cx, cy, w, h, t, c, s, bin_w, bin_h, inv
    cdef int sx, sy
    cdef double lx, ly, x, y, dx, dy, w00, w01, w10, w11, v
    cdef Py_ssize_t x0, y0, x1i, y1i
    cdef bint ok00, ok01, ok10, ok11
    try:
        with nogil:
            for k in range(K):
                cx = bv[k, 0] * spatial_scale
                cy = bv[k, 1] * spatial_scale
                w = bv[k, 2] * spatial_scale
                h = bv[k, 3] * spatial_scale
                t = bv[k, 4] * DEG
                c = cos(t)
                s = sin(t)
                bin_w = w / pooled_w
                bin_h = h / pooled_h
                if sampling_ratio > 0:
                    sx = sampling_ratio
                    sy = sampling_ratio
                else:
                    sx = <int>ceil(bin_w)
                    sy = <int>ceil(bin_h)
                    if sx < 1:
                        sx = 1
                    if sy < 1:
                        sy = 1
                inv = 1.0 / (sx * sy)
                for r in range(pooled_h):
                    for col in range(pooled_w):
                        for ch in range(C):
                            acc[ch] = 0.0
                        for jy in range(sy):
                            ly = -0.5 * h + (r + (jy + 0.5) / sy) * bin_h
                            for jx in range(sx):
                                lx = -0.5 * w + (col + (jx + 0.5) / sx) * bin_w
                                x = cx + lx * c - ly * s
                                y = cy + lx * s + ly * c
                                if x < -1.0 or x > W or y < -1.0 or y > H:
                                    continue
                                x0 = <Py_ssize_t>floor(x)
                                y0 = <Py_ssize_t>floor(y)
                                dx = x - x0
                                dy = y - y0
                                x1i = x0 + 1
                                y1i = y0 + 1
                                w00 = (1.0 - dx) * (1.0 - dy)
                                w01 = dx * (1.0 - dy)
                                w10 = (1.0 - dx) * dy
                                w11 = dx * dy
                                ok00 = 0 <= x0 < W and 0 <= y0 < H
                                ok01 = 0 <= x1i < W and 0 <= y0 < H
                                ok10 = 0 <= x0 < W and 0 <= y1i < H
                                ok11 = 0 <= x1i < W and 0 <= y1i < H
                                for ch in range(C):
                                    v = 0.0
                                    if ok00:
                                        v += w00 * fv[ch, y0, x0]
                                    if ok01:
                                        v += w01 * fv[ch, y0, x1i]
                                    if ok10:
                                        v += w10 * fv[ch, y1i, x0]
                                    if ok11:
                                        v += w11 * fv[ch, y1i, x1i]
                                    acc[ch] += v
                        for ch in range(C):
                            ov[k, ch, r, col] = <float>(acc[ch] * inv)
    finally:
        free(acc)
    return out


# --- Axis-aligned twins (benchmark comparison only) --------------------------


cdef inline double _pair_iou_aabb(const double* a, const double* b) noexcept nogil:
    cdef double ix1 = max(a[0], b[0])
    cdef double iy1 = max(a[1], b[1])
    cdef double ix2 = min(a[2], b[2])
    cdef double iy2 = min(a[3], b[3])
    cdef double iw = ix2 - ix1
    cdef double ih = iy2 - iy1
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    cdef double inter = iw * ih
    cdef double u = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    if u <= 0.0:
        return 0.0
    return inter / u


def iou_matrix_aabb(a, b):
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0]
    cdef Py_ssize_t m = bv.shape[0]
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(m):
                ov[i, j] = _pair_iou_aabb(&av[i, 0], &bv[j, 0])
    return out


def iou_pairs_aabb(a, b):
    cdef double[:, ::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    if av.shape[0] != bv.shape[0]:
        raise ValueError("shape mismatch")
    cdef Py_ssize_t n = av.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            ov[i] = _pair_iou_aabb(&av[i, 0], &bv[i, 0])
    return out


def nms_aabb(boxes, scores, double iou_threshold):
    cdef double[:, ::1] bv = np.ascontiguousarray(boxes, dtype=np.float64)
    scores = np.ascontiguousarray(scores, dtype=np.float64)
    cdef cnp.int64_t[::1] order = np.argsort(-scores, kind="stable").astype(np.int64)
    cdef Py_ssize_t n = bv.shape[0]
    keep = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] kv = keep
    cdef Py_ssize_t n_keep = 0
    cdef Py_ssize_t oi, ki
    cdef cnp.int64_t idx
    cdef bint ok
    with nogil:
        for oi in range(n):
            idx = order[oi]
            ok = True
            for ki in range(n_keep):
                if _pair_iou_aabb(&bv[idx, 0], &bv[kv[ki], 0]) > iou_threshold:
                    ok = False
                    break
            if ok:
                kv[n_keep] = idx
                n_keep += 1
    return keep[:n_keep].copy()


def roi_align_aabb(feat, boxes, int pooled_h, int pooled_w,
                   double spatial_scale, int sampling_ratio):
    cdef float[:, :, ::1] fv = np.ascontiguousarray(feat, dtype=np.float32)
    cdef double[:, ::1] bv = np.ascontiguousarray(boxes, dtype=np.float64)
    cdef Py_ssize_t C = fv.shape[0]
    cdef Py_ssize_t H = fv.shape[1]
    cdef Py_ssize_t W = fv.shape[2]
    cdef Py_ssize_t K = bv.shape[0]
    out = np.zeros((K, C, pooled_h, pooled_w), dtype=np.float32)
    cdef float[:, :, :, ::1] ov = out
    cdef double* acc = <double*>malloc(C * sizeof(double))
    if acc == NULL:
        raise MemoryError()
    cdef Py_ssize_t k, r, col, jx, jy, ch
    cdef double rx1, ry1, rx2, ry2, bin_w, bin_h, inv
    cdef int sx, sy
    cdef double x, y, dx, dy, w00, w01, w10, w11, v
    cdef Py_ssize_t x0, y0, x1i, y1i
    cdef bint ok00, ok01, ok10, ok11
    try:
        with nogil:
            for k in range(K):
                rx1 = bv[k, 0] * spatial_scale
                ry1 = bv[k, 1] * spatial_scale
                rx2 = bv[k, 2] * spatial_scale
                ry2 = bv[k, 3] * spatial_scale
                bin_w = (rx2 - rx1) / pooled_w
                bin_h = (ry2 - ry1) / pooled_h
                if sampling_ratio > 0:
                    sx = sampling_ratio
                    sy = sampling_ratio
                else:
                    sx = <int>ceil(bin_w)
                    sy = <int>ceil(bin_h)
                    if sx < 1:
                        sx = 1
                    if sy < 1:
                        sy = 1
                inv = 1.0 / (sx * sy)
                for r in range(pooled_h):
                    for col in range(pooled_w):
                        for ch in range(C):
                            acc[ch] = 0.0
                        for jy in range(sy):
                            y = ry1 + (r + (jy + 0.5) / sy) * bin_h
                            for jx in range(sx):
                                x = rx1 + (col + (jx + 0.5) / sx) * bin_w
                                if x < -1.0 or x > W or y < -1.0 or y > H:
                                    continue
                                x0 = <Py_ssize_t>floor(x)
                                y0 = <Py_ssize_t>floor(y)
                                dx = x - x0
                                dy = y - y0
                                x1i = x0 + 1
                                y1i = y0 + 1
                                w00 = (1.0 - dx) * (1.0 - dy)
                                w01 = dx * (1.0 - dy)
                                w10 = (1.0 - dx) * dy
                                w11 = dx * dy
                                ok00 = 0 <= x0 < W and 0 <= y0 < H
                                ok01 = 0 <= x1i < W and 0 <= y0 < H
                                ok10 = 0 <= x0 < W and 0 <= y1i < H
                                ok11 = 0 <= x1i < W and 0 <= y1i < H
                                for ch in range(C):
                                    v = 0.0
                                    if ok00:
                                        v += w00 * fv[ch, y0, x0]
                                    if ok01:
                                        v += w01 * fv[ch, y0, x1i]
                                    if ok10:
                                        v += w10 * fv[ch, y1i, x0]
                                    if ok11:
                                        v += w11 * fv[ch, y1i, x1i]
                                    acc[ch] += v
                        for ch in range(C):
                            ov[k, ch, r, col] = <float>(acc[ch] * inv)
    finally:
        free(acc)
    return out

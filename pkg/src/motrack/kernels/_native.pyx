# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the per-frame hot kernels.

Mirrors ``_fallback`` semantics; the suite asserts parity between backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor, sqrt

cnp.import_array()

BACKEND = "native"


def iou_matrix(boxes_a, boxes_b):
    """Pairwise IoU of two sets of (x_left, y_top, w, h) boxes."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] a = np.ascontiguousarray(
        np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] b = np.ascontiguousarray(
        np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4))
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n, m), dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef double ax1, ay1, ax2, ay2, area_a
    cdef double bx1, by1, bx2, by2, area_b
    cdef double iw, ih, inter
    for i in range(n):
        ax1 = a[i, 0]
        ay1 = a[i, 1]
        ax2 = ax1 + a[i, 2]
        ay2 = ay1 + a[i, 3]
        area_a = a[i, 2] * a[i, 3]
        for j in range(m):
            bx1 = b[j, 0]
            by1 = b[j, 1]
            bx2 = bx1 + b[j, 2]
            by2 = by1 + b[j, 3]
            iw = (ax2 if ax2 < bx2 else bx2) - (ax1 if ax1 > bx1 else bx1)
            if iw <= 0.0:
                continue
            ih = (ay2 if ay2 < by2 else by2) - (ay1 if ay1 > by1 else by1)
            if ih <= 0.0:
                continue
            inter = iw * ih
            area_b = b[j, 2] * b[j, 3]
            out[i, j] = inter / (area_a + area_b - inter)
    return out


def min_eig_response(img):
    """Min-eigenvalue corner response of the 3x3-window structure tensor."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] im = np.ascontiguousarray(
        np.asarray(img, dtype=np.float64))
    cdef Py_ssize_t h = im.shape[0]
    cdef Py_ssize_t w = im.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] resp = np.zeros((h, w), dtype=np.float64)
    if h < 5 or w < 5:
        return resp
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gx = np.zeros((h, w), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gy = np.zeros((h, w), dtype=np.float64)
    cdef Py_ssize_t y, x
    cdef int dy, dx
    cdef double sxx, sxy, syy, tr_half, det_term
    for y in range(h):
        for x in range(1, w - 1):
            gx[y, x] = (im[y, x + 1] - im[y, x - 1]) * 0.5
    for y in range(1, h - 1):
        for x in range(w):
            gy[y, x] = (im[y + 1, x] - im[y - 1, x]) * 0.5
    for y in range(2, h - 2):
        for x in range(2, w - 2):
            sxx = 0.0
            sxy = 0.0
            syy = 0.0
            for dy in range(-1, 2):
                for dx in range(-1, 2):
                    sxx += gx[y + dy, x + dx] * gx[y + dy, x + dx]
                    sxy += gx[y + dy, x + dx] * gy[y + dy, x + dx]
                    syy += gy[y + dy, x + dx] * gy[y + dy, x + dx]
            tr_half = 0.5 * (sxx + syy)
            det_term = (0.5 * (sxx - syy)) ** 2 + sxy * sxy
            if det_term < 0.0:
                det_term = 0.0
            resp[y, x] = tr_half - sqrt(det_term)
    return resp


cdef inline double _bilinear(const double[:, ::1] img, double x, double y) noexcept nogil:
    cdef Py_ssize_t ix = <Py_ssize_t>floor(x)
    cdef Py_ssize_t iy = <Py_ssize_t>floor(y)
    cdef double fx = x - ix
    cdef double fy = y - iy
    return ((1.0 - fx) * (1.0 - fy) * img[iy, ix]
            + fx * (1.0 - fy) * img[iy, ix + 1]
            + (1.0 - fx) * fy * img[iy + 1, ix]
            + fx * fy * img[iy + 1, ix + 1])


def lk_refine(prev, cur, pts, guess, int win=21, int max_iter=30, double eps=0.01):
    """Iterative Lucas-Kanade flow refinement at a single pyramid level."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] prev_a = np.ascontiguousarray(
        np.asarray(prev, dtype=np.float64))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cur_a = np.ascontiguousarray(
        np.asarray(cur, dtype=np.float64))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pts_a = np.ascontiguousarray(
        np.asarray(pts, dtype=np.float64).reshape(-1, 2))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] flow = np.array(
        guess, dtype=np.float64).reshape(-1, 2).copy()
    cdef Py_ssize_t n = pts_a.shape[0]
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] status = np.zeros(n, dtype=np.uint8)
    if n == 0:
        return flow, status

    cdef Py_ssize_t h = prev_a.shape[0]
    cdef Py_ssize_t w = prev_a.shape[1]
    cdef int hw = win // 2
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gx_full = np.zeros((h, w), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gy_full = np.zeros((h, w), dtype=np.float64)
    cdef Py_ssize_t y, x
    for y in range(h):
        for x in range(1, w - 1):
            gx_full[y, x] = (prev_a[y, x + 1] - prev_a[y, x - 1]) * 0.5
    for y in range(1, h - 1):
        for x in range(w):
            gy_full[y, x] = (prev_a[y + 1, x] - prev_a[y - 1, x]) * 0.5

    cdef double[:, ::1] prev_v = prev_a
    cdef double[:, ::1] cur_v = cur_a
    cdef double[:, ::1] gxv = gx_full
    cdef double[:, ::1] gyv = gy_full

    cdef cnp.ndarray[cnp.float64_t, ndim=2] patch0 = np.empty((win, win), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pgx = np.empty((win, win), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pgy = np.empty((win, win), dtype=np.float64)

    cdef Py_ssize_t i
    cdef int it, r, c, ok
    cdef double px, py, xs, ys, a, b2, cc, det, min_eig
    cdef double vx, vy, cx, cy, d, b_1, b_2, ex, ey
    for i in range(n):
        px = pts_a[i, 0]
        py = pts_a[i, 1]
        if not (px - hw >= 0.0 and px + hw <= w - 2 and py - hw >= 0.0 and py + hw <= h - 2):
            continue
        a = 0.0
        b2 = 0.0
        cc = 0.0
        for r in range(win):
            ys = py + (r - hw)
            for c in range(win):
                xs = px + (c - hw)
                patch0[r, c] = _bilinear(prev_v, xs, ys)
                pgx[r, c] = _bilinear(gxv, xs, ys)
                pgy[r, c] = _bilinear(gyv, xs, ys)
                a += pgx[r, c] * pgx[r, c]
                b2 += pgx[r, c] * pgy[r, c]
                cc += pgy[r, c] * pgy[r, c]
        det = a * cc - b2 * b2
        min_eig = (0.5 * (a - cc)) ** 2 + b2 * b2
        if min_eig < 0.0:
            min_eig = 0.0
        min_eig = 0.5 * (a + cc) - sqrt(min_eig)
        if det <= 0.0 or min_eig < 1e-9 * win * win:
            continue

        vx = flow[i, 0]
        vy = flow[i, 1]
        ok = 0
        for it in range(max_iter):
            cx = px + vx
            cy = py + vy
            if not (cx - hw >= 0.0 and cx + hw <= w - 2 and cy - hw >= 0.0 and cy + hw <= h - 2):
                ok = 0
                break
            b_1 = 0.0
            b_2 = 0.0
            for r in range(win):
                for c in range(win):
                    d = patch0[r, c] - _bilinear(cur_v, cx + (c - hw), cy + (r - hw))
                    b_1 += d * pgx[r, c]
                    b_2 += d * pgy[r, c]
            ex = (cc * b_1 - b2 * b_2) / det
            ey = (a * b_2 - b2 * b_1) / det
            vx += ex
            vy += ey
            ok = 1
            if ex * ex + ey * ey < eps * eps:
                break
        if ok:
            flow[i, 0] = vx
            flow[i, 1] = vy
            status[i] = 1
    return flow, status

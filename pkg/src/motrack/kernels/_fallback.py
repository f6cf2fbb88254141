"""Pure-numpy implementations of the per-frame hot kernels.

Used when the compiled extension is unavailable (or explicitly disabled via
MOTRACK_PURE_PYTHON=1). Semantics must match ``_native`` exactly; the test
suite checks parity between both backends.
"""

import numpy as np

BACKEND = "numpy"


def iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of two sets of (x_left, y_top, w, h) boxes.

    Zero-area intersections (shared edges) count as no overlap.
    """
    a = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]), dtype=np.float64)

    ax1, ay1 = a[:, 0], a[:, 1]
    ax2, ay2 = a[:, 0] + a[:, 2], a[:, 1] + a[:, 3]
    bx1, by1 = b[:, 0], b[:, 1]
    bx2, by2 = b[:, 0] + b[:, 2], b[:, 1] + b[:, 3]

    iw = np.minimum(ax2[:, None], bx2[None, :]) - np.maximum(ax1[:, None], bx1[None, :])
    ih = np.minimum(ay2[:, None], by2[None, :]) - np.maximum(ay1[:, None], by1[None, :])
    inter = np.where((iw > 0.0) & (ih > 0.0), iw * ih, 0.0)
    area_a = (a[:, 2] * a[:, 3])[:, None]
    area_b = (b[:, 2] * b[:, 3])[None, :]
    union = area_a + area_b - inter
    return np.where(inter > 0.0, inter / union, 0.0)


def min_eig_response(img: np.ndarray) -> np.ndarray:
    """Min-eigenvalue corner response of the 3x3-window structure tensor.

    Gradients are central differences; a one-pixel frame around the valid
    region is zeroed (gradient border plus window border).
    """
    im = np.asarray(img, dtype=np.float64)
    h, w = im.shape
    resp = np.zeros((h, w), dtype=np.float64)
    if h < 5 or w < 5:
        return resp

    gx = np.zeros_like(im)
    gy = np.zeros_like(im)
    gx[:, 1:-1] = (im[:, 2:] - im[:, :-2]) * 0.5
    gy[1:-1, :] = (im[2:, :] - im[:-2, :]) * 0.5

    gxx = gx * gx
    gxy = gx * gy
    gyy = gy * gy

    def box3(m):
        s = np.zeros_like(m)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                s[1:-1, 1:-1] += m[1 + dy : h - 1 + dy, 1 + dx : w - 1 + dx]
        return s

    sxx, sxy, syy = box3(gxx), box3(gxy), box3(gyy)
    tr_half = 0.5 * (sxx + syy)
    det_term = np.sqrt(np.maximum((0.5 * (sxx - syy)) ** 2 + sxy * sxy, 0.0))
    resp = tr_half - det_term
    resp[:2, :] = 0.0
    resp[-2:, :] = 0.0
    resp[:, :2] = 0.0
    resp[:, -2:] = 0.0
    return resp


def _bilinear_patch(img, xs, ys):
    ix = np.floor(xs).astype(np.int64)
    iy = np.floor(ys).astype(np.int64)
    fx = xs - ix
    fy = ys - iy
    i00 = img[iy, ix]
    i01 = img[iy, ix + 1]
    i10 = img[iy + 1, ix]
    i11 = img[iy + 1, ix + 1]
    return (
        (1.0 - fx) * (1.0 - fy) * i00
        + fx * (1.0 - fy) * i01
        + (1.0 - fx) * fy * i10
        + fx * fy * i11
    )


def lk_refine(
    prev: np.ndarray,
    cur: np.ndarray,
    pts: np.ndarray,
    guess: np.ndarray,
    win: int = 21,
    max_iter: int = 30,
    eps: float = 0.01,
):
    """Iterative Lucas-Kanade flow refinement at a single pyramid level.

    ``pts`` are (x, y) positions in ``prev``; ``guess`` is the initial flow
    (from the coarser level). Returns refined flow and a status byte per
    point (0 = window left the image or the patch lacked texture).
    """
    prev = np.asarray(prev, dtype=np.float64)
    cur = np.asarray(cur, dtype=np.float64)
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    n = pts.shape[0]
    flow = np.array(guess, dtype=np.float64).reshape(-1, 2).copy()
    status = np.zeros(n, dtype=np.uint8)
    if n == 0:
        return flow, status

    h, w = prev.shape
    hw = win // 2
    off = np.arange(-hw, hw + 1, dtype=np.float64)
    offx, offy = np.meshgrid(off, off)

    gx_full = np.zeros_like(prev)
    gy_full = np.zeros_like(prev)
    gx_full[:, 1:-1] = (prev[:, 2:] - prev[:, :-2]) * 0.5
    gy_full[1:-1, :] = (prev[2:, :] - prev[:-2, :]) * 0.5

    for i in range(n):
        px, py = pts[i]
        if not (px - hw >= 0.0 and px + hw <= w - 2 and py - hw >= 0.0 and py + hw <= h - 2):
            continue
        xs = px + offx
        ys = py + offy
        patch0 = _bilinear_patch(prev, xs, ys)
        gx = _bilinear_patch(gx_full, xs, ys)
        gy = _bilinear_patch(gy_full, xs, ys)
        a = np.sum(gx * gx)
        b = np.sum(gx * gy)
        c = np.sum(gy * gy)
        det = a * c - b * b
        min_eig = 0.5 * (a + c) - np.sqrt(max((0.5 * (a - c)) ** 2 + b * b, 0.0))
        if det <= 0.0 or min_eig < 1e-9 * win * win:
            continue

        vx, vy = flow[i]
        ok = False
        for _ in range(max_iter):
            cx = px + vx
            cy = py + vy
            if not (cx - hw >= 0.0 and cx + hw <= w - 2 and cy - hw >= 0.0 and cy + hw <= h - 2):
                ok = False
                break
            patch1 = _bilinear_patch(cur, cx + offx, cy + offy)
            diff = patch0 - patch1
            b1 = np.sum(diff * gx)
            b2 = np.sum(diff * gy)
            ex = (c * b1 - b * b2) / det
            ey = (a * b2 - b * b1) / det
            vx += ex
            vy += ey
            ok = True
            if ex * ex + ey * ey < eps * eps:
                break
        if ok:
            flow[i, 0] = vx
            flow[i, 1] = vy
            status[i] = 1
    return flow, status

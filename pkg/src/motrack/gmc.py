"""Global motion compensation.

Estimates the frame-to-frame camera warp from grayscale images: Shi-Tomasi
corners, pyramidal Lucas-Kanade flow, per-cell translation outlier
rejection, then a RANSAC affine fit. Precomputed warps can be loaded from
text files instead of estimating.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

MIN_IMAGE_SIDE = 32


class GmcError(RuntimeError):
    """Motion estimation failed (too few / degenerate correspondences)."""


class WarpFileError(ValueError):
    """Malformed warp file line."""


@dataclass(frozen=True)
class AffineWarp:
    """2x3 frame-to-frame affine [M | T], row-major a11..a23."""

    a11: float = 1.0
    a12: float = 0.0
    a13: float = 0.0
    a21: float = 0.0
    a22: float = 1.0
    a23: float = 0.0

    def __post_init__(self):
        vals = (self.a11, self.a12, self.a13, self.a21, self.a22, self.a23)
        if not all(math.isfinite(v) for v in vals):
            raise GmcError(f"non-finite warp {vals}")
        if abs(self.det()) <= 1e-6:
            raise GmcError(f"degenerate warp, |det M| = {abs(self.det()):g}")

    def det(self) -> float:
        return self.a11 * self.a22 - self.a12 * self.a21

    @property
    def m(self) -> np.ndarray:
        return np.array([[self.a11, self.a12], [self.a21, self.a22]])

    @property
    def t(self) -> np.ndarray:
        return np.array([self.a13, self.a23])

    @classmethod
    def identity(cls) -> "AffineWarp":
        return cls()

    @classmethod
    def from_matrix(cls, mat: np.ndarray) -> "AffineWarp":
        mat = np.asarray(mat, dtype=np.float64)
        return cls(mat[0, 0], mat[0, 1], mat[0, 2], mat[1, 0], mat[1, 1], mat[1, 2])

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.a11, self.a12, self.a13], [self.a21, self.a22, self.a23]]
        )

    def apply(self, pts: np.ndarray) -> np.ndarray:
        """Map (N, 2) points through the warp."""
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        return pts @ self.m.T + self.t

    def compose(self, other: "AffineWarp") -> "AffineWarp":
        """Warp equal to applying ``other`` first, then ``self``."""
        m = self.m @ other.m
        t = self.m @ other.t + self.t
        return AffineWarp(m[0, 0], m[0, 1], t[0], m[1, 0], m[1, 1], t[1])

    def is_identity(self, tol: float = 0.0) -> bool:
        ref = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0)
        vals = (self.a11, self.a12, self.a13, self.a21, self.a22, self.a23)
        return all(abs(v - r) <= tol for v, r in zip(vals, ref))


@dataclass(frozen=True)
class Correspondence:
    """A feature position in the previous frame and its tracked position."""

    prev: tuple[float, float]
    cur: tuple[float, float]

    @property
    def displacement(self) -> tuple[float, float]:
        return (self.cur[0] - self.prev[0], self.cur[1] - self.prev[1])


@dataclass
class GmcConfig:
    max_corners: int = 1000
    quality: float = 0.01
    min_dist: float = 7.0
    pyramid_levels: int = 3
    lk_window: int = 21
    lk_max_iter: int = 30
    lk_eps: float = 0.01
    grid: tuple[int, int] = (10, 10)
    outlier_tol: float = 2.0
    ransac_iters: int = 200
    inlier_tol: float = 1.5
    downscale: int = 1
    seed: int = 0


def _check_image(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"expected 2-D grayscale image, got shape {img.shape}")
    return img


def detect_corners(
    img: np.ndarray,
    max_corners: int = 1000,
    quality: float = 0.01,
    min_dist: float = 7.0,
) -> np.ndarray:
    """Shi-Tomasi corners as an (N, 2) array of (x, y), strongest first.

    Keeps local maxima of the min-eigenvalue response above
    quality * max response, enforcing pairwise distance >= min_dist.
    """
    img = _check_image(img)
    h, w = img.shape
    if h < MIN_IMAGE_SIDE or w < MIN_IMAGE_SIDE:
        raise ValueError(f"image {w}x{h} too small for corner detection")
    if not 0.0 < quality < 1.0:
        raise ValueError(f"quality must be in (0, 1), got {quality}")

    resp = kernels.min_eig_response(img)
    max_resp = resp.max()
    if max_resp <= 0.0:
        return np.zeros((0, 2), dtype=np.float64)

    # 3x3 non-max suppression, then quality gate
    nms = resp.copy()
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dy == 0 and dx == 0:
                continue
            shifted = np.roll(np.roll(resp, dy, axis=0), dx, axis=1)
            nms[shifted > nms] = 0.0
    ys, xs = np.nonzero(nms >= quality * max_resp)
    scores = nms[ys, xs]
    order = np.lexsort((xs, ys, -scores))  # deterministic: score desc, then y, x
    ys, xs = ys[order], xs[order]

    kept: list[tuple[float, float]] = []
    cell = max(min_dist, 1.0)
    buckets: dict[tuple[int, int], list[tuple[float, float]]] = {}
    min_d2 = min_dist * min_dist
    for x, y in zip(xs, ys):
        cx, cy = int(x // cell), int(y // cell)
        ok = True
        for bx in (cx - 1, cx, cx + 1):
            for by in (cy - 1, cy, cy + 1):
                for px, py in buckets.get((bx, by), ()):
                    if (px - x) ** 2 + (py - y) ** 2 < min_d2:
                        ok = False
                        break
                if not ok:
                    break
            if not ok:
                break
        if ok:
            kept.append((float(x), float(y)))
            buckets.setdefault((cx, cy), []).append((float(x), float(y)))
            if len(kept) >= max_corners:
                break
    return np.array(kept, dtype=np.float64).reshape(-1, 2)


def _downsample(img: np.ndarray) -> np.ndarray:
    """Binomial 5-tap blur then 2x decimation."""
    k = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16.0
    padded = np.pad(img, 2, mode="edge")
    tmp = sum(k[i] * padded[:, i : i + img.shape[1]] for i in range(5))
    out = sum(k[i] * tmp[i : i + img.shape[0], :] for i in range(5))
    return out[::2, ::2]


def build_pyramid(img: np.ndarray, levels: int) -> list[np.ndarray]:
    pyr = [img]
    for _ in range(1, levels):
        prev = pyr[-1]
        if min(prev.shape) < 2 * MIN_IMAGE_SIDE:
            break
        pyr.append(_downsample(prev))
    return pyr


def track_flow(
    prev: np.ndarray,
    cur: np.ndarray,
    pts: np.ndarray,
    levels: int = 3,
    win: int = 21,
    max_iter: int = 30,
    eps: float = 0.01,
) -> list[Correspondence]:
    """Pyramidal Lucas-Kanade tracking of ``pts`` from prev to cur."""
    prev = _check_image(prev)
    cur = _check_image(cur)
    if prev.shape != cur.shape:
        raise ValueError(f"image shapes differ: {prev.shape} vs {cur.shape}")
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] == 0:
        return []

    pyr_prev = build_pyramid(prev, levels)
    pyr_cur = build_pyramid(cur, levels)
    n_levels = len(pyr_prev)

    flow = np.zeros_like(pts)
    status = np.ones(pts.shape[0], dtype=np.uint8)
    for lvl in range(n_levels - 1, -1, -1):
        scale = 2.0**lvl
        lvl_pts = pts / scale
        flow, lvl_status = kernels.lk_refine(
            pyr_prev[lvl], pyr_cur[lvl], lvl_pts, flow, win, max_iter, eps
        )
        # coarse levels only refine the guess; validity is decided at full
        # resolution, where a failed point keeps its incoming flow estimate
        if lvl == 0:
            status = lvl_status
        else:
            flow = flow * 2.0

    h, w = cur.shape
    out = []
    for i in range(pts.shape[0]):
        if not status[i]:
            continue
        tx, ty = pts[i, 0] + flow[i, 0], pts[i, 1] + flow[i, 1]
        if not (0.0 <= tx <= w - 1 and 0.0 <= ty <= h - 1):
            continue
        out.append(Correspondence((pts[i, 0], pts[i, 1]), (tx, ty)))
    return out


def reject_outliers(
    corrs: list[Correspondence],
    width: int,
    height: int,
    grid: tuple[int, int] = (10, 10),
    tol: float = 2.0,
) -> list[Correspondence]:
    """Drop correspondences deviating from their grid cell's median shift.

    Deviation is per-axis; cells are laid over the previous frame.
    """
    if not corrs:
        raise ValueError("no correspondences to filter")
    gx, gy = grid
    cells: dict[tuple[int, int], list[Correspondence]] = {}
    for c in corrs:
        cx = min(int(c.prev[0] * gx / width), gx - 1)
        cy = min(int(c.prev[1] * gy / height), gy - 1)
        cells.setdefault((cx, cy), []).append(c)

    kept = []
    for members in cells.values():
        dx = np.median([m.displacement[0] for m in members])
        dy = np.median([m.displacement[1] for m in members])
        for m in members:
            if abs(m.displacement[0] - dx) <= tol and abs(m.displacement[1] - dy) <= tol:
                kept.append(m)
    # preserve input order for determinism
    kept_set = set(id(m) for m in kept)
    return [c for c in corrs if id(c) in kept_set]


def _fit_affine(prev_pts: np.ndarray, cur_pts: np.ndarray) -> np.ndarray | None:
    """Least-squares 2x3 affine mapping prev -> cur, or None if degenerate."""
    n = prev_pts.shape[0]
    a = np.hstack([prev_pts, np.ones((n, 1))])
    try:
        sol, _, rank, _ = np.linalg.lstsq(a, cur_pts, rcond=None)
    except np.linalg.LinAlgError:
        return None
    if rank < 3:
        return None
    return sol.T  # (2, 3)


def ransac_affine(
    corrs: list[Correspondence],
    iters: int = 200,
    inlier_tol: float = 1.5,
    seed: int = 0,
) -> AffineWarp:
    """Robust affine fit: repeated 3-point solves, then inlier refit.

    Deterministic for a fixed seed. Raises GmcError when fewer than 3
    correspondences exist or every minimal sample is degenerate.
    """
    if len(corrs) < 3:
        raise GmcError(f"need >= 3 correspondences, got {len(corrs)}")
    prev_pts = np.array([c.prev for c in corrs], dtype=np.float64)
    cur_pts = np.array([c.cur for c in corrs], dtype=np.float64)
    n = len(corrs)

    rng = np.random.default_rng(seed)
    tol2 = inlier_tol * inlier_tol
    best_mask = None
    best_count = 0
    for _ in range(iters):
        idx = rng.choice(n, size=3, replace=False)
        model = _fit_affine(prev_pts[idx], cur_pts[idx])
        if model is None:
            continue
        proj = prev_pts @ model[:, :2].T + model[:, 2]
        err2 = np.sum((proj - cur_pts) ** 2, axis=1)
        mask = err2 <= tol2
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
            if count == n:
                break
    if best_mask is None or best_count < 3:
        raise GmcError("all RANSAC samples degenerate")

    model = _fit_affine(prev_pts[best_mask], cur_pts[best_mask])
    if model is None:
        raise GmcError("degenerate inlier set")
    try:
        return AffineWarp.from_matrix(model)
    except GmcError:
        raise GmcError("recovered warp is degenerate")


def estimate(
    prev: np.ndarray, cur: np.ndarray, cfg: GmcConfig | None = None
) -> tuple[AffineWarp, bool]:
    """Full estimation pipeline; (identity, False) when estimation fails."""
    cfg = cfg or GmcConfig()
    prev = _check_image(prev)
    cur = _check_image(cur)
    scale = max(int(cfg.downscale), 1)
    if scale > 1:
        prev_s = prev[::scale, ::scale]
        cur_s = cur[::scale, ::scale]
    else:
        prev_s, cur_s = prev, cur

    try:
        pts = detect_corners(prev_s, cfg.max_corners, cfg.quality, cfg.min_dist)
        if pts.shape[0] == 0:
            raise GmcError("no corners detected")
        corrs = track_flow(
            prev_s, cur_s, pts, cfg.pyramid_levels, cfg.lk_window, cfg.lk_max_iter, cfg.lk_eps
        )
        if not corrs:
            raise GmcError("no tracked correspondences")
        h, w = prev_s.shape
        corrs = reject_outliers(corrs, w, h, cfg.grid, cfg.outlier_tol)
        if not corrs:
            raise GmcError("all correspondences rejected as outliers")
        warp = ransac_affine(corrs, cfg.ransac_iters, cfg.inlier_tol, cfg.seed)
    except GmcError as exc:
        log.warning("motion estimation failed (%s); using identity warp", exc)
        return AffineWarp.identity(), False

    if scale > 1:
        # linear part is scale-invariant; translation measured at reduced res
        warp = AffineWarp(
            warp.a11, warp.a12, warp.a13 * scale, warp.a21, warp.a22, warp.a23 * scale
        )
    return warp, True


# ---------------------------------------------------------------------------
# warp files and PGM images


def save_warps(path, warps: dict[int, AffineWarp]) -> None:
    """One line per frame: "frame a11 a12 a13 a21 a22 a23"."""
    with open(path, "w") as f:
        for frame in sorted(warps):
            w = warps[frame]
            f.write(
                f"{frame} {w.a11:.12g} {w.a12:.12g} {w.a13:.12g} "
                f"{w.a21:.12g} {w.a22:.12g} {w.a23:.12g}\n"
            )


def load_warps(path) -> dict[int, AffineWarp]:
    warps: dict[int, AffineWarp] = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 7:
                raise WarpFileError(
                    f"{path}:{lineno}: expected 7 fields, got {len(parts)}"
                )
            try:
                frame = int(parts[0])
                vals = [float(p) for p in parts[1:]]
            except ValueError as exc:
                raise WarpFileError(f"{path}:{lineno}: {exc}") from exc
            warps[frame] = AffineWarp(*vals)
    return warps


class WarpSource:
    """Per-frame warp lookup; missing frames map to identity."""

    def __init__(self, warps: dict[int, AffineWarp] | None = None):
        self._warps = dict(warps or {})

    @classmethod
    def from_file(cls, path) -> "WarpSource":
        return cls(load_warps(path))

    def __call__(self, frame: int) -> AffineWarp:
        return self._warps.get(frame, AffineWarp.identity())


def read_pgm(path) -> np.ndarray:
    """Binary (P5) 8-bit PGM as a float image in [0, 1]."""
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # header: magic, width, height, maxval -- comments allowed
    fields: list[int] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != ord("\n"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if maxval > 255:
        raise ValueError(f"{path}: only 8-bit PGM supported (maxval {maxval})")
    raw = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    return raw.reshape(height, width).astype(np.float64) / maxval


def write_pgm(path, img: np.ndarray) -> None:
    img = np.asarray(img)
    arr = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (arr.shape[1], arr.shape[0]))
        f.write(arr.tobytes())

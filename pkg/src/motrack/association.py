"""Cost matrices (IoU, cosine, gated fusion) and linear assignment."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernels


@dataclass(frozen=True)
class FusionParams:
    theta_iou: float = 0.5
    theta_emb: float = 0.2
    weight: float = 0.98  # weighted-sum comparison mode only

    def __post_init__(self):
        for v in (self.theta_iou, self.theta_emb, self.weight):
            if not 0.0 < v < 1.0:
                raise ValueError(f"fusion parameters must lie in (0, 1), got {v}")


@dataclass
class Assignment:
    matches: list[tuple[int, int]]
    unmatched_tracks: list[int]
    unmatched_dets: list[int]


def iou_cost(pred_boxes: np.ndarray, det_boxes: np.ndarray) -> np.ndarray:
    """1 - IoU for (N, 4) x (M, 4) tlwh arrays."""
    return 1.0 - kernels.iou_matrix(pred_boxes, det_boxes)


def cosine_cost(track_embs: np.ndarray, det_embs: np.ndarray) -> np.ndarray:
    """(1 - cosine similarity) / 2, so the distance lives in [0, 1].

    Both inputs must be unit-norm row vectors of equal dimension.
    """
    a = np.asarray(track_embs, dtype=np.float64)
    b = np.asarray(det_embs, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"embedding dims differ: {a.shape[1]} vs {b.shape[1]}")
    for name, m in (("track", a), ("detection", b)):
        norms = np.linalg.norm(m, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            raise ValueError(f"{name} embeddings must be unit-norm")
    sim = np.clip(a @ b.T, -1.0, 1.0)
    return (1.0 - sim) / 2.0


def fuse(
    d_iou: np.ndarray, d_cos: np.ndarray, p: FusionParams = FusionParams()
) -> np.ndarray:
    """Gated min-fusion of IoU and appearance distances.

    Appearance is halved and kept only where both the appearance and
    proximity gates pass; everywhere else the cost falls back to IoU.
    """
    d_iou = np.asarray(d_iou, dtype=np.float64)
    d_cos = np.asarray(d_cos, dtype=np.float64)
    if d_iou.shape != d_cos.shape:
        raise ValueError(f"shape mismatch: {d_iou.shape} vs {d_cos.shape}")
    gated = np.where(
        (d_cos < p.theta_emb) & (d_iou < p.theta_iou), 0.5 * d_cos, 1.0
    )
    return np.minimum(d_iou, gated)


def weighted_sum(
    d_cos: np.ndarray, d_iou: np.ndarray, weight: float = 0.98
) -> np.ndarray:
    """Classic appearance/motion blend, kept for strategy comparisons."""
    d_cos = np.asarray(d_cos, dtype=np.float64)
    d_iou = np.asarray(d_iou, dtype=np.float64)
    if d_cos.shape != d_iou.shape:
        raise ValueError(f"shape mismatch: {d_cos.shape} vs {d_iou.shape}")
    return weight * d_cos + (1.0 - weight) * d_iou


def solve_assignment(cost: np.ndarray, max_cost: float = 0.8) -> Assignment:
    """Min-cost one-to-one assignment; pairs costlier than max_cost are
    demoted to unmatched. Deterministic for identical inputs."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost matrix must be 2-D, got shape {cost.shape}")
    n, m = cost.shape
    if n == 0 or m == 0:
        return Assignment([], list(range(n)), list(range(m)))

    rows, cols = linear_sum_assignment(cost)
    matches = []
    matched_rows = set()
    matched_cols = set()
    for r, c in zip(rows, cols):
        if cost[r, c] > max_cost:
            continue
        matches.append((int(r), int(c)))
        matched_rows.add(int(r))
        matched_cols.add(int(c))
    return Assignment(
        matches,
        [i for i in range(n) if i not in matched_rows],
        [j for j in range(m) if j not in matched_cols],
    )

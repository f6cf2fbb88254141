"""Bounding boxes in top-left/width/height pixel coordinates, plus IoU."""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels


class InvalidBoxError(ValueError):
    """Box with non-finite fields or non-positive extent."""


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box, MOTChallenge top-left convention."""

    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        vals = (self.x, self.y, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise InvalidBoxError(f"non-finite box {vals}")
        if self.w <= 0 or self.h <= 0:
            raise InvalidBoxError(f"non-positive extent {vals}")

    def tlwh(self) -> np.ndarray:
        return np.array([self.x, self.y, self.w, self.h], dtype=np.float64)


def to_center(b: BBox) -> tuple[float, float, float, float]:
    """(x_center, y_center, w, h) for the Kalman-filter boundary."""
    return (b.x + b.w / 2.0, b.y + b.h / 2.0, b.w, b.h)


def from_center(xc: float, yc: float, w: float, h: float) -> BBox:
    """Inverse of :func:`to_center`."""
    return BBox(xc - w / 2.0, yc - h / 2.0, w, h)


def iou(a: BBox, b: BBox) -> float:
    """Intersection-over-union in [0, 1]; zero-area overlap counts as 0."""
    ix = min(a.x + a.w, b.x + b.w) - max(a.x, b.x)
    if ix <= 0.0:
        return 0.0
    iy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.w * a.h + b.w * b.h - inter)


def iou_matrix(boxes_a: np.ndarray, boxes_b: np.ndarray) -> np.ndarray:
    """Pairwise IoU of two (N, 4) / (M, 4) tlwh arrays."""
    return kernels.iou_matrix(boxes_a, boxes_b)


def boxes_to_array(boxes) -> np.ndarray:
    """Stack BBox objects into an (N, 4) tlwh array."""
    if len(boxes) == 0:
        return np.zeros((0, 4), dtype=np.float64)
    return np.stack([b.tlwh() for b in boxes])

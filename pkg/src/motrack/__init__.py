"""Tracking-by-detection over file-supplied detections and embeddings.

Camera-motion-compensated constant-velocity Kalman tracking with
two-stage association, gated IoU/appearance cost fusion, offline gap
interpolation, and CLEAR-style evaluation (MOTA, IDF1, cumulative MOTA).
"""

from .association import Assignment, FusionParams
from .geometry import BBox
from .gmc import AffineWarp
from .kalman import KalmanState, KfParams
from .kernels import BACKEND as KERNEL_BACKEND
from .tracker import Detection, Track, Tracker, TrackerConfig, TrackState

__version__ = "0.1.0"

__all__ = [
    "AffineWarp",
    "Assignment",
    "BBox",
    "Detection",
    "FusionParams",
    "KERNEL_BACKEND",
    "KalmanState",
    "KfParams",
    "Track",
    "TrackState",
    "Tracker",
    "TrackerConfig",
]

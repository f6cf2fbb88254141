"""Constant-velocity Kalman filter on the 8-dim box state.

State is (x_c, y_c, w, h, dx_c, dy_c, dw, dh). Process and measurement
noise scale with the current box extent, and camera-motion warps can be
folded into the prior before the update.
"""

from dataclasses import dataclass

import numpy as np

from .gmc import AffineWarp

NDIM = 8
ZDIM = 4


@dataclass(frozen=True)
class KfParams:
    sigma_p: float = 0.05
    sigma_v: float = 0.00625
    sigma_m: float = 0.05
    dt: float = 1.0

    def __post_init__(self):
        if min(self.sigma_p, self.sigma_v, self.sigma_m, self.dt) <= 0:
            raise ValueError("Kalman noise factors and dt must be positive")


@dataclass
class KalmanState:
    mean: np.ndarray  # (8,)
    cov: np.ndarray  # (8, 8)

    def copy(self) -> "KalmanState":
        return KalmanState(self.mean.copy(), self.cov.copy())

    def box_center(self) -> np.ndarray:
        return self.mean[:ZDIM].copy()


def _transition(dt: float) -> np.ndarray:
    f = np.eye(NDIM)
    for i in range(ZDIM):
        f[i, i + ZDIM] = dt
    return f


_H = np.hstack([np.eye(ZDIM), np.zeros((ZDIM, ZDIM))])


def _check_measurement(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64).reshape(ZDIM)
    if not np.all(np.isfinite(z)) or z[2] <= 0 or z[3] <= 0:
        raise ValueError(f"invalid measurement {z}")
    return z


def initiate(z: np.ndarray, p: KfParams = KfParams()) -> KalmanState:
    """New state from a first measurement: zero velocity, diagonal cov.

    Position/size stds are 2*sigma_p*{w,h}; velocity stds 10*sigma_v*{w,h}.
    """
    z = _check_measurement(z)
    mean = np.zeros(NDIM)
    mean[:ZDIM] = z
    w, h = z[2], z[3]
    std = np.array(
        [
            2 * p.sigma_p * w,
            2 * p.sigma_p * h,
            2 * p.sigma_p * w,
            2 * p.sigma_p * h,
            10 * p.sigma_v * w,
            10 * p.sigma_v * h,
            10 * p.sigma_v * w,
            10 * p.sigma_v * h,
        ]
    )
    return KalmanState(mean, np.diag(std**2))


def make_Q(prev: KalmanState, p: KfParams = KfParams()) -> np.ndarray:
    """Process noise from the posterior extent (w, h) of the previous step."""
    w, h = prev.mean[2], prev.mean[3]
    std = np.array(
        [
            p.sigma_p * w,
            p.sigma_p * h,
            p.sigma_p * w,
            p.sigma_p * h,
            p.sigma_v * w,
            p.sigma_v * h,
            p.sigma_v * w,
            p.sigma_v * h,
        ]
    )
    return np.diag(std**2)


def make_R(z: np.ndarray, p: KfParams = KfParams()) -> np.ndarray:
    """Measurement noise from the measured extent."""
    z = _check_measurement(z)
    std = np.array(
        [p.sigma_m * z[2], p.sigma_m * z[3], p.sigma_m * z[2], p.sigma_m * z[3]]
    )
    return np.diag(std**2)


def predict(
    s: KalmanState, p: KfParams = KfParams(), shape_frozen: bool = False
) -> KalmanState:
    """Time update. ``shape_frozen`` zeroes the extent velocities first,
    keeping lost tracks from deforming over long prediction runs."""
    q = make_Q(s, p)
    mean = s.mean.copy()
    if shape_frozen:
        mean[6] = 0.0
        mean[7] = 0.0
    f = _transition(p.dt)
    return KalmanState(f @ mean, f @ s.cov @ f.T + q)


def apply_warp(s: KalmanState, a: AffineWarp, correct_cov: bool = True) -> KalmanState:
    """Fold a camera warp into the prior.

    The 2x2 linear part acts on every (x, y)-like state pair; the
    translation shifts only the box center. Covariance correction is
    optional (slow cameras).
    """
    m = a.m
    m8 = np.kron(np.eye(4), m)
    t8 = np.zeros(NDIM)
    t8[0] = a.a13
    t8[1] = a.a23
    mean = m8 @ s.mean + t8
    cov = m8 @ s.cov @ m8.T if correct_cov else s.cov.copy()
    return KalmanState(mean, cov)


def update(s: KalmanState, z: np.ndarray, p: KfParams = KfParams()) -> KalmanState:
    """Measurement update; posterior covariance is re-symmetrized."""
    z = _check_measurement(z)
    r = make_R(z, p)
    innov_cov = _H @ s.cov @ _H.T + r
    gain = np.linalg.solve(innov_cov.T, (s.cov @ _H.T).T).T
    mean = s.mean + gain @ (z - _H @ s.mean)
    cov = (np.eye(NDIM) - gain @ _H) @ s.cov
    cov = 0.5 * (cov + cov.T)
    return KalmanState(mean, cov)

"""Online two-stage tracking pipeline.

Per frame: predict every live track (camera-motion corrected when a warp
is supplied), associate high-confidence detections against tracked + lost
tracks with the fused IoU/appearance cost, recover remaining tracked
tracks from low-confidence detections by IoU, settle unconfirmed tracks,
then spawn new tracks from leftover high-confidence detections.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import association, kalman
from .association import FusionParams
from .gmc import AffineWarp
from .geometry import BBox, boxes_to_array, from_center, to_center
from .kalman import KfParams

log = logging.getLogger(__name__)


class TrackState(Enum):
    NEW = "new"
    TRACKED = "tracked"
    LOST = "lost"
    REMOVED = "removed"


@dataclass
class Detection:
    bbox: BBox
    score: float
    embedding: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")
        if self.embedding is not None:
            emb = np.asarray(self.embedding, dtype=np.float64).ravel()
            norm = float(np.linalg.norm(emb))
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"embedding norm {norm} not unit")
            self.embedding = emb


@dataclass
class TrackerConfig:
    tau: float = 0.6  # high-score split
    eta: float = 0.7  # new-track threshold
    low_floor: float = 0.1
    match_thresh_first: float = 0.8
    match_thresh_second: float = 0.5
    match_thresh_unconfirmed: float = 0.7
    track_buffer: int = 30
    alpha: float = 0.9  # appearance EMA momentum
    fusion: FusionParams = field(default_factory=FusionParams)
    kf: KfParams = field(default_factory=KfParams)
    use_reid: bool = False
    use_cmc: bool = True
    cmc_cov: bool = True
    output_pred: bool = False
    pred_horizon: int = 1
    require_embeddings: bool = False

    def __post_init__(self):
        if not 0.0 < self.low_floor < self.tau <= 1.0:
            raise ValueError("need 0 < low_floor < tau <= 1")
        if not 0.0 < self.eta <= 1.0:
            raise ValueError("eta must be in (0, 1]")
        for t in (
            self.match_thresh_first,
            self.match_thresh_second,
            self.match_thresh_unconfirmed,
        ):
            if not 0.0 < t <= 1.0:
                raise ValueError("match thresholds must be in (0, 1]")
        if self.track_buffer < 1:
            raise ValueError("track_buffer must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")


def split_detections(
    dets: list[Detection], tau: float, low_floor: float
) -> tuple[list[Detection], list[Detection]]:
    """High (> tau) and low (low_floor < score <= tau) detections, in order."""
    high = [d for d in dets if d.score > tau]
    low = [d for d in dets if low_floor < d.score <= tau]
    return high, low


def update_appearance(
    emb: np.ndarray | None, f: np.ndarray, alpha: float
) -> np.ndarray:
    """EMA of the appearance state, renormalized to unit length."""
    if emb is None:
        return f.copy()
    mixed = alpha * emb + (1.0 - alpha) * f
    norm = np.linalg.norm(mixed)
    if norm < 1e-12:  # antipodal degenerate case
        return emb.copy()
    return mixed / norm


class Track:
    def __init__(self, det: Detection, track_id: int, frame: int, cfg: TrackerConfig):
        self.id = track_id
        self.state = TrackState.NEW
        self.kf = kalman.initiate(np.array(to_center(det.bbox)), cfg.kf)
        self.emb = det.embedding.copy() if det.embedding is not None else None
        self.score = det.score
        self.start_frame = frame
        self.last_update_frame = frame
        self.is_activated = False

    @property
    def bbox(self) -> BBox:
        xc, yc, w, h = self.kf.mean[:4]
        return from_center(xc, yc, max(w, 1e-3), max(h, 1e-3))

    def predict(self, cfg: TrackerConfig) -> None:
        frozen = self.state != TrackState.TRACKED
        self.kf = kalman.predict(self.kf, cfg.kf, shape_frozen=frozen)

    def apply_warp(self, warp: AffineWarp, correct_cov: bool) -> None:
        self.kf = kalman.apply_warp(self.kf, warp, correct_cov)

    def update(self, det: Detection, frame: int, cfg: TrackerConfig) -> None:
        self.kf = kalman.update(self.kf, np.array(to_center(det.bbox)), cfg.kf)
        self.state = TrackState.TRACKED
        self.score = det.score
        self.last_update_frame = frame
        if det.embedding is not None and det.score > cfg.tau:
            self.emb = update_appearance(self.emb, det.embedding, cfg.alpha)


class Tracker:
    """Single-sequence online tracker; call :meth:`step` once per frame."""

    def __init__(self, cfg: TrackerConfig | None = None):
        self.cfg = cfg or TrackerConfig()
        self._next_id = 1
        self._last_frame: int | None = None
        self._first_step = True
        self._warned_missing_emb = False
        self.tracked: list[Track] = []  # activated
        self.lost: list[Track] = []
        self.unconfirmed: list[Track] = []

    def _new_id(self) -> int:
        tid = self._next_id
        self._next_id += 1
        return tid

    def _first_cost(
        self, pool: list[Track], high: list[Detection]
    ) -> np.ndarray:
        pred = boxes_to_array([t.bbox for t in pool])
        det = boxes_to_array([d.bbox for d in high])
        d_iou = association.iou_cost(pred, det)
        if not self.cfg.use_reid or not high or not pool:
            return d_iou

        missing = [d for d in high if d.embedding is None]
        if missing:
            if self.cfg.require_embeddings:
                raise ValueError(
                    "use_reid requires embeddings for all high-confidence detections"
                )
            if not self._warned_missing_emb:
                log.warning(
                    "high-confidence detections without embeddings; "
                    "falling back to IoU-only association"
                )
                self._warned_missing_emb = True
            return d_iou

        det_embs = np.stack([d.embedding for d in high])
        d_cos = np.ones_like(d_iou)
        with_emb = [i for i, t in enumerate(pool) if t.emb is not None]
        if with_emb:
            track_embs = np.stack([pool[i].emb for i in with_emb])
            d_cos[with_emb, :] = association.cosine_cost(track_embs, det_embs)
        return association.fuse(d_iou, d_cos, self.cfg.fusion)

    def step(
        self,
        frame_index: int,
        dets: list[Detection],
        warp: AffineWarp | None = None,
    ) -> list[tuple[int, BBox, float]]:
        """Advance one frame; returns (track_id, box, score) output rows."""
        cfg = self.cfg
        if self._last_frame is not None and frame_index != self._last_frame + 1:
            raise ValueError(
                f"frame index must advance by 1: {self._last_frame} -> {frame_index}"
            )
        self._last_frame = frame_index

        high, low = split_detections(dets, cfg.tau, cfg.low_floor)

        # predict and camera-motion-correct every live track
        for t in self.tracked + self.lost + self.unconfirmed:
            t.predict(cfg)
            if cfg.use_cmc and warp is not None:
                t.apply_warp(warp, cfg.cmc_cov)

        # first association: activated (tracked + lost) x high detections
        pool = self.tracked + self.lost
        cost = self._first_cost(pool, high)
        first = association.solve_assignment(cost, cfg.match_thresh_first)

        next_tracked: list[Track] = []
        newly_lost: list[Track] = []
        for ti, di in first.matches:
            pool[ti].update(high[di], frame_index, cfg)
            next_tracked.append(pool[ti])

        # second association: remaining tracked x low detections, IoU only
        remain = [pool[i] for i in first.unmatched_tracks]
        r_tracked = [t for t in remain if t.state == TrackState.TRACKED]
        still_lost = [t for t in remain if t.state == TrackState.LOST]
        d_iou_low = association.iou_cost(
            boxes_to_array([t.bbox for t in r_tracked]),
            boxes_to_array([d.bbox for d in low]),
        )
        second = association.solve_assignment(d_iou_low, cfg.match_thresh_second)
        for ti, di in second.matches:
            r_tracked[ti].update(low[di], frame_index, cfg)
            next_tracked.append(r_tracked[ti])
        for i in second.unmatched_tracks:
            t = r_tracked[i]
            t.state = TrackState.LOST
            newly_lost.append(t)

        # unconfirmed tracks x remaining high detections
        high_remain = [high[j] for j in first.unmatched_dets]
        d_iou_unc = association.iou_cost(
            boxes_to_array([t.bbox for t in self.unconfirmed]),
            boxes_to_array([d.bbox for d in high_remain]),
        )
        unc = association.solve_assignment(d_iou_unc, cfg.match_thresh_unconfirmed)
        for ti, di in unc.matches:
            t = self.unconfirmed[ti]
            t.update(high_remain[di], frame_index, cfg)
            t.is_activated = True
            next_tracked.append(t)
        for i in unc.unmatched_tracks:
            self.unconfirmed[i].state = TrackState.REMOVED

        # expire lost tracks beyond the buffer
        kept_lost: list[Track] = []
        for t in still_lost + newly_lost:
            if frame_index - t.last_update_frame > cfg.track_buffer:
                t.state = TrackState.REMOVED
            else:
                kept_lost.append(t)

        # spawn new tracks from leftover high detections
        new_unconfirmed: list[Track] = []
        for j in unc.unmatched_dets:
            det = high_remain[j]
            if det.score > cfg.eta:
                t = Track(det, self._new_id(), frame_index, cfg)
                if self._first_step:
                    t.state = TrackState.TRACKED
                    t.is_activated = True
                    next_tracked.append(t)
                else:
                    new_unconfirmed.append(t)

        self.tracked = next_tracked
        self.lost = kept_lost
        self.unconfirmed = new_unconfirmed
        self._first_step = False

        out = [(t.id, t.bbox, t.score) for t in self.tracked if t.is_activated]
        if cfg.output_pred:
            horizon = max(int(cfg.pred_horizon), 1)
            for t in self.lost:
                if (
                    t.is_activated
                    and 0 < frame_index - t.last_update_frame <= horizon
                ):
                    out.append((t.id, t.bbox, t.score))
        out.sort(key=lambda row: row[0])
        return out

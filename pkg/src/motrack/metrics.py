"""CLEAR-style evaluation: per-frame matching, MOTA, IDF1, and the
cumulative MOTA (cMOTA) series used to localize failures in time.

Frame matching carries previous gt-pred pairings forward while they still
overlap at the IoU gate, then resolves the rest by min-cost assignment.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .association import solve_assignment
from .geometry import BBox, boxes_to_array, iou_matrix


class UndefinedMetricError(ValueError):
    """Metric requested over zero ground-truth boxes."""


@dataclass
class EvalFrame:
    gt: list[tuple[int, BBox]]
    pred: list[tuple[int, BBox]]

    def __post_init__(self):
        for name, items in (("gt", self.gt), ("pred", self.pred)):
            ids = [i for i, _ in items]
            if len(ids) != len(set(ids)):
                raise ValueError(f"duplicate {name} ids in frame")


@dataclass
class EvalCounts:
    fp: int = 0
    fn: int = 0
    idsw: int = 0
    num_gt: int = 0


def match_frame(
    prev_matches: dict[int, int], frame: EvalFrame, iou_thresh: float = 0.5
) -> tuple[dict[int, int], EvalCounts]:
    """Match one frame's predictions to ground truth.

    ``prev_matches`` maps each gt id to the pred id it was last matched
    with (persisted across frames); a gt re-matching to a different pred
    id counts as an identity switch.
    """
    if not 0.0 < iou_thresh < 1.0:
        raise ValueError(f"iou_thresh must be in (0, 1), got {iou_thresh}")
    gt_ids = [g for g, _ in frame.gt]
    pred_ids = [p for p, _ in frame.pred]
    gt_boxes = boxes_to_array([b for _, b in frame.gt])
    pred_boxes = boxes_to_array([b for _, b in frame.pred])
    ious = iou_matrix(gt_boxes, pred_boxes)
    pred_index = {p: j for j, p in enumerate(pred_ids)}

    matches: dict[int, int] = {}
    used_preds: set[int] = set()
    # keep still-valid pairings from the previous frame
    for i, g in enumerate(gt_ids):
        p = prev_matches.get(g)
        if p is None or p not in pred_index:
            continue
        j = pred_index[p]
        if ious[i, j] >= iou_thresh:
            matches[g] = p
            used_preds.add(p)

    rem_gt = [i for i, g in enumerate(gt_ids) if g not in matches]
    rem_pred = [j for j, p in enumerate(pred_ids) if p not in used_preds]
    if rem_gt and rem_pred:
        cost = 1.0 - ious[np.ix_(rem_gt, rem_pred)]
        assign = solve_assignment(cost, max_cost=1.0 - iou_thresh)
        for a, b in assign.matches:
            matches[gt_ids[rem_gt[a]]] = pred_ids[rem_pred[b]]

    idsw = sum(
        1
        for g, p in matches.items()
        if g in prev_matches and prev_matches[g] != p
    )
    counts = EvalCounts(
        fp=len(pred_ids) - len(matches),
        fn=len(gt_ids) - len(matches),
        idsw=idsw,
        num_gt=len(gt_ids),
    )
    return matches, counts


def accumulate(
    frames: list[EvalFrame], iou_thresh: float = 0.5
) -> list[EvalCounts]:
    """Run CLEAR matching over a sequence; one count record per frame."""
    last: dict[int, int] = {}
    out = []
    for frame in frames:
        matches, counts = match_frame(last, frame, iou_thresh)
        last.update(matches)
        out.append(counts)
    return out


def mota(counts: list[EvalCounts]) -> float:
    """1 - (FP + FN + IDSW) / GT over the whole sequence."""
    num_gt = sum(c.num_gt for c in counts)
    if num_gt == 0:
        raise UndefinedMetricError("MOTA undefined: no ground-truth boxes")
    errors = sum(c.fp + c.fn + c.idsw for c in counts)
    return 1.0 - errors / num_gt


def cmota_series(
    counts: list[EvalCounts], frames: list[int] | None = None
) -> list[tuple[int, float]]:
    """Cumulative MOTA up to each frame; NaN before any gt has appeared.

    The final element equals the sequence MOTA.
    """
    if frames is None:
        frames = list(range(1, len(counts) + 1))
    if len(frames) != len(counts):
        raise ValueError("frames and counts length mismatch")
    out = []
    err = 0
    gt = 0
    for f, c in zip(frames, counts):
        err += c.fp + c.fn + c.idsw
        gt += c.num_gt
        out.append((f, 1.0 - err / gt if gt > 0 else math.nan))
    return out


Trajectory = dict[int, BBox]  # frame -> box


def _trajectories(frames: list[EvalFrame], which: str) -> dict[int, Trajectory]:
    trajs: dict[int, Trajectory] = {}
    for k, frame in enumerate(frames, start=1):
        for i, box in getattr(frame, which):
            trajs.setdefault(i, {})[k] = box
    return trajs


def idf1(frames: list[EvalFrame], iou_thresh: float = 0.5) -> float:
    """Identity F1: optimal global one-to-one trajectory matching."""
    gt_trajs = _trajectories(frames, "gt")
    pred_trajs = _trajectories(frames, "pred")
    total_gt = sum(len(t) for t in gt_trajs.values())
    total_pred = sum(len(t) for t in pred_trajs.values())
    if total_gt == 0:
        raise UndefinedMetricError("IDF1 undefined: no ground-truth boxes")
    if total_pred == 0:
        return 0.0

    gt_ids = sorted(gt_trajs)
    pred_ids = sorted(pred_trajs)
    idtp = np.zeros((len(gt_ids), len(pred_ids)))
    for a, g in enumerate(gt_ids):
        for b, p in enumerate(pred_ids):
            tg, tp = gt_trajs[g], pred_trajs[p]
            common = tg.keys() & tp.keys()
            if not common:
                continue
            fr = sorted(common)
            ious = iou_matrix(
                boxes_to_array([tg[f] for f in fr]),
                boxes_to_array([tp[f] for f in fr]),
            ).diagonal()
            idtp[a, b] = int(np.count_nonzero(ious >= iou_thresh))

    rows, cols = linear_sum_assignment(idtp, maximize=True)
    total_idtp = float(idtp[rows, cols].sum())
    idfp = total_pred - total_idtp
    idfn = total_gt - total_idtp
    return 2.0 * total_idtp / (2.0 * total_idtp + idfp + idfn)


def cidf1_series(
    frames: list[EvalFrame], iou_thresh: float = 0.5
) -> list[tuple[int, float]]:
    """Cumulative IDF1 series (the cMOTA construction applied to IDF1)."""
    out = []
    for k in range(1, len(frames) + 1):
        prefix = frames[:k]
        try:
            val = idf1(prefix, iou_thresh)
        except UndefinedMetricError:
            val = math.nan
        out.append((k, val))
    return out


@dataclass
class Summary:
    mota: float
    idf1: float
    fp: int
    fn: int
    idsw: int
    num_gt: int
    cmota: list[tuple[int, float]]


def evaluate(
    frames: list[EvalFrame], iou_thresh: float = 0.5, frame_numbers=None
) -> Summary:
    counts = accumulate(frames, iou_thresh)
    return Summary(
        mota=mota(counts),
        idf1=idf1(frames, iou_thresh),
        fp=sum(c.fp for c in counts),
        fn=sum(c.fn for c in counts),
        idsw=sum(c.idsw for c in counts),
        num_gt=sum(c.num_gt for c in counts),
        cmota=cmota_series(counts, frame_numbers),
    )


def format_report(s: Summary) -> str:
    lines = [
        f"MOTA  {s.mota:.6f}",
        f"IDF1  {s.idf1:.6f}",
        f"FP    {s.fp}",
        f"FN    {s.fn}",
        f"IDSW  {s.idsw}",
        f"GT    {s.num_gt}",
        "HOTA  not computed (use an external evaluator)",
    ]
    return "\n".join(lines) + "\n"


def write_cmota_csv(path, series: list[tuple[int, float]]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["frame", "cmota"])
        for frame, value in series:
            writer.writerow([frame, "" if math.isnan(value) else f"{value:.9f}"])

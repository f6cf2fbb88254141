"""MOTChallenge-style file I/O: detections, results, embeddings.

Result files are written atomically (temp file + rename) with fixed
formatting so identical runs produce byte-identical output.
"""

import logging
import os
import struct
import tempfile
from collections import defaultdict

import numpy as np

from .geometry import BBox
from .metrics import EvalFrame
from .postprocess import TrackletSeries
from .tracker import Detection

log = logging.getLogger(__name__)

EMBED_MAGIC = b"BTEB"


class ParseError(ValueError):
    """Malformed input file; message carries path and line number."""


def _parse_row(path, lineno: int, line: str) -> tuple[int, int, float, float, float, float, float]:
    parts = line.split(",")
    if len(parts) < 7:
        raise ParseError(f"{path}:{lineno}: expected >= 7 comma-separated fields")
    try:
        frame = int(float(parts[0]))
        obj_id = int(float(parts[1]))
        x, y, w, h, conf = (float(p) for p in parts[2:7])
    except ValueError as exc:
        raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if frame < 1:
        raise ParseError(f"{path}:{lineno}: frame must be >= 1, got {frame}")
    return frame, obj_id, x, y, w, h, conf


def read_detections(path) -> dict[int, list[Detection]]:
    """Per-frame detections from a MOT CSV; the id column is ignored.

    Rows with non-positive extent are dropped with a warning; frames may
    be sparse (missing frames simply have no detections).
    """
    frames: dict[int, list[Detection]] = defaultdict(list)
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            frame, _, x, y, w, h, conf = _parse_row(path, lineno, line)
            if w <= 0 or h <= 0:
                log.warning("%s:%d: non-positive box extent, row skipped", path, lineno)
                continue
            frames[frame].append(Detection(BBox(x, y, w, h), min(max(conf, 0.0), 1.0)))
    return dict(frames)


def read_tracks(path, keep_unflagged: bool = False) -> dict[int, list[tuple[int, BBox]]]:
    """Per-frame (id, box) lists from a MOT result or ground-truth file.

    Ground-truth rows with a 0 consider-flag (column 7) are skipped unless
    ``keep_unflagged`` is set; visibility-based filtering is not applied.
    """
    frames: dict[int, list[tuple[int, BBox]]] = defaultdict(list)
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            frame, obj_id, x, y, w, h, conf = _parse_row(path, lineno, line)
            if conf == 0 and not keep_unflagged:
                continue
            if w <= 0 or h <= 0:
                log.warning("%s:%d: non-positive box extent, row skipped", path, lineno)
                continue
            frames[frame].append((obj_id, BBox(x, y, w, h)))
    return dict(frames)


def _atomic_write(path, write_fn, mode="w"):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".motrack-")
    try:
        with os.fdopen(fd, mode) as f:
            write_fn(f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_results(path, rows: list[tuple[int, int, BBox, float]]) -> None:
    """MOT result rows (frame, id, box, score), sorted by frame then id."""
    ordered = sorted(rows, key=lambda r: (r[0], r[1]))

    def emit(f):
        for frame, obj_id, box, score in ordered:
            f.write(
                f"{frame},{obj_id},{box.x:.2f},{box.y:.2f},"
                f"{box.w:.2f},{box.h:.2f},{score:.6f},-1,-1,-1\n"
            )

    _atomic_write(path, emit)


def read_results_series(path) -> list[TrackletSeries]:
    """Result file regrouped per track id, for post-processing."""
    frames = read_tracks(path, keep_unflagged=True)
    per_id: dict[int, list[tuple[int, BBox, float]]] = defaultdict(list)
    scores: dict[tuple[int, int], float] = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            frame, obj_id, x, y, w, h, conf = _parse_row(path, lineno, line)
            scores[(frame, obj_id)] = conf
    for frame in sorted(frames):
        for obj_id, box in frames[frame]:
            per_id[obj_id].append((frame, box, scores.get((frame, obj_id), 1.0)))
    return [
        TrackletSeries(obj_id, sorted(entries, key=lambda e: e[0]))
        for obj_id, entries in sorted(per_id.items())
    ]


def series_to_rows(series: list[TrackletSeries]) -> list[tuple[int, int, BBox, float]]:
    rows = []
    for s in series:
        for frame, box, score in s.entries:
            rows.append((frame, s.id, box, score))
    return rows


def eval_frames(
    gt: dict[int, list[tuple[int, BBox]]],
    pred: dict[int, list[tuple[int, BBox]]],
) -> tuple[list[EvalFrame], list[int]]:
    """Aligned EvalFrames over the union of frame numbers, in order."""
    frame_numbers = sorted(set(gt) | set(pred))
    frames = [
        EvalFrame(gt.get(k, []), pred.get(k, [])) for k in frame_numbers
    ]
    return frames, frame_numbers


# ---------------------------------------------------------------------------
# embeddings


def write_embeddings(path, records: list[tuple[int, int, np.ndarray]]) -> None:
    """Binary embedding file: magic, u32 dim, then (u32 frame, u32 index,
    dim little-endian f32) records."""
    if not records:
        raise ValueError("no embedding records to write")
    dim = len(np.asarray(records[0][2]).ravel())

    def emit(f):
        f.write(EMBED_MAGIC)
        f.write(struct.pack("<I", dim))
        for frame, det_index, vec in records:
            v = np.asarray(vec, dtype=np.float32).ravel()
            if v.size != dim:
                raise ValueError(
                    f"embedding dim mismatch: expected {dim}, got {v.size}"
                )
            f.write(struct.pack("<II", frame, det_index))
            f.write(v.astype("<f4").tobytes())

    _atomic_write(path, emit, mode="wb")


def _read_embedding_records(path) -> list[tuple[int, int, np.ndarray]]:
    with open(path, "rb") as f:
        head = f.read(4)
        if head == EMBED_MAGIC:
            (dim,) = struct.unpack("<I", f.read(4))
            records = []
            rec_size = 8 + 4 * dim
            while True:
                chunk = f.read(rec_size)
                if not chunk:
                    break
                if len(chunk) != rec_size:
                    raise ParseError(f"{path}: truncated embedding record")
                frame, det_index = struct.unpack_from("<II", chunk)
                vec = np.frombuffer(chunk, dtype="<f4", offset=8).astype(np.float64)
                records.append((frame, det_index, vec))
            return records

    # CSV fallback: frame,det_index,v0,...,v{D-1}
    records = []
    dim = None
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 3:
                raise ParseError(f"{path}:{lineno}: expected frame,det_index,v0,...")
            try:
                frame = int(parts[0])
                det_index = int(parts[1])
                vec = np.array([float(p) for p in parts[2:]], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
            if dim is None:
                dim = vec.size
            elif vec.size != dim:
                raise ParseError(
                    f"{path}:{lineno}: embedding dim {vec.size} != {dim}"
                )
            records.append((frame, det_index, vec))
    return records


def read_embeddings(path, dets: dict[int, list[Detection]]) -> None:
    """Attach vectors to detections in place; vectors are L2-normalized."""
    for frame, det_index, vec in _read_embedding_records(path):
        if frame not in dets or det_index >= len(dets[frame]):
            raise ParseError(
                f"{path}: embedding for nonexistent detection "
                f"(frame {frame}, index {det_index})"
            )
        norm = float(np.linalg.norm(vec))
        if norm < 1e-12:
            raise ParseError(
                f"{path}: zero embedding vector (frame {frame}, index {det_index})"
            )
        dets[frame][det_index].embedding = vec / norm

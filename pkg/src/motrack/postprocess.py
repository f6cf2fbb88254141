"""Offline linear interpolation of per-track gaps."""

from dataclasses import dataclass

from .geometry import BBox


@dataclass
class TrackletSeries:
    id: int
    entries: list[tuple[int, BBox, float]]  # (frame, box, score), frames increasing

    def __post_init__(self):
        frames = [f for f, _, _ in self.entries]
        if any(b >= a for a, b in zip(frames[1:], frames)):
            raise ValueError(f"track {self.id}: frames not strictly increasing")


def interpolate(series: TrackletSeries, max_gap: int = 20) -> TrackletSeries:
    """Fill gaps of at most ``max_gap`` frames linearly (boxes and scores).

    A gap qualifies when consecutive entries are f1 < f2 with
    1 < f2 - f1 <= max_gap; larger gaps are left untouched. Idempotent.
    """
    out: list[tuple[int, BBox, float]] = []
    for (f1, b1, s1), (f2, b2, s2) in zip(series.entries, series.entries[1:]):
        out.append((f1, b1, s1))
        gap = f2 - f1
        if 1 < gap <= max_gap:
            for f in range(f1 + 1, f2):
                w = (f - f1) / gap
                box = BBox(
                    b1.x + w * (b2.x - b1.x),
                    b1.y + w * (b2.y - b1.y),
                    b1.w + w * (b2.w - b1.w),
                    b1.h + w * (b2.h - b1.h),
                )
                out.append((f, box, s1 + w * (s2 - s1)))
    if series.entries:
        out.append(series.entries[-1])
    return TrackletSeries(series.id, out)


def interpolate_all(
    series: list[TrackletSeries], max_gap: int = 20
) -> list[TrackletSeries]:
    return [interpolate(s, max_gap) for s in series]

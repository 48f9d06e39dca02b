"""Label corner events against intensity-corner trajectories.

Tracks are time-parameterized (t, x, y) samples of corner positions,
supplied as CSV (``track_id,t,x,y`` with t in seconds). An event is
labeled by its Euclidean distance to the nearest live track at the
event's timestamp: within 1 px positive, within (1, 5] px negative,
farther (or with no live track) discarded. Discarding far events keeps
missed intensity corners from polluting the negatives.

Ground-truth quality is summarized by replaying the Harris detector on
the binary event surface and averaging its response over the positive
events, together with the mean positive count per frame period.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import IntEnum
from typing import IO, Iterable, Sequence

import numpy as np

from .detectors import EvHarrisConfig, EvHarrisDetector
from .events import Event, StreamFormatError, SurfaceState

POSITIVE_RADIUS = 1.0
NEGATIVE_RADIUS = 5.0
DEFAULT_FRAME_PERIOD = 1.0 / 24.0


class EventLabel(IntEnum):
    DISCARDED = 0
    POSITIVE = 1
    NEGATIVE = 2


@dataclass
class Track:
    """One corner trajectory: strictly increasing sample times (us)."""

    track_id: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        self.t = np.asarray(self.t, dtype=np.int64)
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if not (len(self.t) == len(self.x) == len(self.y)):
            raise ValueError(f"track {self.track_id}: ragged sample arrays")
        if len(self.t) < 1:
            raise ValueError(f"track {self.track_id}: empty")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError(f"track {self.track_id}: sample times not strictly increasing")

    @property
    def span(self) -> tuple[int, int]:
        return int(self.t[0]), int(self.t[-1])


@dataclass
class TrajectorySet:
    """All tracks of a scene plus the interpolation mode."""

    tracks: list[Track]
    interpolation: str = "linear"

    def __post_init__(self) -> None:
        if self.interpolation not in ("linear", "cubic"):
            raise ValueError(f"unknown interpolation {self.interpolation!r}")
        self._splines: dict[str, tuple] = {}

    def _spline(self, track: Track):
        cached = self._splines.get(track.track_id)
        if cached is None:
            from scipy.interpolate import CubicSpline

            if len(track.t) < 2:
                raise ValueError(f"track {track.track_id}: cubic needs >= 2 samples")
            cached = (CubicSpline(track.t, track.x), CubicSpline(track.t, track.y))
            self._splines[track.track_id] = cached
        return cached

    def positions_at(self, track: Track, t_us: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized track positions; callers must mask to the span."""
        if self.interpolation == "cubic" and len(track.t) >= 2:
            sx, sy = self._spline(track)
            return sx(t_us), sy(t_us)
        return (
            np.interp(t_us, track.t, track.x),
            np.interp(t_us, track.t, track.y),
        )


def trajectory_position(
    track: Track, t_us: int, interpolation: str = "linear"
) -> tuple[float, float] | None:
    """Track position at a timestamp, or None outside the track's span."""
    lo, hi = track.span
    if t_us < lo or t_us > hi:
        return None
    traj = TrajectorySet([track], interpolation)
    xs, ys = traj.positions_at(track, np.asarray([t_us]))
    return float(xs[0]), float(ys[0])


def label_event(
    e: Event,
    trajectories: TrajectorySet,
    positive_radius: float = POSITIVE_RADIUS,
    negative_radius: float = NEGATIVE_RADIUS,
) -> EventLabel:
    label, _ = label_with_distance(e, trajectories, positive_radius, negative_radius)
    return label


def label_with_distance(
    e: Event,
    trajectories: TrajectorySet,
    positive_radius: float = POSITIVE_RADIUS,
    negative_radius: float = NEGATIVE_RADIUS,
) -> tuple[EventLabel, float | None]:
    """Label one event; the distance is None when no track is live."""
    best: float | None = None
    for track in trajectories.tracks:
        pos = trajectory_position(track, e.t, trajectories.interpolation)
        if pos is None:
            continue
        d = float(np.hypot(pos[0] - e.x, pos[1] - e.y))
        if best is None or d < best:
            best = d
    return _classify(best, positive_radius, negative_radius), best


def _classify(d: float | None, positive_radius: float, negative_radius: float) -> EventLabel:
    if d is None or d > negative_radius:
        return EventLabel.DISCARDED
    if d <= positive_radius:
        return EventLabel.POSITIVE
    return EventLabel.NEGATIVE


def label_events(
    events: Sequence[Event],
    trajectories: TrajectorySet,
    positive_radius: float = POSITIVE_RADIUS,
    negative_radius: float = NEGATIVE_RADIUS,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized labeling of a whole stream.

    Returns (labels, distances) aligned with the input; distances are
    NaN where no track covers the event time.
    """
    n = len(events)
    ts = np.fromiter((e.t for e in events), dtype=np.int64, count=n)
    xs = np.fromiter((e.x for e in events), dtype=np.float64, count=n)
    ys = np.fromiter((e.y for e in events), dtype=np.float64, count=n)
    best = np.full(n, np.inf)
    for track in trajectories.tracks:
        lo, hi = track.span
        live = (ts >= lo) & (ts <= hi)
        if not live.any():
            continue
        tx, ty = trajectories.positions_at(track, ts[live])
        d = np.hypot(tx - xs[live], ty - ys[live])
        best[live] = np.minimum(best[live], d)
    labels = np.full(n, int(EventLabel.DISCARDED), dtype=np.int8)
    labels[best <= negative_radius] = int(EventLabel.NEGATIVE)
    labels[best <= positive_radius] = int(EventLabel.POSITIVE)
    distances = np.where(np.isfinite(best), best, np.nan)
    return labels, distances


@dataclass(frozen=True)
class GroundTruthScore:
    """Quality summary of a labeled stream."""

    n_positive: int
    count_per_frame: float
    mean_score: float | None


def score_ground_truth(
    events: Sequence[Event],
    trajectories: TrajectorySet,
    evharris_cfg: EvHarrisConfig | None = None,
    *,
    width: int = 240,
    height: int = 180,
    frame_period: float = DEFAULT_FRAME_PERIOD,
    positive_radius: float = POSITIVE_RADIUS,
    negative_radius: float = NEGATIVE_RADIUS,
) -> GroundTruthScore:
    """Mean Harris response over positive events and positives per frame.

    The full stream is replayed through the Harris detector so each
    positive event is scored against the surface it actually saw;
    positives inside the border margin contribute to the count but not
    to the mean. With no positive events the mean is reported absent.
    """
    labels, _ = label_events(events, trajectories, positive_radius, negative_radius)
    detector = EvHarrisDetector(evharris_cfg or EvHarrisConfig())
    state = SurfaceState(width, height)
    total = 0.0
    n_scored = 0
    n_positive = 0
    for e, label in zip(events, labels):
        e = state.ingest(e)
        r = detector.detect(state, e)
        if label != int(EventLabel.POSITIVE):
            continue
        n_positive += 1
        if r is not None:
            total += r.score
            n_scored += 1
    if not events:
        return GroundTruthScore(0, 0.0, None)
    span_s = (events[-1].t - events[0].t) / 1e6
    n_frames = max(1, int(span_s / frame_period) + 1)
    mean_score = total / n_scored if n_scored else None
    return GroundTruthScore(n_positive, n_positive / n_frames, mean_score)


# --- track and label files ---------------------------------------------------


def load_tracks(path: str, interpolation: str = "linear") -> TrajectorySet:
    """Read ``track_id,t,x,y`` CSV (t in seconds, optional header)."""
    samples: dict[str, list[tuple[int, float, float]]] = {}
    order: list[str] = []
    with open(path, "r", encoding="ascii", newline="") as fh:
        for line_no, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            if line_no == 1 and row[0].strip() == "track_id":
                continue
            if len(row) != 4:
                raise StreamFormatError(line_no, ",".join(row), "expected 'track_id,t,x,y'")
            try:
                tid = row[0].strip()
                t_us = int(round(float(row[1]) * 1e6))
                x = float(row[2])
                y = float(row[3])
            except ValueError as err:
                raise StreamFormatError(line_no, ",".join(row), str(err)) from None
            if tid not in samples:
                samples[tid] = []
                order.append(tid)
            samples[tid].append((t_us, x, y))
    tracks = []
    for tid in order:
        rows = samples[tid]
        tracks.append(
            Track(
                track_id=tid,
                t=np.array([r[0] for r in rows], dtype=np.int64),
                x=np.array([r[1] for r in rows]),
                y=np.array([r[2] for r in rows]),
            )
        )
    return TrajectorySet(tracks, interpolation)


def save_tracks(trajectories: TrajectorySet, dest: str | IO[str]) -> None:
    if isinstance(dest, str):
        with open(dest, "w", encoding="ascii", newline="") as fh:
            save_tracks(trajectories, fh)
        return
    dest.write("track_id,t,x,y\n")
    for track in trajectories.tracks:
        for t, x, y in zip(track.t, track.x, track.y):
            dest.write(f"{track.track_id},{t / 1e6:.6f},{x:.6f},{y:.6f}\n")


def write_labels(
    events: Sequence[Event],
    labels: Iterable[int],
    distances: Iterable[float],
    dest: str | IO[str],
) -> None:
    """Write ``t,x,y,p,label,distance`` rows (distance blank if unknown)."""
    if isinstance(dest, str):
        with open(dest, "w", encoding="ascii", newline="") as fh:
            write_labels(events, labels, distances, fh)
        return
    names = {int(v): v.name.lower() for v in EventLabel}
    dest.write("t,x,y,p,label,distance\n")
    for e, label, d in zip(events, labels, distances):
        d_txt = "" if d is None or not np.isfinite(d) else f"{d:.6f}"
        dest.write(f"{e.t / 1e6:.6f},{e.x},{e.y},{int(e.p)},{names[int(label)]},{d_txt}\n")

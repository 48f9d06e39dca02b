"""Evaluation metrics and the per-event timing benchmark.

Reduction rate is the fraction of input events classified as corners;
the confusion counts treat the final corner stream as a binary
classifier over labeled events (discarded labels are excluded from
every cell). Scene reports combine into an overall report with rates
averaged under event-count weights and counts summed.

The benchmark times the detector-only and detector+filter pipelines
over a preloaded in-memory stream (parsing cost excluded), discards a
warm-up run of each arm, and reports nanoseconds per event.
"""

from __future__ import annotations

import json
import statistics
import time
import warnings
from dataclasses import dataclass, fields
from typing import IO, Callable, Sequence

import numpy as np

from .anms import AnmsConfig, run_pipeline
from .events import Event
from .ground_truth import EventLabel

BENCH_MIN_EVENTS = 100_000


@dataclass
class MetricsReport:
    """Per-scene (or overall) evaluation figures; absent values are None."""

    n_total: int = 0
    n_corner: int = 0
    reduction_rate: float | None = None
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    tpr: float | None = None
    fpr: float | None = None
    accuracy: float | None = None
    ns_per_event_median: float | None = None
    ns_per_event_mean: float | None = None


def reduction_rate(n_corner: int, n_total: int) -> float | None:
    """Corner-event share of the stream; None when the stream is empty."""
    if n_total == 0:
        return None
    if not 0 <= n_corner <= n_total:
        raise ValueError(f"invalid counts: {n_corner} corners of {n_total}")
    return n_corner / n_total


def confusion(
    kept: Sequence[bool] | np.ndarray, labels: Sequence[int] | np.ndarray
) -> tuple[int, int, int, int]:
    """(tp, fp, tn, fn) of kept-vs-label; discarded labels count nowhere."""
    kept = np.asarray(kept, dtype=bool)
    labels = np.asarray(labels)
    if kept.shape != labels.shape:
        raise ValueError("kept flags and labels must align")
    pos = labels == int(EventLabel.POSITIVE)
    neg = labels == int(EventLabel.NEGATIVE)
    tp = int(np.count_nonzero(pos & kept))
    fn = int(np.count_nonzero(pos & ~kept))
    fp = int(np.count_nonzero(neg & kept))
    tn = int(np.count_nonzero(neg & ~kept))
    return tp, fp, tn, fn


def classification_report(
    n_total: int,
    n_corner: int,
    kept: Sequence[bool] | np.ndarray,
    labels: Sequence[int] | np.ndarray,
) -> MetricsReport:
    """Assemble a full report from stream counts and labeled decisions."""
    tp, fp, tn, fn = confusion(kept, labels)
    return MetricsReport(
        n_total=n_total,
        n_corner=n_corner,
        reduction_rate=reduction_rate(n_corner, n_total),
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        tpr=tp / (tp + fn) if tp + fn else None,
        fpr=fp / (fp + tn) if fp + tn else None,
        accuracy=(tp + tn) / (tp + fp + tn + fn) if tp + fp + tn + fn else None,
    )


def _weighted_mean(pairs: list[tuple[float | None, float]]) -> float | None:
    usable = [(v, w) for v, w in pairs if v is not None]
    total = sum(w for _, w in usable)
    if not usable or total <= 0:
        return None
    return sum(v * w for v, w in usable) / total


def weighted_overall(
    per_scene: Sequence[tuple[MetricsReport, float]]
) -> MetricsReport | None:
    """Combine scene reports: rates as weighted means, counts summed."""
    if not per_scene:
        return None
    if any(w <= 0 for _, w in per_scene):
        raise ValueError("weights must be positive")
    out = MetricsReport()
    for name in ("n_total", "n_corner", "tp", "fp", "tn", "fn"):
        setattr(out, name, sum(getattr(r, name) for r, _ in per_scene))
    for name in (
        "reduction_rate",
        "tpr",
        "fpr",
        "accuracy",
        "ns_per_event_median",
        "ns_per_event_mean",
    ):
        setattr(out, name, _weighted_mean([(getattr(r, name), w) for r, w in per_scene]))
    return out


@dataclass(frozen=True)
class TimingSummary:
    mean_ns: float
    median_ns: float


@dataclass(frozen=True)
class BenchResult:
    n_events: int
    repetitions: int
    without_anms: TimingSummary
    with_anms: TimingSummary
    increase_rate: float  # (median with - median without) / median without
    low_confidence: bool


def bench(
    events: Sequence[Event],
    detector_factory: Callable[[], object],
    anms_cfg: AnmsConfig | None = None,
    *,
    repetitions: int = 5,
    min_events: int = BENCH_MIN_EVENTS,
    width: int = 240,
    height: int = 180,
) -> BenchResult:
    """Per-event cost of the pipeline with and without the filter.

    Events must already be in memory; each arm gets one discarded
    warm-up run, then ``repetitions`` timed runs with fresh state.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    events = list(events)
    n = len(events)
    if n == 0:
        raise ValueError("cannot benchmark an empty stream")
    low_confidence = n < min_events
    if low_confidence:
        warnings.warn(
            f"benchmark stream has {n} events (< {min_events}); timings are low-confidence",
            stacklevel=2,
        )

    def run_once(anms: bool) -> float:
        detector = detector_factory()
        start = time.perf_counter_ns()
        run_pipeline(events, detector, anms_cfg, width=width, height=height, anms=anms)
        return (time.perf_counter_ns() - start) / n

    run_once(False)
    run_once(True)
    without = []
    with_ = []
    for _ in range(repetitions):
        without.append(run_once(False))
        with_.append(run_once(True))
    s_without = TimingSummary(statistics.fmean(without), statistics.median(without))
    s_with = TimingSummary(statistics.fmean(with_), statistics.median(with_))
    return BenchResult(
        n_events=n,
        repetitions=repetitions,
        without_anms=s_without,
        with_anms=s_with,
        increase_rate=(s_with.median_ns - s_without.median_ns) / s_without.median_ns,
        low_confidence=low_confidence,
    )


# --- machine-readable emission -----------------------------------------------

REPORT_COLUMNS = (
    "scene",
    "detector",
    "anms",
    "n_total",
    "n_corner",
    "reduction_rate",
    "tp",
    "fp",
    "tn",
    "fn",
    "tpr",
    "fpr",
    "accuracy",
)


def report_row(scene: str, detector: str, with_anms: bool, report: MetricsReport) -> dict:
    row = {"scene": scene, "detector": detector, "anms": "with" if with_anms else "without"}
    for f in fields(MetricsReport):
        if f.name.startswith("ns_per_event"):
            continue
        row[f.name] = getattr(report, f.name)
    return row


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_report_csv(rows: Sequence[dict], dest: str | IO[str]) -> None:
    if isinstance(dest, str):
        with open(dest, "w", encoding="ascii", newline="") as fh:
            write_report_csv(rows, fh)
        return
    dest.write(",".join(REPORT_COLUMNS) + "\n")
    for row in rows:
        dest.write(",".join(_format_cell(row.get(col)) for col in REPORT_COLUMNS) + "\n")


def write_report_json(rows: Sequence[dict], dest: str | IO[str]) -> None:
    if isinstance(dest, str):
        with open(dest, "w", encoding="ascii") as fh:
            write_report_json(rows, fh)
        return
    json.dump(list(rows), dest, indent=2, sort_keys=True)
    dest.write("\n")

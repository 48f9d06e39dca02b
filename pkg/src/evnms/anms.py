"""Asynchronous non-maximum suppression over decayed score surfaces.

The filter consumes the corner stream a detector accepts and keeps an
event only if it is the running local maximum of the *decayed* score
surface: each surviving score is weighted by exp(-age / (k * tau)),
where age is read off the SAE, so older candidates fade instead of
suppressing fresh corners forever. tau adapts to local motion speed as
the mean age of the most recent surface timestamps inside the window,
which keeps the suppression horizon proportional to the local event
rate.

Decision rule for an incoming scored event (after its own (t, score)
is written to the surfaces, so its decay weight is exactly 1): keep it
iff its value attains the maximum of its same-polarity window. Ties
keep the event.

All score/age bookkeeping is per polarity. Timestamps are integer
microseconds; ages enter the exponent in double precision seconds, and
k * tau is floored at one timestamp tick (1 us) so the exponent stays
finite.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .events import Event, SurfaceState

TICK_SECONDS = 1e-6


@dataclass
class AnmsConfig:
    """Suppression window, decay multiplier and adaptive-tau settings.

    ``sae_policy`` selects which events refresh the ages the decay sees:
    ``"all"`` (default) shares the global SAE every event updates, while
    ``"corners"`` gives the filter a private SAE touched only by
    detector-accepted events.
    """

    window_radius: int = 4
    k: float = 20.0
    tau_fallback: float = 0.05
    tau_neighbors: int = 5
    sae_policy: str = "all"

    def __post_init__(self) -> None:
        if self.window_radius < 1:
            raise ValueError(f"window_radius must be >= 1, got {self.window_radius}")
        if self.k <= 0:
            raise ValueError(f"k must be > 0, got {self.k}")
        if self.tau_fallback <= 0:
            raise ValueError(f"tau_fallback must be > 0, got {self.tau_fallback}")
        if self.tau_neighbors < 1:
            raise ValueError(f"tau_neighbors must be >= 1, got {self.tau_neighbors}")
        if self.sae_policy not in ("all", "corners"):
            raise ValueError(f"unknown sae_policy {self.sae_policy!r}")


@dataclass(frozen=True)
class DecayedWindow:
    """Decayed score values around one event (clipped at image borders)."""

    values: np.ndarray
    center: float


def decay_coefficient(age_seconds, k: float, tau: float):
    """Exponential decay weight exp(-age / (k * tau)) in (0, 1].

    Accepts a scalar age or an ndarray of ages. k * tau is floored at
    one timestamp tick.
    """
    ktau = k * tau
    if ktau < TICK_SECONDS:
        ktau = TICK_SECONDS
    out = np.exp(-np.asarray(age_seconds, dtype=np.float64) / ktau)
    if np.isscalar(age_seconds) or np.ndim(age_seconds) == 0:
        return float(out)
    return out


def _window_bounds(state: SurfaceState, e: Event, radius: int) -> tuple[int, int, int, int]:
    x0 = e.x - radius
    if x0 < 0:
        x0 = 0
    y0 = e.y - radius
    if y0 < 0:
        y0 = 0
    x1 = e.x + radius + 1
    if x1 > state.width:
        x1 = state.width
    y1 = e.y + radius + 1
    if y1 > state.height:
        y1 = state.height
    return x0, y0, x1, y1


def compute_tau(state: SurfaceState, e: Event, cfg: AnmsConfig) -> float:
    """Adaptive decay horizon in seconds.

    Mean age (current event minus surface timestamp) of the most recent
    ``tau_neighbors`` same-polarity cells inside the window, the event's
    own cell excluded. Falls back to ``tau_fallback`` when the window
    holds no fired neighbor, and never returns less than one tick.
    """
    x0, y0, x1, y1 = _window_bounds(state, e, cfg.window_radius)
    win = state.sae[e.p, y0:y1, x0:x1]
    mask = win >= 0
    mask[e.y - y0, e.x - x0] = False
    ages = (e.t - win)[mask]
    if ages.size == 0:
        tau = cfg.tau_fallback
    else:
        n = cfg.tau_neighbors
        if ages.size > n:
            ages = np.partition(ages, n - 1)[:n]
        tau = (int(ages.sum()) / ages.size) * TICK_SECONDS
    if tau < TICK_SECONDS:
        tau = TICK_SECONDS
    return tau


def decayed_window(state: SurfaceState, e: Event, tau: float, cfg: AnmsConfig) -> DecayedWindow:
    """Decayed scores of the same-polarity window centered on the event.

    Each in-bounds cell holds exp(-age / (k * tau)) times its stored
    score; never-fired cells hold 0. Assumes the event's own (t, score)
    has already been written, so the center weight is exactly 1.
    """
    x0, y0, x1, y1 = _window_bounds(state, e, cfg.window_radius)
    win_t = state.sae[e.p, y0:y1, x0:x1]
    win_s = state.ssae[e.p, y0:y1, x0:x1]
    ktau = cfg.k * tau
    if ktau < TICK_SECONDS:
        ktau = TICK_SECONDS
    lam = np.exp(-((e.t - win_t) * TICK_SECONDS) / ktau)
    values = np.where(win_t >= 0, lam * win_s, 0.0)
    return DecayedWindow(values, float(values[e.y - y0, e.x - x0]))


def process_corner_event(state: SurfaceState, e: Event, score: float, cfg: AnmsConfig) -> bool:
    """Write the event's (t, score) to the surfaces, then decide keep/drop.

    The decision compares the event's decayed value (its raw score, the
    decay weight at age zero being 1) against the window maximum; ties
    keep the event.
    """
    state.record_score(e, score)
    tau = compute_tau(state, e, cfg)
    window = decayed_window(state, e, tau, cfg)
    return window.center >= float(window.values.max())


class AnmsFilter:
    """Streaming filter bound to a pipeline's surface state.

    Under the default ``"all"`` policy the filter shares the pipeline's
    state, so ages reflect every ingested event; under ``"corners"`` it
    maintains a private state touched only by the scored events it sees.
    """

    def __init__(self, cfg: AnmsConfig, state: SurfaceState):
        self.cfg = cfg
        if cfg.sae_policy == "all":
            self.state = state
        else:
            self.state = SurfaceState(state.width, state.height)

    def process(self, e: Event, score: float) -> bool:
        return process_corner_event(self.state, e, score, self.cfg)


@dataclass
class PipelineResult:
    """Raw and filtered corner streams produced by one pipeline pass.

    ``raw_indices`` point into the input stream; ``kept_flags`` align
    with the raw stream and mark which accepted events survived the
    filter. The filter never modifies events, so the kept stream is by
    construction a subsequence of the raw one.
    """

    n_total: int
    n_skipped: int
    raw_indices: list[int] = field(default_factory=list)
    raw_events: list[Event] = field(default_factory=list)
    raw_scores: list[float] = field(default_factory=list)
    kept_flags: list[bool] = field(default_factory=list)

    @property
    def n_raw(self) -> int:
        return len(self.raw_events)

    @property
    def n_kept(self) -> int:
        return sum(self.kept_flags)

    @property
    def kept_events(self) -> list[Event]:
        return [e for e, keep in zip(self.raw_events, self.kept_flags) if keep]

    @property
    def kept_indices(self) -> list[int]:
        return [i for i, keep in zip(self.raw_indices, self.kept_flags) if keep]

    def raw_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_total, dtype=bool)
        mask[self.raw_indices] = True
        return mask

    def kept_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_total, dtype=bool)
        mask[self.kept_indices] = True
        return mask


def run_pipeline(
    events: Sequence[Event],
    detector,
    anms_cfg: AnmsConfig | None = None,
    *,
    width: int = 240,
    height: int = 180,
    out_of_order: str = "reject",
    anms: bool = True,
) -> PipelineResult:
    """Run detector + filter over an in-order stream, one event at a time.

    Every accepted event appears in the raw stream; its filter decision
    is recorded alongside. With ``anms=False`` the filter stage is
    skipped entirely (all kept flags false), which is the detector-only
    arm used for timing comparisons.
    """
    cfg = anms_cfg or AnmsConfig()
    state = SurfaceState(width, height, out_of_order)
    filt = AnmsFilter(cfg, state) if anms else None
    if hasattr(detector, "reset"):
        detector.reset()
    result = PipelineResult(n_total=0, n_skipped=0)
    raw_indices = result.raw_indices
    raw_events = result.raw_events
    raw_scores = result.raw_scores
    kept_flags = result.kept_flags
    n_total = 0
    n_skipped = 0
    for i, e in enumerate(events):
        n_total += 1
        e = state.ingest(e)
        r = detector.detect(state, e)
        if r is None:
            n_skipped += 1
            continue
        if not r.is_corner:
            continue
        raw_indices.append(i)
        raw_events.append(e)
        raw_scores.append(r.score)
        kept_flags.append(filt.process(e, r.score) if filt is not None else False)
    result.n_total = n_total
    result.n_skipped = n_skipped
    return result

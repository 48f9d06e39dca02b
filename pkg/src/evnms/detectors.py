"""Asynchronous corner detectors over the event time surface.

Three detectors share one contract: given the current surface state and
an incoming event, return a verdict plus a score, or ``None`` when the
event sits too close to the image border for the detector's footprint.

* evFAST / ArcFAST -- segment search on two concentric pixel rings of
  the SAE (radius 3, 16 px and radius 4, 20 px). The ring is split into
  one contiguous run of strictly newer timestamps and its complement;
  the verdict checks the run length against per-ring acceptance bands.
  ArcFAST widens the bands so reflex corners (over 180 degrees) pass.
* evHarris -- Harris response of the binary surface spanned by the most
  recent events of the event's polarity.

The shared ring score is the sum of the two major-arc lengths, one per
ring, so a 90-degree corner and its 270-degree complement score alike.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .events import Event, SurfaceState

# Bresenham-style rings used by the FAST lineage, circularly ordered.
INNER_CIRCLE: tuple[tuple[int, int], ...] = (
    (0, -3), (1, -3), (2, -2), (3, -1), (3, 0), (3, 1), (2, 2), (1, 3),
    (0, 3), (-1, 3), (-2, 2), (-3, 1), (-3, 0), (-3, -1), (-2, -2), (-1, -3),
)
OUTER_CIRCLE: tuple[tuple[int, int], ...] = (
    (0, -4), (1, -4), (2, -3), (3, -2), (4, -1), (4, 0), (4, 1), (3, 2),
    (2, 3), (1, 4), (0, 4), (-1, 4), (-2, 3), (-3, 2), (-4, 1), (-4, 0),
    (-4, -1), (-3, -2), (-2, -3), (-1, -4),
)

FAST_BORDER_MARGIN = 4  # both rings fit when the event is 4 px from every border

# Accepted lengths for the newer-timestamp run (inner ring, outer ring).
EVFAST_INNER_BANDS = ((3, 6),)
EVFAST_OUTER_BANDS = ((4, 8),)
ARCFAST_INNER_BANDS = ((3, 6), (10, 13))
ARCFAST_OUTER_BANDS = ((4, 8), (13, 16))


@dataclass(frozen=True)
class CircleTemplate:
    """Ordered pixel offsets of the two concentric detection rings."""

    inner: tuple[tuple[int, int], ...] = INNER_CIRCLE
    outer: tuple[tuple[int, int], ...] = OUTER_CIRCLE


DEFAULT_TEMPLATE = CircleTemplate()


@dataclass(frozen=True)
class SegmentationResult:
    """Run lengths of the newer/older timestamp split on both rings."""

    n_ih: int
    n_il: int
    n_oh: int
    n_ol: int


@dataclass(frozen=True)
class DetectionResult:
    """Detector verdict and raw corner score for one event."""

    is_corner: bool
    score: float


def longest_high_run(vals: list) -> int:
    """Length of the longest contiguous cyclic run whose minimum strictly
    exceeds the maximum of the complement; 0 when no such run exists.

    Any two valid runs are nested (disjoint or crossing runs would each
    have to dominate the other), so the longest one is unique. The scan
    inserts positions in descending value order while tracking how many
    islands the inserted set forms; a prefix is a valid run exactly when
    it forms one island and is strictly separated from the next value.
    """
    n = len(vals)
    order = sorted(range(n), key=vals.__getitem__, reverse=True)
    member = bytearray(n)
    islands = 0
    best = 0
    last = n - 1
    for rank in range(last):
        i = order[rank]
        member[i] = 1
        islands += 1 - member[i - 1 if i else last] - member[i + 1 if i < last else 0]
        if islands == 1 and vals[i] > vals[order[rank + 1]]:
            best = rank + 1
    return best


def segment_values(vals: list) -> tuple[int, int]:
    """Split one ring's timestamps into (n_high, n_low).

    Falls back to the degenerate split (len, 0) when no strict split
    exists, e.g. all values equal or all pixels unfired.
    """
    n = len(vals)
    high = longest_high_run(vals)
    if high == 0:
        return n, 0
    return high, n - high


def segment_circle(
    state: SurfaceState, e: Event, circle: tuple[tuple[int, int], ...]
) -> tuple[int, int]:
    """Segment one ring of SAE timestamps around an event.

    Unfired pixels carry the sentinel and therefore sort older than any
    real timestamp. Raises ValueError when the ring does not fit inside
    the image.
    """
    radius = max(max(abs(dx), abs(dy)) for dx, dy in circle)
    if (
        e.x < radius
        or e.y < radius
        or e.x >= state.width - radius
        or e.y >= state.height - radius
    ):
        raise ValueError(f"ring radius {radius} does not fit at ({e.x}, {e.y})")
    plane = state.sae[e.p]
    vals = [int(plane[e.y + dy, e.x + dx]) for dx, dy in circle]
    return segment_values(vals)


def fast_corner_score(seg: SegmentationResult) -> int:
    """Ring corner score: sum of the major-arc lengths of both rings."""
    return max(seg.n_ih, seg.n_il) + max(seg.n_oh, seg.n_ol)


def segment_event(state: SurfaceState, e: Event) -> SegmentationResult:
    """Segment both rings around an event (raises near the border)."""
    n_ih, n_il = segment_circle(state, e, INNER_CIRCLE)
    n_oh, n_ol = segment_circle(state, e, OUTER_CIRCLE)
    return SegmentationResult(n_ih, n_il, n_oh, n_ol)


def _in_bands(n: int, bands: tuple[tuple[int, int], ...]) -> bool:
    return any(lo <= n <= hi for lo, hi in bands)


def ev_fast_detect(state: SurfaceState, e: Event) -> DetectionResult:
    """evFAST verdict and ring score for one event."""
    seg = segment_event(state, e)
    ok = _in_bands(seg.n_ih, EVFAST_INNER_BANDS) and _in_bands(seg.n_oh, EVFAST_OUTER_BANDS)
    return DetectionResult(ok, float(fast_corner_score(seg)))


def arc_fast_detect(state: SurfaceState, e: Event) -> DetectionResult:
    """ArcFAST verdict (reflex corners included) and ring score."""
    seg = segment_event(state, e)
    ok = _in_bands(seg.n_ih, ARCFAST_INNER_BANDS) and _in_bands(seg.n_oh, ARCFAST_OUTER_BANDS)
    return DetectionResult(ok, float(fast_corner_score(seg)))


class _FastRingDetector:
    """Shared per-event fast path for the two ring detectors.

    Flat pixel offsets and raveled SAE planes are cached per bound state
    so the hot loop does one fancy-index gather per ring.
    """

    inner_bands: tuple[tuple[int, int], ...]
    outer_bands: tuple[tuple[int, int], ...]
    name: str

    def __init__(self) -> None:
        self._state: SurfaceState | None = None
        self._flat: tuple[np.ndarray, np.ndarray] | None = None
        self._inner_off: np.ndarray | None = None
        self._outer_off: np.ndarray | None = None
        self._lo = 0
        self._hi_x = 0
        self._hi_y = 0

    def reset(self) -> None:
        self._state = None

    def _bind(self, state: SurfaceState) -> None:
        w = state.width
        self._inner_off = np.array([dy * w + dx for dx, dy in INNER_CIRCLE], dtype=np.int64)
        self._outer_off = np.array([dy * w + dx for dx, dy in OUTER_CIRCLE], dtype=np.int64)
        self._flat = (state.sae[0].ravel(), state.sae[1].ravel())
        self._lo = FAST_BORDER_MARGIN
        self._hi_x = w - FAST_BORDER_MARGIN
        self._hi_y = state.height - FAST_BORDER_MARGIN
        self._state = state

    def detect(self, state: SurfaceState, e: Event) -> DetectionResult | None:
        if state is not self._state:
            self._bind(state)
        x = e.x
        y = e.y
        if x < self._lo or y < self._lo or x >= self._hi_x or y >= self._hi_y:
            return None
        flat = self._flat[e.p]
        base = y * state.width + x
        inner = flat[base + self._inner_off].tolist()
        outer = flat[base + self._outer_off].tolist()
        n_ih = longest_high_run(inner)
        n_oh = longest_high_run(outer)
        if n_ih == 0:
            n_ih = 16
        if n_oh == 0:
            n_oh = 20
        ok = _in_bands(n_ih, self.inner_bands) and _in_bands(n_oh, self.outer_bands)
        score = max(n_ih, 16 - n_ih) + max(n_oh, 20 - n_oh)
        return DetectionResult(ok, float(score))


class EvFastDetector(_FastRingDetector):
    name = "evfast"
    inner_bands = EVFAST_INNER_BANDS
    outer_bands = EVFAST_OUTER_BANDS


class ArcFastDetector(_FastRingDetector):
    name = "arcfast"
    inner_bands = ARCFAST_INNER_BANDS
    outer_bands = ARCFAST_OUTER_BANDS


@dataclass
class EvHarrisConfig:
    """Parameters of the Harris detector on the binary event surface.

    The default threshold is calibrated so the synthetic benchmark scene
    lands in the expected coarse reduction band (see README).
    """

    queue_capacity: int = 2000
    patch: int = 9
    gauss_sigma: float = 1.0
    harris_k: float = 0.04
    threshold: float = 6.0

    def __post_init__(self) -> None:
        if self.patch < 5 or self.patch % 2 == 0:
            raise ValueError(f"patch must be odd and >= 5, got {self.patch}")
        if self.queue_capacity < self.patch * self.patch:
            raise ValueError("queue_capacity must be >= patch^2")
        if not 0.0 < self.harris_k < 0.25:
            raise ValueError(f"harris_k must be in (0, 0.25), got {self.harris_k}")

    @property
    def border_margin(self) -> int:
        # patch half-width plus one ring for the gradient stencil
        return self.patch // 2 + 1


class BinarySurfaceQueue:
    """The most recent events per polarity, as a dense occupancy count.

    A pixel is active while at least one of its events remains in the
    per-polarity FIFO of the configured capacity.
    """

    def __init__(self, width: int, height: int, capacity: int):
        self.capacity = capacity
        self.counts = np.zeros((2, height, width), dtype=np.int32)
        self._fifos: tuple[deque, deque] = (deque(), deque())

    def push(self, e: Event) -> None:
        fifo = self._fifos[e.p]
        counts = self.counts[e.p]
        if len(fifo) == self.capacity:
            ox, oy = fifo.popleft()
            counts[oy, ox] -= 1
        fifo.append((e.x, e.y))
        counts[e.y, e.x] += 1


def _gaussian_window(side: int, sigma: float) -> np.ndarray:
    ax = np.arange(side, dtype=np.float64) - (side - 1) / 2.0
    g = np.exp(-(ax[:, None] ** 2 + ax[None, :] ** 2) / (2.0 * sigma * sigma))
    return g / g.sum()


def ev_harris_detect(
    state: SurfaceState, queue: BinarySurfaceQueue, e: Event, cfg: EvHarrisConfig
) -> DetectionResult:
    """Harris verdict on the binary surface patch around an event.

    The binary patch marks pixels whose event is still in the queue for
    the event's polarity. Gradients use the 3x3 Sobel stencil; the
    structure tensor is Gaussian-weighted over the patch. The raw
    response det(M) - k * trace(M)^2 is returned as the score and may be
    negative for edge-like patches.
    """
    margin = cfg.border_margin
    if (
        e.x < margin
        or e.y < margin
        or e.x >= state.width - margin
        or e.y >= state.height - margin
    ):
        raise ValueError(f"patch margin {margin} does not fit at ({e.x}, {e.y})")
    half = cfg.patch // 2
    ext = half + 1
    region = (
        queue.counts[e.p, e.y - ext : e.y + ext + 1, e.x - ext : e.x + ext + 1] > 0
    ).astype(np.float64)
    # Sobel via separable slicing: difference across, smooth along.
    sx = region[:, 2:] - region[:, :-2]
    ix = sx[:-2, :] + 2.0 * sx[1:-1, :] + sx[2:, :]
    sy = region[2:, :] - region[:-2, :]
    iy = sy[:, :-2] + 2.0 * sy[:, 1:-1] + sy[:, 2:]
    w = _harris_window(cfg)
    a = float(np.sum(w * ix * ix))
    b = float(np.sum(w * iy * iy))
    c = float(np.sum(w * ix * iy))
    score = a * b - c * c - cfg.harris_k * (a + b) * (a + b)
    return DetectionResult(score > cfg.threshold, score)


_WINDOW_CACHE: dict[tuple[int, float], np.ndarray] = {}


def _harris_window(cfg: EvHarrisConfig) -> np.ndarray:
    key = (cfg.patch, cfg.gauss_sigma)
    w = _WINDOW_CACHE.get(key)
    if w is None:
        w = _gaussian_window(cfg.patch, cfg.gauss_sigma)
        _WINDOW_CACHE[key] = w
    return w


class EvHarrisDetector:
    """Stateful evHarris detector: owns the per-polarity event queue."""

    name = "evharris"

    def __init__(self, cfg: EvHarrisConfig | None = None):
        self.cfg = cfg or EvHarrisConfig()
        self._queue: BinarySurfaceQueue | None = None
        self._state: SurfaceState | None = None

    def reset(self) -> None:
        self._queue = None
        self._state = None

    @property
    def queue(self) -> BinarySurfaceQueue | None:
        return self._queue

    def detect(self, state: SurfaceState, e: Event) -> DetectionResult | None:
        if state is not self._state:
            self._queue = BinarySurfaceQueue(state.width, state.height, self.cfg.queue_capacity)
            self._state = state
        self._queue.push(e)
        margin = self.cfg.border_margin
        if (
            e.x < margin
            or e.y < margin
            or e.x >= state.width - margin
            or e.y >= state.height - margin
        ):
            return None
        return ev_harris_detect(state, self._queue, e, self.cfg)


def make_detector(name: str, evharris_cfg: EvHarrisConfig | None = None):
    """Instantiate a detector by its CLI name."""
    if name == "evfast":
        return EvFastDetector()
    if name == "arcfast":
        return ArcFastDetector()
    if name == "evharris":
        return EvHarrisDetector(evharris_cfg)
    raise ValueError(f"unknown detector {name!r} (expected evharris|evfast|arcfast)")


DETECTOR_NAMES = ("evharris", "evfast", "arcfast")

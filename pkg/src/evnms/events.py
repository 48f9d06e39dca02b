"""Event model, per-polarity time/score surfaces, and stream I/O.

The sensor emits a sparse asynchronous stream of (t, x, y, polarity)
events. Two dense per-polarity grids summarize the stream at any moment:

* SAE  -- timestamp of the latest event at each pixel ("time surface");
  pixels that never fired hold the sentinel ``NEVER``.
* SSAE -- corner score of the latest *scored* event at each pixel,
  zero where no scored event has landed yet.

Both grids are updated one cell at a time, in stream order, by a single
writer. Snapshots for diagnostics must be taken between updates.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import IO, Iterable, Iterator

import numpy as np

DEFAULT_WIDTH = 240
DEFAULT_HEIGHT = 180

# SAE sentinel for pixels that never fired; compares older than any real
# timestamp (real timestamps are >= 0).
NEVER = -1

US_PER_SECOND = 1_000_000


class Polarity(IntEnum):
    """Sign of the brightness change that produced an event."""

    NEGATIVE = 0
    POSITIVE = 1


class StreamError(Exception):
    """Base class for event-stream errors."""


class StreamFormatError(StreamError):
    """A malformed line in an event or track file."""

    def __init__(self, line_no: int, text: str, reason: str = "malformed line"):
        self.line_no = line_no
        self.text = text
        super().__init__(f"line {line_no}: {reason}: {text!r}")


class OutOfBoundsError(StreamError):
    """Event coordinates outside the declared sensor geometry."""

    def __init__(self, position: int, x: int, y: int, width: int, height: int):
        self.position = position
        super().__init__(
            f"event #{position}: pixel ({x}, {y}) outside {width}x{height} sensor"
        )


class OutOfOrderError(StreamError):
    """Event timestamp decreased within a stream."""

    def __init__(self, position: int, t_prev: int, t: int):
        self.position = position
        super().__init__(
            f"event #{position}: timestamp {t} us is earlier than previous {t_prev} us"
        )


@dataclass(frozen=True, slots=True)
class Event:
    """A single camera event.

    t is in integer microseconds since stream start; x is the column,
    y the row (0-based).
    """

    t: int
    x: int
    y: int
    p: Polarity


class SurfaceState:
    """Per-polarity SAE and SSAE grids plus stream-order bookkeeping.

    ``out_of_order`` selects what happens when a timestamp regresses:
    ``"reject"`` (default) raises :class:`OutOfOrderError`, ``"clamp"``
    rewrites the event time to the last seen timestamp.
    """

    def __init__(
        self,
        width: int = DEFAULT_WIDTH,
        height: int = DEFAULT_HEIGHT,
        out_of_order: str = "reject",
    ):
        if width <= 0 or height <= 0:
            raise ValueError(f"invalid geometry {width}x{height}")
        if out_of_order not in ("reject", "clamp"):
            raise ValueError(f"unknown out-of-order policy {out_of_order!r}")
        self.width = width
        self.height = height
        self.out_of_order = out_of_order
        self.sae = np.full((2, height, width), NEVER, dtype=np.int64)
        self.ssae = np.zeros((2, height, width), dtype=np.float64)
        self.last_t = 0
        self.position = 0  # events ingested so far

    def in_bounds(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height

    def ingest(self, e: Event) -> Event:
        """Validate stream order and update the SAE for one event.

        Returns the event actually applied (identical to ``e`` except
        under the clamp policy, where a regressed timestamp is lifted
        to the previous one).
        """
        if not self.in_bounds(e.x, e.y):
            raise OutOfBoundsError(self.position, e.x, e.y, self.width, self.height)
        if e.t < self.last_t:
            if self.out_of_order == "reject":
                raise OutOfOrderError(self.position, self.last_t, e.t)
            e = Event(self.last_t, e.x, e.y, e.p)
        self.last_t = e.t
        self.position += 1
        self.sae[e.p, e.y, e.x] = e.t
        return e

    def record_score(self, e: Event, score: float) -> None:
        """Atomically store (t, score) for a scored event's pixel."""
        self.sae[e.p, e.y, e.x] = e.t
        self.ssae[e.p, e.y, e.x] = score


def update_sae(state: SurfaceState, e: Event) -> None:
    """Apply one event to the state's SAE (bounds/order checked)."""
    state.ingest(e)


def _parse_line(line: str, line_no: int) -> Event:
    parts = line.split()
    if len(parts) != 4:
        raise StreamFormatError(line_no, line.rstrip("\n"), "expected 't x y p'")
    try:
        t_sec = float(parts[0])
        x = int(parts[1])
        y = int(parts[2])
        p = int(parts[3])
    except ValueError as err:
        raise StreamFormatError(line_no, line.rstrip("\n"), str(err)) from None
    if p not in (0, 1):
        raise StreamFormatError(line_no, line.rstrip("\n"), f"polarity {p} not in {{0,1}}")
    t_us = int(round(t_sec * US_PER_SECOND))
    return Event(t_us, x, y, Polarity(p))


def read_events(source: str | IO[str]) -> Iterator[Event]:
    """Yield events from a ``t x y p`` text stream in input order.

    ``t`` is decimal seconds and is converted to integer microseconds
    (round to nearest); ``p`` maps 0 -> negative, 1 -> positive. An
    empty file yields nothing. Malformed lines raise
    :class:`StreamFormatError` carrying the 1-based line number.
    """
    if isinstance(source, str):
        with open(source, "r", encoding="ascii") as fh:
            yield from read_events(fh)
        return
    for line_no, line in enumerate(source, start=1):
        if not line.strip():
            continue
        yield _parse_line(line, line_no)


def load_events(path: str) -> list[Event]:
    """Read a whole event file into memory."""
    return list(read_events(path))


def format_event(e: Event) -> str:
    return f"{e.t / US_PER_SECOND:.6f} {e.x} {e.y} {int(e.p)}"


def write_events(events: Iterable[Event], dest: str | IO[str]) -> None:
    """Write events in the same ``t x y p`` text format read_events parses.

    Timestamps are printed with six decimals (microsecond resolution),
    so a write/read round trip is lossless.
    """
    if isinstance(dest, str):
        with open(dest, "w", encoding="ascii") as fh:
            write_events(events, fh)
        return
    for e in events:
        dest.write(format_event(e))
        dest.write("\n")

"""Core event data types, stream validation and temporal batching.

Events are kept in structure-of-arrays form (one numpy column per field)
so that filtering and frequency estimation stay vectorized at high event
rates; ``Event`` is a scalar view used for iteration and error messages.
All timestamps are integer microseconds. Arrays are frozen after
construction, so streams are safe to share between threads.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Iterable, Iterator, NamedTuple

import numpy as np


class Polarity(IntEnum):
    """Sign of the brightness change an event encodes.

    Stored and serialized as 0/1; the signed {-1, +1} convention is
    available via :attr:`sign`.
    """

    OFF = 0
    ON = 1

    @property
    def sign(self) -> int:
        return 1 if self is Polarity.ON else -1


class Event(NamedTuple):
    """A single polarity change at pixel (x, y) at time t (microseconds)."""

    x: int
    y: int
    p: Polarity
    t: int


@dataclass(frozen=True)
class SensorGeometry:
    """Pixel-array dimensions. Default profile matches a 1280x720 sensor."""

    width: int = 1280
    height: int = 720

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError(f"geometry must be >= 1x1, got {self.width}x{self.height}")

    @property
    def n_pixels(self) -> int:
        return self.width * self.height


def _as_column(a, dtype) -> np.ndarray:
    col = np.ascontiguousarray(a, dtype=dtype)
    if col.ndim != 1:
        raise ValueError("event columns must be 1-D")
    col.setflags(write=False)
    return col


@dataclass(frozen=True)
class EventStream:
    """Time-ordered event sequence plus sensor geometry.

    Columns: t (int64 microseconds), x, y (int32), p (uint8, ON=1).
    The sort-by-t invariant is not enforced on construction (use
    :func:`validate_stream`), because codecs need to build a stream first
    and report violations as data.
    """

    geometry: SensorGeometry
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    p: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "t", _as_column(self.t, np.int64))
        object.__setattr__(self, "x", _as_column(self.x, np.int32))
        object.__setattr__(self, "y", _as_column(self.y, np.int32))
        object.__setattr__(self, "p", _as_column(self.p, np.uint8))
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.p) == n):
            raise ValueError("event columns must have equal length")

    @classmethod
    def empty(cls, geometry: SensorGeometry) -> "EventStream":
        return cls(geometry, np.empty(0, np.int64), np.empty(0, np.int32),
                   np.empty(0, np.int32), np.empty(0, np.uint8))

    @classmethod
    def from_events(cls, geometry: SensorGeometry, events: Iterable[Event]) -> "EventStream":
        ev = list(events)
        return cls(geometry,
                   np.array([e.t for e in ev], np.int64),
                   np.array([e.x for e in ev], np.int32),
                   np.array([e.y for e in ev], np.int32),
                   np.array([int(e.p) for e in ev], np.uint8))

    @classmethod
    def from_arrays(cls, geometry: SensorGeometry, t, x, y, p, *,
                    canonical_sort: bool = False) -> "EventStream":
        """Build a stream from columns, optionally sorting by (t, y, x, p).

        The canonical order makes simultaneous events deterministic no
        matter how they were generated (e.g. per-pixel synthesis shards).
        """
        t = np.asarray(t, np.int64)
        x = np.asarray(x, np.int32)
        y = np.asarray(y, np.int32)
        p = np.asarray(p, np.uint8)
        if canonical_sort and len(t):
            order = np.lexsort((p, x, y, t))
            t, x, y, p = t[order], x[order], y[order], p[order]
        return cls(geometry, t, x, y, p)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.x[i]), int(self.y[i]), Polarity(int(self.p[i])), int(self.t[i]))

    def __iter__(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield self[i]

    @property
    def events(self) -> Iterator[Event]:
        return iter(self)

    @property
    def pixel_ids(self) -> np.ndarray:
        """Flat pixel index y*width + x for grouping operations."""
        return self.y.astype(np.int64) * self.geometry.width + self.x

    @property
    def duration_us(self) -> int:
        return int(self.t[-1] - self.t[0]) if len(self) else 0

    def select(self, index) -> "EventStream":
        """Subset of the stream (boolean mask or index array); order is kept."""
        return EventStream(self.geometry, self.t[index], self.x[index],
                           self.y[index], self.p[index])

    def slice(self, start: int, stop: int) -> "EventStream":
        return EventStream(self.geometry, self.t[start:stop], self.x[start:stop],
                           self.y[start:stop], self.p[start:stop])


@dataclass(frozen=True)
class EventBatch:
    """Events of one tumbling window: window_start_us <= t < window_end_us."""

    window_start_us: int
    window_end_us: int
    events: EventStream


def validate_stream(stream: EventStream) -> list[str]:
    """Check stream invariants and return human-readable violations.

    Violations are data, not failures: an empty list means the stream is
    valid. Each message names the first offending event index and the rule.
    """
    out: list[str] = []
    t, x, y = stream.t, stream.x, stream.y
    w, h = stream.geometry.width, stream.geometry.height
    if len(t) == 0:
        return out
    bad = np.nonzero(np.diff(t) < 0)[0]
    for i in bad:
        out.append(f"non-monotonic at index {i + 1}")
    for i in np.nonzero(t < 0)[0]:
        out.append(f"negative timestamp at index {i}")
    for i in np.nonzero((x < 0) | (x >= w))[0]:
        out.append(f"x out of range at index {i} (x={x[i]}, width={w})")
    for i in np.nonzero((y < 0) | (y >= h))[0]:
        out.append(f"y out of range at index {i} (y={y[i]}, height={h})")
    bad_p = np.nonzero(stream.p > 1)[0]
    for i in bad_p:
        out.append(f"invalid polarity at index {i}")
    return out


def batch_events(stream: EventStream, window_us: int,
                 origin_us: int | None = None) -> list[EventBatch]:
    """Partition a sorted stream into tumbling windows aligned to origin_us.

    Windows are contiguous and non-overlapping; every event lands in
    exactly one batch and empty trailing windows are not emitted. Empty
    windows between events are emitted so the sequence stays contiguous.
    origin_us defaults to the first event's timestamp (the recording start
    is not always known), and only fixes the alignment phase: windows may
    extend before it if events do.
    """
    window_us = int(window_us)
    if window_us < 1:
        raise ValueError(f"window_us must be >= 1, got {window_us}")
    if len(stream) == 0:
        return []
    if origin_us is None:
        origin_us = int(stream.t[0])
    k_first = (int(stream.t[0]) - origin_us) // window_us
    k_last = (int(stream.t[-1]) - origin_us) // window_us
    edges = origin_us + np.arange(k_first, k_last + 2, dtype=np.int64) * window_us
    idx = np.searchsorted(stream.t, edges, side="left")
    batches = []
    for j in range(len(edges) - 1):
        batches.append(EventBatch(int(edges[j]), int(edges[j + 1]),
                                  stream.slice(int(idx[j]), int(idx[j + 1]))))
    return batches

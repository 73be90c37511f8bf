"""Event-stream signal conditioning filters.

All filters return a subsequence of the input (events are never invented
or reordered) and are deterministic for a given input and config. State
is per pixel, so results are independent of how the stream is sharded.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import EventStream, batch_events


@dataclass(frozen=True)
class StcConfig:
    """Spatio-temporal-contrast filter parameters.

    A burst is a run of same-polarity events at one pixel, each within
    burst_window_us of the previous; the first event of a burst and
    isolated events are dropped, the second is kept, and trail events
    (third onward) are kept iff keep_trail.
    """

    burst_window_us: int
    keep_trail: bool = False

    def __post_init__(self) -> None:
        if self.burst_window_us < 1:
            raise ValueError("burst_window_us must be >= 1")


@dataclass(frozen=True)
class ErcConfig:
    """Event-rate control: cap the stream at max_rate_eps per second,
    enforced over tumbling windows of window_us."""

    max_rate_eps: float
    window_us: int = 10_000

    def __post_init__(self) -> None:
        if self.max_rate_eps < 1:
            raise ValueError("max_rate_eps must be >= 1")
        if self.window_us < 1:
            raise ValueError("window_us must be >= 1")


@dataclass(frozen=True)
class FlickerBand:
    """Frequency band [lo_hz, hi_hz] to reject."""

    lo_hz: float
    hi_hz: float

    def __post_init__(self) -> None:
        if not (0 < self.lo_hz < self.hi_hz):
            raise ValueError(f"need 0 < lo < hi, got [{self.lo_hz}, {self.hi_hz}]")

    def contains(self, f: np.ndarray) -> np.ndarray:
        return (f >= self.lo_hz) & (f <= self.hi_hz)


def stc_filter(stream: EventStream, cfg: StcConfig) -> EventStream:
    """Keep the second event of each same-polarity burst.

    Cross-polarity events terminate a burst: polarity transitions are the
    signal downstream frequency estimation needs, so a polarity change
    always starts a fresh burst.
    """
    n = len(stream)
    if n == 0:
        return stream
    pid = stream.pixel_ids
    order = np.argsort(pid, kind="stable")  # (pixel, t) order; t already sorted
    t = stream.t[order]
    p = stream.p[order]
    g = pid[order]
    new_burst = np.ones(n, bool)
    if n > 1:
        same_pixel = g[1:] == g[:-1]
        same_pol = p[1:] == p[:-1]
        close = (t[1:] - t[:-1]) <= cfg.burst_window_us
        new_burst[1:] = ~(same_pixel & same_pol & close)
    burst_id = np.cumsum(new_burst) - 1
    burst_start = np.nonzero(new_burst)[0]
    pos = np.arange(n) - burst_start[burst_id]
    keep_sorted = (pos == 1) | ((pos >= 2) & cfg.keep_trail)
    keep = np.zeros(n, bool)
    keep[order] = keep_sorted
    return stream.select(keep)


def refractory_filter(stream: EventStream, dead_time_us: int) -> EventStream:
    """Per-pixel dead time: keep an event iff t - t_last_kept >= dead_time_us.

    The first event of each pixel is always kept. With dead time above the
    half-period of a periodic stimulus this collapses the stream to a
    single polarity per period.
    """
    if dead_time_us < 0:
        raise ValueError("dead_time_us must be >= 0")
    n = len(stream)
    if dead_time_us == 0 or n == 0:
        return stream
    pid = stream.pixel_ids
    order = np.argsort(pid, kind="stable")
    t = stream.t[order]
    g = pid[order]
    keep_sorted = np.zeros(n, bool)
    t_list = t.tolist()
    g_list = g.tolist()
    last_t = 0
    last_g = -1
    for i in range(n):
        if g_list[i] != last_g or t_list[i] - last_t >= dead_time_us:
            keep_sorted[i] = True
            last_g = g_list[i]
            last_t = t_list[i]
    keep = np.zeros(n, bool)
    keep[order] = keep_sorted
    return stream.select(keep)


def erc_decimate(stream: EventStream, cfg: ErcConfig) -> EventStream:
    """Deterministic uniform-stride rate cap.

    Windows over the cap keep events at indices floor(k*N/C), k=0..C-1,
    where C = floor(max_rate_eps * window_us / 1e6); under-cap windows
    pass through. Stride decimation (rather than random drop) keeps
    temporal coverage uniform and the output reproducible.
    """
    n = len(stream)
    if n == 0:
        return stream
    cap = int(cfg.max_rate_eps * cfg.window_us / 1e6)
    keep = np.zeros(n, bool)
    for batch in batch_events(stream, cfg.window_us):
        i0 = np.searchsorted(stream.t, batch.window_start_us, side="left")
        count = len(batch.events)
        if count <= cap:
            keep[i0:i0 + count] = True
        elif cap > 0:
            k = np.arange(cap, dtype=np.int64)
            keep[i0 + (k * count) // cap] = True
    return stream.select(keep)


def anti_flicker(stream: EventStream, bands: list[FlickerBand],
                 window_us: int = 50_000, cfg=None) -> EventStream:
    """Drop events of pixels whose per-window frequency falls in a band.

    Each tumbling window gets its own frequency map (windows are
    independent); all events of a pixel within a window are removed when
    that window's estimate lies inside any reject band.
    """
    from .freqmap import FreqMapConfig, compute_freq_map

    if not bands or len(stream) == 0:
        return stream
    cfg = cfg or FreqMapConfig(window_us=max(window_us, 1000))
    keep = np.ones(len(stream), bool)
    for batch in batch_events(stream, window_us):
        if len(batch.events) == 0:
            continue
        fmap = compute_freq_map(batch, stream.geometry, cfg)
        reject = np.zeros(fmap.values.shape, bool)
        est = ~np.isnan(fmap.values)
        for band in bands:
            reject |= est & band.contains(fmap.values)
        if not reject.any():
            continue
        i0 = np.searchsorted(stream.t, batch.window_start_us, side="left")
        i1 = i0 + len(batch.events)
        drop = reject[stream.y[i0:i1], stream.x[i0:i1]]
        keep[i0:i1] = ~drop
    return stream.select(keep)

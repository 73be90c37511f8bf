"""Per-pixel frequency estimation from polarity-transition intervals.

A "hypertransition" is a polarity change in a fixed direction at one
pixel (default ON followed by OFF, the lower-jitter direction); the time
between successive hypertransitions is one period of the local signal,
so the per-pixel frequency is the reciprocal of the mean (or median)
interval. Estimation runs over temporal batches; transition state can be
carried across batches so intervals may straddle window boundaries, and
a sequence of per-batch maps can be composited latest-estimate-wins for
display.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

from .model import Event, EventBatch, EventStream, SensorGeometry, batch_events

UNESTIMATED = float("nan")

# window presets (microseconds): what batch length resolves which regime
VIBRATION_WINDOW_US = 20_000
STRUCTURE_WINDOW_US = 15_000
FLICKER_WINDOW_US = 50_000


class Transition(enum.Enum):
    ON_TO_OFF = "on-off"
    OFF_TO_ON = "off-on"


@dataclass(frozen=True)
class FreqMapConfig:
    transition: Transition = Transition.ON_TO_OFF
    window_us: int = VIBRATION_WINDOW_US
    min_intervals: int = 2
    estimator: str = "mean"  # or "median"
    f_min_hz: float = 1.0
    f_max_hz: float = 5000.0

    def __post_init__(self) -> None:
        if self.window_us < 1000:
            raise ValueError("window_us must be >= 1000")
        if not (0 < self.f_min_hz < self.f_max_hz <= 5000.0):
            raise ValueError("need 0 < f_min < f_max <= 5000")
        if self.estimator not in ("mean", "median"):
            raise ValueError(f"unknown estimator {self.estimator!r}")
        if self.min_intervals < 1:
            raise ValueError("min_intervals must be >= 1")


@dataclass
class PixelTransitionState:
    """Transition tracker for a single pixel (reference semantics).

    The vectorized batch path in :func:`compute_freq_map` implements the
    same update rule over arrays; this scalar form is the readable
    definition and is cross-checked against it in tests.
    """

    last_polarity: int | None = None
    last_transition_t: int | None = None
    intervals: list[int] = field(default_factory=list)

    def update(self, event: Event, cfg: FreqMapConfig) -> int | None:
        """Advance state by one event; return a completed interval or None."""
        want_prev, want_cur = (1, 0) if cfg.transition is Transition.ON_TO_OFF else (0, 1)
        out = None
        if self.last_polarity == want_prev and int(event.p) == want_cur:
            if self.last_transition_t is not None:
                out = int(event.t) - self.last_transition_t
                self.intervals.append(out)
            self.last_transition_t = int(event.t)
        self.last_polarity = int(event.p)
        return out


def update_pixel_state(state: PixelTransitionState, event: Event,
                       cfg: FreqMapConfig | None = None) -> tuple[PixelTransitionState, int | None]:
    """Functional wrapper over :meth:`PixelTransitionState.update`."""
    interval = state.update(event, cfg or FreqMapConfig())
    return state, interval


def estimate_frequency(intervals: Sequence[int] | np.ndarray,
                       cfg: FreqMapConfig | None = None) -> float:
    """Frequency in Hz from transition intervals, or UNESTIMATED (NaN).

    Unestimated when fewer than ``min_intervals`` intervals are available
    or when the estimate falls outside [f_min_hz, f_max_hz]; out-of-range
    values are rejected rather than clamped.
    """
    cfg = cfg or FreqMapConfig()
    iv = np.asarray(intervals, np.float64)
    if len(iv) < cfg.min_intervals:
        return UNESTIMATED
    center = np.mean(iv) if cfg.estimator == "mean" else np.median(iv)
    if center <= 0:
        return UNESTIMATED
    f = 1e6 / center
    if not (cfg.f_min_hz <= f <= cfg.f_max_hz):
        return UNESTIMATED
    return float(f)


@dataclass(frozen=True)
class FrequencyMap:
    """Per-pixel frequency in Hz; NaN marks unestimated pixels."""

    geometry: SensorGeometry
    values: np.ndarray  # (height, width) float64

    def __post_init__(self) -> None:
        v = np.asarray(self.values, np.float64)
        if v.shape != (self.geometry.height, self.geometry.width):
            raise ValueError("map shape does not match geometry")
        object.__setattr__(self, "values", v)

    @property
    def estimated(self) -> np.ndarray:
        return ~np.isnan(self.values)

    @property
    def n_estimated(self) -> int:
        return int(self.estimated.sum())


class FreqState:
    """Per-pixel carry-over state for streaming batch processing.

    Holds each pixel's last seen polarity and last transition time so an
    interval may start in one batch and complete in the next.
    """

    def __init__(self, geometry: SensorGeometry):
        self.geometry = geometry
        n = geometry.n_pixels
        self.last_polarity = np.full(n, -1, np.int8)
        self.last_transition_t = np.full(n, -1, np.int64)


def _batch_intervals(batch_events_stream: EventStream, cfg: FreqMapConfig,
                     state: FreqState | None):
    """Completed transition intervals of one batch.

    Returns (pixel_id, interval_us) arrays plus per-pixel state updates
    applied to ``state`` if given.
    """
    ev = batch_events_stream
    n = len(ev)
    geometry = ev.geometry
    if n == 0:
        return np.empty(0, np.int64), np.empty(0, np.int64)
    pid = ev.pixel_ids
    order = np.argsort(pid, kind="stable")
    t = ev.t[order]
    p = ev.p[order].astype(np.int8)
    g = pid[order]
    first_of_pixel = np.ones(n, bool)
    if n > 1:
        first_of_pixel[1:] = g[1:] != g[:-1]

    prev_p = np.empty(n, np.int8)
    prev_p[1:] = p[:-1]
    prev_p[0] = -1
    if state is not None:
        prev_p[first_of_pixel] = state.last_polarity[g[first_of_pixel]]
    else:
        prev_p[first_of_pixel] = -1

    want_prev, want_cur = (1, 0) if cfg.transition is Transition.ON_TO_OFF else (0, 1)
    is_tr = (prev_p == want_prev) & (p == want_cur)

    tr_idx = np.nonzero(is_tr)[0]
    iv_pid = np.empty(0, np.int64)
    iv = np.empty(0, np.int64)
    if len(tr_idx):
        tr_t = t[tr_idx]
        tr_g = g[tr_idx]
        first_tr = np.ones(len(tr_idx), bool)
        if len(tr_idx) > 1:
            first_tr[1:] = tr_g[1:] != tr_g[:-1]
        prev_tt = np.empty(len(tr_idx), np.int64)
        prev_tt[1:] = tr_t[:-1]
        prev_tt[0] = -1
        if state is not None:
            prev_tt[first_tr] = state.last_transition_t[tr_g[first_tr]]
        else:
            prev_tt[first_tr] = -1
        have_prev = prev_tt >= 0
        iv_pid = tr_g[have_prev]
        iv = tr_t[have_prev] - prev_tt[have_prev]

    if state is not None:
        last_of_pixel = np.ones(n, bool)
        if n > 1:
            last_of_pixel[:-1] = g[1:] != g[:-1]
        state.last_polarity[g[last_of_pixel]] = p[last_of_pixel]
        if len(tr_idx):
            last_tr = np.ones(len(tr_idx), bool)
            if len(tr_idx) > 1:
                last_tr[:-1] = tr_g[1:] != tr_g[:-1]
            state.last_transition_t[tr_g[last_tr]] = tr_t[last_tr]
    return iv_pid, iv


def compute_freq_map(batch: EventBatch, geometry: SensorGeometry,
                     cfg: FreqMapConfig | None = None,
                     state: FreqState | None = None) -> FrequencyMap:
    """Frequency map of one batch; pixels without enough intervals are NaN.

    Pass a :class:`FreqState` to let intervals straddle batch boundaries
    (streaming use); without it the batch is analyzed in isolation.
    """
    cfg = cfg or FreqMapConfig()
    values = np.full((geometry.height, geometry.width), UNESTIMATED)
    iv_pid, iv = _batch_intervals(batch.events, cfg, state)
    if len(iv) == 0:
        return FrequencyMap(geometry, values)
    counts = np.bincount(iv_pid, minlength=geometry.n_pixels)
    enough = counts >= cfg.min_intervals
    if cfg.estimator == "mean":
        sums = np.bincount(iv_pid, weights=iv.astype(np.float64),
                           minlength=geometry.n_pixels)
        with np.errstate(invalid="ignore", divide="ignore"):
            center = sums / counts
    else:
        center = np.full(geometry.n_pixels, np.nan)
        # intervals are already grouped by pixel id (transition order)
        boundaries = np.nonzero(np.diff(iv_pid))[0] + 1
        for chunk_pid, chunk in zip(np.split(iv_pid, boundaries), np.split(iv, boundaries)):
            center[chunk_pid[0]] = np.median(chunk)
    with np.errstate(invalid="ignore", divide="ignore"):
        freq = 1e6 / center
    valid = enough & np.isfinite(freq) & (freq >= cfg.f_min_hz) & (freq <= cfg.f_max_hz)
    flat = values.ravel()
    flat[valid] = freq[valid]
    return FrequencyMap(geometry, values)


def stream_freq_maps(stream: EventStream, cfg: FreqMapConfig | None = None,
                     origin_us: int | None = None,
                     carry_state: bool = True) -> Iterator[tuple[EventBatch, FrequencyMap]]:
    """Yield (batch, map) per tumbling window of cfg.window_us."""
    cfg = cfg or FreqMapConfig()
    state = FreqState(stream.geometry) if carry_state else None
    for batch in batch_events(stream, cfg.window_us, origin_us):
        yield batch, compute_freq_map(batch, stream.geometry, cfg, state)


def merge_freq_maps(maps: Iterable[FrequencyMap]) -> FrequencyMap:
    """Composite maps in order, latest estimate per pixel winning.

    This is what a live view shows: the newest available estimate, grey
    where none has been produced yet.
    """
    maps = list(maps)
    if not maps:
        raise ValueError("no maps to merge")
    out = maps[0].values.copy()
    for m in maps[1:]:
        est = m.estimated
        out[est] = m.values[est]
    return FrequencyMap(maps[0].geometry, out)


@dataclass(frozen=True)
class FreqHistogram:
    """Histogram over estimated pixels; edges has n_bins + 1 entries."""

    edges: np.ndarray
    counts: np.ndarray

    @property
    def dominant(self) -> tuple[float, float, int] | None:
        """(lo_hz, hi_hz, count) of the most populated bin, or None."""
        if len(self.counts) == 0 or self.counts.sum() == 0:
            return None
        i = int(np.argmax(self.counts))
        return float(self.edges[i]), float(self.edges[i + 1]), int(self.counts[i])

    def rows(self) -> list[tuple[float, float, int]]:
        return [(float(self.edges[i]), float(self.edges[i + 1]), int(c))
                for i, c in enumerate(self.counts)]


def freq_histogram(fmap: FrequencyMap, n_bins: int,
                   lo_hz: float | None = None,
                   hi_hz: float | None = None) -> FreqHistogram:
    """Bin the estimated pixels of a map into n_bins equal-width bins.

    The range defaults to the data extent; an empty map yields an empty
    histogram.
    """
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    vals = fmap.values[fmap.estimated]
    if len(vals) == 0:
        return FreqHistogram(np.empty(0), np.empty(0, np.int64))
    lo = float(vals.min()) if lo_hz is None else float(lo_hz)
    hi = float(vals.max()) if hi_hz is None else float(hi_hz)
    if hi <= lo:
        hi = lo + 1.0
    counts, edges = np.histogram(vals, bins=n_bins, range=(lo, hi))
    return FreqHistogram(edges, counts.astype(np.int64))


# ---------------------------------------------------------------------------
# rendering

_GREY = np.array([128, 128, 128], np.uint8)

# quintic polynomial fit of the Turbo colormap (Google AI blog, 2019);
# avoids a plotting-library dependency while staying visually identical
_TURBO_R = [0.13572138, 4.61539260, -42.66032258, 132.13108234, -152.94239396, 59.28637943]
_TURBO_G = [0.09140261, 2.19418839, 4.84296658, -14.18503333, 4.27729857, 2.82956604]
_TURBO_B = [0.10667330, 12.64194608, -60.58204836, 110.36276771, -89.90310912, 27.34824973]


def _polyval(coeffs: list[float], x: np.ndarray) -> np.ndarray:
    acc = np.zeros_like(x)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def colormap_lut(name: str, n: int = 256) -> np.ndarray:
    """(n, 3) uint8 lookup table for 'turbo' or 'hsv'."""
    x = np.linspace(0.0, 1.0, n)
    if name == "turbo":
        rgb = np.stack([_polyval(_TURBO_R, x), _polyval(_TURBO_G, x), _polyval(_TURBO_B, x)], axis=1)
    elif name == "hsv":
        h = x * 6.0
        c = np.ones_like(x)
        xx = 1.0 - np.abs(h % 2.0 - 1.0)
        zeros = np.zeros_like(x)
        segs = [np.stack(s, axis=1) for s in
                ((c, xx, zeros), (xx, c, zeros), (zeros, c, xx),
                 (zeros, xx, c), (xx, zeros, c), (c, zeros, xx))]
        rgb = np.zeros((n, 3))
        for i, seg in enumerate(segs):
            m = (h >= i) & (h < i + 1) if i < 5 else (h >= 5)
            rgb[m] = seg[m]
    else:
        raise ValueError(f"unknown colormap {name!r}")
    return np.clip(np.round(rgb * 255.0), 0, 255).astype(np.uint8)


# 5x7 bitmap glyphs for legend tick labels
_FONT = {
    "0": ["01110", "10001", "10011", "10101", "11001", "10001", "01110"],
    "1": ["00100", "01100", "00100", "00100", "00100", "00100", "01110"],
    "2": ["01110", "10001", "00001", "00110", "01000", "10000", "11111"],
    "3": ["11110", "00001", "00001", "01110", "00001", "00001", "11110"],
    "4": ["00010", "00110", "01010", "10010", "11111", "00010", "00010"],
    "5": ["11111", "10000", "11110", "00001", "00001", "10001", "01110"],
    "6": ["00110", "01000", "10000", "11110", "10001", "10001", "01110"],
    "7": ["11111", "00001", "00010", "00100", "01000", "01000", "01000"],
    "8": ["01110", "10001", "10001", "01110", "10001", "10001", "01110"],
    "9": ["01110", "10001", "10001", "01111", "00001", "00010", "01100"],
    ".": ["00000", "00000", "00000", "00000", "00000", "01100", "01100"],
    "-": ["00000", "00000", "00000", "11111", "00000", "00000", "00000"],
}


def _draw_text(img: np.ndarray, text: str, row: int, col: int) -> None:
    for ch in text:
        glyph = _FONT.get(ch)
        if glyph is None:
            col += 6
            continue
        for r, bits in enumerate(glyph):
            for c, bit in enumerate(bits):
                rr, cc = row + r, col + c
                if bit == "1" and 0 <= rr < img.shape[0] and 0 <= cc < img.shape[1]:
                    img[rr, cc] = (255, 255, 255)
        col += 6


def _format_hz(v: float) -> str:
    s = f"{v:.6g}"
    return s


def render_freq_map(fmap: FrequencyMap, cfg: FreqMapConfig | None = None,
                    colormap: str = "turbo", legend: bool = True) -> np.ndarray:
    """Render a map to RGB: linear color scale over [f_min, f_max],
    grey (128,128,128) for unestimated pixels, and a vertical legend
    strip with min/max tick labels on the right edge.
    """
    cfg = cfg or FreqMapConfig()
    lut = colormap_lut(colormap)
    h, w = fmap.values.shape
    img = np.empty((h, w, 3), np.uint8)
    img[:] = _GREY
    est = fmap.estimated
    if est.any():
        span = max(cfg.f_max_hz - cfg.f_min_hz, 1e-12)
        norm = (fmap.values[est] - cfg.f_min_hz) / span
        idx = np.clip(np.round(norm * (len(lut) - 1)), 0, len(lut) - 1).astype(np.int64)
        img[est] = lut[idx]
    if not legend:
        return img

    bar_w, text_w, gap = 12, 44, 2
    strip = np.zeros((h, bar_w + text_w + gap, 3), np.uint8)
    # color bar: f_max at top, f_min at bottom
    if h > 1:
        ramp = np.linspace(1.0, 0.0, h)
        bar_idx = np.round(ramp * (len(lut) - 1)).astype(np.int64)
        strip[:, gap:gap + bar_w] = lut[bar_idx][:, None, :]
    if h >= 18:
        _draw_text(strip, _format_hz(cfg.f_max_hz), 1, gap + bar_w + 2)
        _draw_text(strip, _format_hz(cfg.f_min_hz), h - 8, gap + bar_w + 2)
    return np.concatenate([img, strip], axis=1)


def export_map_csv(fmap: FrequencyMap) -> str:
    """Raw map export: ``x,y,freq_hz`` rows, unestimated pixels omitted."""
    ys, xs = np.nonzero(fmap.estimated)
    lines = [f"{x},{y},{float(fmap.values[y, x])!r}"
             for x, y in zip(xs.tolist(), ys.tolist())]
    return "\n".join(lines) + ("\n" if lines else "")

"""Ground-truth generators for validating the analysis pipeline.

Three oracles:

* :func:`synth_flicker` — square-wave illumination over a rectangle, one
  ON and one OFF event per pixel per period, jitter-free timestamps.
* :func:`synth_from_frames` — contrast-threshold sensor model applied to
  a frame sequence, with log-intensity interpolated linearly between
  frames so event timestamps fall on the actual threshold crossings.
* :func:`synth_moving_pattern` — frame sequences with exact sub-pixel
  sinusoidal translation, implemented as a frequency-domain phase ramp.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .frames import FrameSequence
from .model import EventStream, SensorGeometry

MAX_FLICKER_HZ = 5000.0  # microsecond event clock supports 10 kHz sampling
LOG_FLOOR = 1e-3  # intensities are clamped to [LOG_FLOOR, 1] before log


@dataclass(frozen=True)
class SensorModel:
    """Software analogue of pixel sensitivity and dead-time tuning.

    Thresholds are log-intensity steps for positive (ON) and negative
    (OFF) changes; refractory_us suppresses events fired within the dead
    time of the pixel's previous event.
    """

    contrast_threshold_on: float = 0.2
    contrast_threshold_off: float = 0.2
    refractory_us: int = 0

    def __post_init__(self) -> None:
        if not (self.contrast_threshold_on > 0 and self.contrast_threshold_off > 0):
            raise ValueError("contrast thresholds must be positive")
        if self.refractory_us < 0:
            raise ValueError("refractory_us must be >= 0")


class Rect(NamedTuple):
    """Pixel rectangle: x0 <= x < x0+w, y0 <= y < y0+h."""

    x0: int
    y0: int
    w: int
    h: int


def _flicker_edges(freq_hz: float, duration_us: int, phase_deg: float) -> tuple[np.ndarray, np.ndarray]:
    """Rounded edge times and polarities of one square-wave pixel."""
    period = 1e6 / freq_hz
    offset = (phase_deg % 360.0) / 360.0 * period
    # earliest cycle whose ON edge could land at t >= 0
    k0 = math.floor(-offset / period) - 1
    k_max = math.ceil((duration_us - offset) / period) + 1
    ks = np.arange(k0, k_max + 1, dtype=np.float64)
    t_on = np.round(offset + ks * period)
    t_off = np.round(offset + ks * period + period / 2.0)
    t = np.concatenate([t_on, t_off])
    p = np.concatenate([np.ones(len(ks), np.uint8), np.zeros(len(ks), np.uint8)])
    keep = (t >= 0) & (t < duration_us)
    t, p = t[keep], p[keep]
    order = np.argsort(t, kind="stable")
    return t[order].astype(np.int64), p[order]


def _apply_refractory(t: np.ndarray, p: np.ndarray, dead_us: int) -> tuple[np.ndarray, np.ndarray]:
    if dead_us <= 0 or len(t) == 0:
        return t, p
    keep = np.zeros(len(t), bool)
    last = None
    for i, ti in enumerate(t.tolist()):
        if last is None or ti - last >= dead_us:
            keep[i] = True
            last = ti
    return t[keep], p[keep]


def synth_flicker(geometry: SensorGeometry, region: Rect, freq_hz: float,
                  duration_us: int, model: SensorModel | None = None,
                  phase_deg: float = 0.0, *, jitter_us: int = 0,
                  seed: int = 0) -> EventStream:
    """Square-wave flicker stimulus over a pixel rectangle.

    Every pixel in the region emits one ON and one OFF event per period
    (rising/falling illumination edges); pixels outside emit nothing.
    The model's refractory period is honored; contrast thresholds do not
    gate an ideal square wave. ``jitter_us`` adds uniform per-event
    timestamp noise for robustness tests (seeded, default off).
    """
    if not (0 < freq_hz <= MAX_FLICKER_HZ):
        raise ValueError(f"freq_hz must be in (0, {MAX_FLICKER_HZ}], got {freq_hz}")
    if duration_us < 0:
        raise ValueError("duration_us must be >= 0")
    region = Rect(*region)
    if (region.x0 < 0 or region.y0 < 0 or region.w < 0 or region.h < 0
            or region.x0 + region.w > geometry.width
            or region.y0 + region.h > geometry.height):
        raise ValueError(f"region {region} does not fit geometry "
                         f"{geometry.width}x{geometry.height}")
    model = model or SensorModel()
    t_edge, p_edge = _flicker_edges(freq_hz, duration_us, phase_deg)
    t_edge, p_edge = _apply_refractory(t_edge, p_edge, model.refractory_us)

    n_px = region.w * region.h
    n_edge = len(t_edge)
    if n_px == 0 or n_edge == 0:
        return EventStream.empty(geometry)
    xs = region.x0 + np.arange(region.w, dtype=np.int32)
    ys = region.y0 + np.arange(region.h, dtype=np.int32)
    gx, gy = np.meshgrid(xs, ys)
    x = np.repeat(gx.ravel(), n_edge)
    y = np.repeat(gy.ravel(), n_edge)
    t = np.tile(t_edge, n_px)
    p = np.tile(p_edge, n_px)
    if jitter_us > 0:
        rng = np.random.default_rng(seed)
        t = t + rng.integers(-jitter_us, jitter_us + 1, size=len(t))
        t = np.maximum(t, 0)
    return EventStream.from_arrays(geometry, t, x, y, p, canonical_sort=True)


def synth_from_frames(frames: FrameSequence, model: SensorModel | None = None) -> EventStream:
    """Contrast-threshold event simulation from a frame sequence.

    Per pixel the log intensity is tracked against a reference level that
    steps by one threshold per event; between consecutive frames the log
    intensity is interpolated linearly, so crossing timestamps are
    continuous rather than quantized to the frame clock. Crossings fired
    within the refractory window of the pixel's previous emission are
    suppressed but still advance the reference level (the change happened;
    it just was not reported).
    """
    model = model or SensorModel()
    f = frames.frames
    if f.shape[0] < 1:
        raise ValueError("frame sequence is empty")
    logi = np.log(np.clip(f, LOG_FLOOR, 1.0))
    h, w = frames.height, frames.width
    ref = logi[0].copy()
    last_emit = np.full((h, w), -np.inf)
    th_on = model.contrast_threshold_on
    th_off = model.contrast_threshold_off
    refr = float(model.refractory_us)

    yy, xx = np.mgrid[0:h, 0:w]
    ts_all, xs_all, ys_all, ps_all = [], [], [], []
    for k in range(frames.n_frames - 1):
        t0 = k * 1e6 / frames.fps
        t1 = (k + 1) * 1e6 / frames.fps
        l0, l1 = logi[k], logi[k + 1]
        delta = l1 - ref
        n_up = np.floor(np.where(delta > 0, delta / th_on, 0.0)).astype(np.int64)
        n_dn = np.floor(np.where(delta < 0, -delta / th_off, 0.0)).astype(np.int64)
        n_max = int(max(n_up.max(initial=0), n_dn.max(initial=0)))
        slope = l1 - l0
        for j in range(1, n_max + 1):
            for n_cross, th, pol in ((n_up, th_on, 1), (n_dn, -th_off, 0)):
                active = n_cross >= j
                if not active.any():
                    continue
                level = ref + j * th
                # crossing time by linear interpolation of log intensity
                frac = np.zeros_like(slope)
                np.divide(level - l0, slope, out=frac, where=active & (slope != 0))
                t_cross = t0 + np.clip(frac, 0.0, 1.0) * (t1 - t0)
                emit = active & (t_cross - last_emit >= refr)
                last_emit[emit] = t_cross[emit]
                ts_all.append(np.round(t_cross[emit]).astype(np.int64))
                xs_all.append(xx[emit].astype(np.int32))
                ys_all.append(yy[emit].astype(np.int32))
                ps_all.append(np.full(int(emit.sum()), pol, np.uint8))
        ref = ref + n_up * th_on - n_dn * th_off

    if not ts_all:
        return EventStream.empty(SensorGeometry(w, h))
    return EventStream.from_arrays(
        SensorGeometry(w, h),
        np.concatenate(ts_all), np.concatenate(xs_all),
        np.concatenate(ys_all), np.concatenate(ps_all),
        canonical_sort=True)


def make_pattern(width: int, height: int, pattern: str, *,
                 blob_sigma_px=None,
                 grating_period_px: float = 8.0) -> np.ndarray:
    """Base image for :func:`synth_moving_pattern`.

    ``blob_sigma_px`` may be a scalar or an (sigma_x, sigma_y) pair; an
    elongated blob concentrates spectral energy perpendicular to the
    long axis, which keeps horizontal motion inside the horizontal
    pyramid orientation.
    """
    if pattern == "gaussian_blob":
        if blob_sigma_px is None:
            blob_sigma_px = min(width, height) / 12.0
        if np.isscalar(blob_sigma_px):
            sx = sy = float(blob_sigma_px)
        else:
            sx, sy = (float(s) for s in blob_sigma_px)
        yy, xx = np.mgrid[0:height, 0:width]
        r2 = (((xx - (width - 1) / 2.0) / sx) ** 2
              + ((yy - (height - 1) / 2.0) / sy) ** 2)
        return 0.2 + 0.6 * np.exp(-r2 / 2.0)
    if pattern == "sine_grating":
        xx = np.arange(width, dtype=np.float64)
        row = 0.5 + 0.4 * np.sin(2.0 * np.pi * xx / grating_period_px)
        return np.tile(row, (height, 1))
    raise ValueError(f"unknown pattern {pattern!r}")


def translate_exact(image: np.ndarray, dx: float, dy: float = 0.0) -> np.ndarray:
    """Sub-pixel translation via a frequency-domain phase ramp.

    Exact to numerical precision for band-limited content; boundaries are
    periodic. Positive dx moves the image toward larger x.
    """
    h, w = image.shape
    fx = np.fft.fftfreq(w)
    fy = np.fft.fftfreq(h)
    ramp = np.exp(-2j * np.pi * (fx[None, :] * dx + fy[:, None] * dy))
    return np.real(np.fft.ifft2(np.fft.fft2(image) * ramp))


def synth_moving_pattern(width: int, height: int, fps: float, n_frames: int,
                         pattern: str = "gaussian_blob",
                         amplitude_px: float = 0.2,
                         motion_freq_hz: float = 5.0, *,
                         blob_sigma_px=None,
                         grating_period_px: float = 8.0) -> FrameSequence:
    """Frames of a pattern translating as amplitude*sin(2*pi*f*t) along x.

    The shift is applied in the frequency domain so the displacement is
    exact to numerical precision, which makes the sequence usable as a
    ground-truth target for sub-pixel registration.
    """
    if not motion_freq_hz < fps / 2.0:
        raise ValueError(f"motion at {motion_freq_hz} Hz aliases at {fps} fps "
                         f"(needs motion_freq_hz < fps/2)")
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    base = make_pattern(width, height, pattern, blob_sigma_px=blob_sigma_px,
                        grating_period_px=grating_period_px)
    out = np.empty((n_frames, height, width))
    for k in range(n_frames):
        dx = amplitude_px * math.sin(2.0 * math.pi * motion_freq_hz * k / fps)
        out[k] = base if dx == 0.0 else translate_exact(base, dx)
    return FrameSequence(out, fps)

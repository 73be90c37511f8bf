"""Command-line frontend.

One flat binary, nine subcommands: info, convert, synth, filter,
freqmap, render, histogram, magnify, measure. Exit codes: 0 success,
1 usage error (bad flags/values, missing input file), 2 data error
(malformed file contents). Diagnostics go to stderr; data goes to files
or stdout. Windows and bands are given in ms and Hz on the command line
and converted to microseconds at this boundary only.

Every command is deterministic: identical inputs and flags produce
byte-identical outputs, independent of --threads.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import codec, filters, freqmap, magnify, synth
from .errors import EvkitError
from .frames import load_frame_dir, save_frame_dir, write_image
from .model import SensorGeometry, validate_stream
from .synth import Rect, SensorModel


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; this tool reserves 2
    # for data errors
    def error(self, message):
        raise _UsageError(message)


def _parse_pair(text: str, what: str, sep: str = ":") -> tuple[float, float]:
    parts = text.split(sep)
    if len(parts) != 2:
        raise _UsageError(f"{what} must look like LO{sep}HI, got {text!r}")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise _UsageError(f"non-numeric {what}: {text!r}") from None
    return lo, hi


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = (int(s) for s in text.lower().split("x"))
        return w, h
    except ValueError:
        raise _UsageError(f"size must look like WxH, got {text!r}") from None


def _parse_rect(text: str) -> Rect:
    try:
        x0, y0, w, h = (int(s) for s in text.split(":"))
        return Rect(x0, y0, w, h)
    except ValueError:
        raise _UsageError(f"region must look like X:Y:W:H, got {text!r}") from None


class _OrderedFilterAction(argparse.Action):
    """Append (op, value) preserving the order filters appear on the line."""

    def __call__(self, parser, namespace, values, option_string=None):
        ops = getattr(namespace, "ops", None)
        if ops is None:
            ops = []
            setattr(namespace, "ops", ops)
        ops.append((self.dest, values if values is not None else True))


def _require_file(path: str) -> None:
    if not os.path.exists(path):
        raise _UsageError(f"input path does not exist: {path}")


def _freq_cfg(args, min_intervals: int | None = None) -> freqmap.FreqMapConfig:
    transition = (freqmap.Transition.ON_TO_OFF if args.transition == "on-off"
                  else freqmap.Transition.OFF_TO_ON)
    return freqmap.FreqMapConfig(
        transition=transition,
        window_us=int(round(args.window_ms * 1000)),
        min_intervals=args.min_intervals if min_intervals is None else min_intervals,
        estimator=args.estimator,
        f_min_hz=args.fmin,
        f_max_hz=args.fmax)


def _add_freq_flags(p: argparse.ArgumentParser, window_default: float) -> None:
    p.add_argument("--window-ms", type=float, default=window_default,
                   help=f"batch window in ms (default {window_default})")
    p.add_argument("--transition", choices=["on-off", "off-on"], default="on-off")
    p.add_argument("--estimator", choices=["mean", "median"], default="mean")
    p.add_argument("--fmin", type=float, default=1.0)
    p.add_argument("--fmax", type=float, default=5000.0)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0,
                        help="seed for randomized synthesis (default 0)")
    common.add_argument("--threads", type=int, default=1,
                        help="worker parallelism cap; output is independent of it")

    parser = _Parser(prog="evkit",
                     description="Event-camera frequency maps and phase-based "
                                 "motion magnification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("info", parents=[common], help="print stream metadata")
    p.add_argument("input")

    p = sub.add_parser("convert", parents=[common], help="convert csv <-> evs1")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--sort", action="store_true",
                   help="sort out-of-order input instead of rejecting it")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)

    p = sub.add_parser("synth", parents=[common], help="generate ground-truth data")
    mode = p.add_subparsers(dest="mode", required=True)

    pf = mode.add_parser("flicker", parents=[common])
    pf.add_argument("--geometry", default="1280x720", help="sensor size WxH")
    pf.add_argument("--region", required=True, help="stimulated rectangle X:Y:W:H")
    pf.add_argument("--freq", type=float, required=True, help="flicker rate in Hz")
    pf.add_argument("--duration-ms", type=float, required=True)
    pf.add_argument("--phase-deg", type=float, default=0.0)
    pf.add_argument("--jitter-us", type=int, default=0)
    pf.add_argument("--refractory-us", type=int, default=0)
    pf.add_argument("--out", required=True)

    pv = mode.add_parser("from-frames", parents=[common])
    pv.add_argument("frames", help="directory of PGM frames")
    pv.add_argument("--fps", type=float, required=True)
    pv.add_argument("--threshold-on", type=float, default=0.2)
    pv.add_argument("--threshold-off", type=float, default=0.2)
    pv.add_argument("--refractory-us", type=int, default=0)
    pv.add_argument("--out", required=True)

    pm = mode.add_parser("moving-pattern", parents=[common])
    pm.add_argument("--size", default="128x128", help="frame size WxH")
    pm.add_argument("--fps", type=float, required=True)
    pm.add_argument("--frames", type=int, required=True)
    pm.add_argument("--pattern", choices=["gaussian_blob", "sine_grating"],
                    default="gaussian_blob")
    pm.add_argument("--amplitude-px", type=float, default=0.2)
    pm.add_argument("--motion-freq", type=float, default=5.0)
    pm.add_argument("--blob-sigma", default=None,
                    help="blob sigma in px, SX or SX:SY")
    pm.add_argument("--grating-period", type=float, default=8.0)
    pm.add_argument("--out", required=True, help="output frame directory")

    p = sub.add_parser("filter", parents=[common],
                       help="chain event filters in flag order")
    p.add_argument("input")
    p.add_argument("--out", required=True)
    p.add_argument("--stc-window-us", dest="stc", type=int, action=_OrderedFilterAction,
                   help="STC burst window; keeps the second event of a burst")
    p.add_argument("--keep-trail", action="store_true",
                   help="STC keeps trail events (third onward in a burst)")
    p.add_argument("--refractory-us", dest="refractory", type=int,
                   action=_OrderedFilterAction, help="per-pixel dead time")
    p.add_argument("--erc-keps", dest="erc", type=float, action=_OrderedFilterAction,
                   help="event-rate cap in kilo-events/second")
    p.add_argument("--erc-window-ms", type=float, default=10.0)
    p.add_argument("--af-band", dest="af", action=_OrderedFilterAction,
                   help="anti-flicker reject band LO:HI in Hz (repeatable)")
    p.add_argument("--window-ms", type=float, default=50.0,
                   help="anti-flicker estimation window")
    p.add_argument("--config", help="key=value filter config file, applied in line order")

    p = sub.add_parser("freqmap", parents=[common],
                       help="per-pixel frequency map over temporal batches")
    p.add_argument("input")
    _add_freq_flags(p, window_default=20.0)
    p.add_argument("--min-intervals", type=int, default=1,
                   help="intervals required per window before estimating; the "
                        "streaming default 1 gives lowest latency, raise to "
                        "average out jitter (library default: 2)")
    p.add_argument("--isolated-windows", action="store_true",
                   help="do not carry transition state across windows")
    p.add_argument("--colormap", choices=["turbo", "hsv"], default="turbo")
    p.add_argument("--out", help="rendered map image (.ppm or .png)")
    p.add_argument("--csv", help="raw map export: x,y,freq_hz")

    p = sub.add_parser("render", parents=[common], help="render a map CSV to an image")
    p.add_argument("input", help="map CSV from `evkit freqmap --csv`")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--fmin", type=float, default=1.0)
    p.add_argument("--fmax", type=float, default=5000.0)
    p.add_argument("--colormap", choices=["turbo", "hsv"], default="turbo")
    p.add_argument("--out", required=True)

    p = sub.add_parser("histogram", parents=[common],
                       help="frequency histogram of a map CSV; prints the dominant bin")
    p.add_argument("input", help="map CSV from `evkit freqmap --csv`")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--fmin", type=float)
    p.add_argument("--fmax", type=float)
    p.add_argument("--csv", help="write lo_hz,hi_hz,count rows")

    p = sub.add_parser("magnify", parents=[common],
                       help="phase-based motion magnification of a frame directory")
    p.add_argument("frames")
    p.add_argument("--fps", type=float, required=True)
    p.add_argument("--band", help="temporal passband LO:HI in Hz")
    p.add_argument("--band-from", help="histogram CSV; use its dominant bin as the band")
    p.add_argument("--m", type=float, required=True, help="magnification factor")
    p.add_argument("--filter-kind", choices=["butterworth", "fir"], default="butterworth")
    p.add_argument("--order", type=int, default=2, help="butterworth order")
    p.add_argument("--taps", type=int, default=65, help="FIR tap count (odd)")
    p.add_argument("--sigma", type=float, default=2.0,
                   help="phase denoising sigma in px (0 disables)")
    p.add_argument("--orientations", type=int, default=4)
    p.add_argument("--octave-fraction", type=int, choices=[1, 2], default=1)
    p.add_argument("--amplify-lowpass", action="store_true")
    p.add_argument("--out", required=True, help="output frame directory")

    p = sub.add_parser("measure", parents=[common],
                       help="sub-pixel displacement of each frame vs a reference")
    p.add_argument("frames")
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--reference", type=int, default=0)
    p.add_argument("--csv", help="output CSV (default stdout): frame,dx,dy")
    return parser


def _cmd_info(args) -> int:
    _require_file(args.input)
    stream = codec.read_stream(args.input)
    problems = validate_stream(stream)
    n_on = int(np.count_nonzero(stream.p))
    print(f"geometry: {stream.geometry.width}x{stream.geometry.height}")
    print(f"events: {len(stream)}")
    if len(stream):
        print(f"t_first_us: {int(stream.t[0])}")
        print(f"t_last_us: {int(stream.t[-1])}")
    print(f"duration_us: {stream.duration_us}")
    print(f"on: {n_on}")
    print(f"off: {len(stream) - n_on}")
    for msg in problems:
        print(f"invalid: {msg}", file=sys.stderr)
    return 0 if not problems else 2


def _cmd_convert(args) -> int:
    _require_file(args.input)
    geometry = None
    if args.width or args.height:
        if not (args.width and args.height):
            raise _UsageError("--width and --height must be given together")
        geometry = SensorGeometry(args.width, args.height)
    stream = codec.read_stream(args.input, sort=args.sort, geometry=geometry)
    codec.write_stream(args.out, stream)
    return 0


def _cmd_synth(args) -> int:
    if args.mode == "flicker":
        w, h = _parse_size(args.geometry)
        model = SensorModel(refractory_us=args.refractory_us)
        stream = synth.synth_flicker(
            SensorGeometry(w, h), _parse_rect(args.region), args.freq,
            int(round(args.duration_ms * 1000)), model, args.phase_deg,
            jitter_us=args.jitter_us, seed=args.seed)
        codec.write_stream(args.out, stream)
    elif args.mode == "from-frames":
        _require_file(args.frames)
        frames = load_frame_dir(args.frames, args.fps)
        model = SensorModel(args.threshold_on, args.threshold_off, args.refractory_us)
        stream = synth.synth_from_frames(frames, model)
        codec.write_stream(args.out, stream)
    else:
        w, h = _parse_size(args.size)
        sigma = None
        if args.blob_sigma:
            parts = args.blob_sigma.split(":")
            sigma = float(parts[0]) if len(parts) == 1 else (float(parts[0]), float(parts[1]))
        seq = synth.synth_moving_pattern(
            w, h, args.fps, args.frames, args.pattern, args.amplitude_px,
            args.motion_freq, blob_sigma_px=sigma,
            grating_period_px=args.grating_period)
        save_frame_dir(args.out, seq)
    return 0


def parse_filter_config(text: str) -> list[tuple[str, object]]:
    """key=value lines -> ordered filter ops (stc/refractory/erc/af keys)."""
    ops: list[tuple[str, object]] = []
    settings: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise _UsageError(f"filter config line {lineno}: expected key=value")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "stc_window_us":
            ops.append(("stc", int(value)))
        elif key == "refractory_us":
            ops.append(("refractory", int(value)))
        elif key == "erc_keps":
            ops.append(("erc", float(value)))
        elif key == "af_band":
            ops.append(("af", value))
        elif key in ("keep_trail", "erc_window_ms", "window_ms"):
            settings[key] = value
        else:
            raise _UsageError(f"filter config line {lineno}: unknown key {key!r}")
    if settings:
        ops.append(("settings", settings))
    return ops


def _cmd_filter(args) -> int:
    _require_file(args.input)
    stream = codec.read_stream(args.input)
    ops = list(getattr(args, "ops", []) or [])
    keep_trail = args.keep_trail
    erc_window_ms = args.erc_window_ms
    af_window_ms = args.window_ms
    if args.config:
        _require_file(args.config)
        with open(args.config, "r", encoding="ascii") as fh:
            for op, value in parse_filter_config(fh.read()):
                if op == "settings":
                    keep_trail = value.get("keep_trail", str(keep_trail)).lower() in ("1", "true", "yes")
                    erc_window_ms = float(value.get("erc_window_ms", erc_window_ms))
                    af_window_ms = float(value.get("window_ms", af_window_ms))
                else:
                    ops.append((op, value))
    if not ops:
        raise _UsageError("no filters given (use --stc-window-us/--refractory-us/"
                          "--erc-keps/--af-band or --config)")
    af_bands: list[filters.FlickerBand] = []
    for op, value in ops:
        if op == "af":
            lo, hi = _parse_pair(str(value), "--af-band")
            af_bands.append(filters.FlickerBand(lo, hi))
    for op, value in ops:
        if op == "stc":
            stream = filters.stc_filter(stream, filters.StcConfig(int(value), keep_trail))
        elif op == "refractory":
            stream = filters.refractory_filter(stream, int(value))
        elif op == "erc":
            cfg = filters.ErcConfig(float(value) * 1000.0, int(round(erc_window_ms * 1000)))
            stream = filters.erc_decimate(stream, cfg)
        elif op == "af" and af_bands:
            stream = filters.anti_flicker(stream, af_bands,
                                          int(round(af_window_ms * 1000)))
            af_bands = []  # repeated --af-band flags form one rejection pass
    codec.write_stream(args.out, stream)
    return 0


def _cmd_freqmap(args) -> int:
    _require_file(args.input)
    if not args.out and not args.csv:
        raise _UsageError("freqmap needs --out and/or --csv")
    stream = codec.read_stream(args.input)
    cfg = _freq_cfg(args)
    maps = [m for _, m in freqmap.stream_freq_maps(
        stream, cfg, carry_state=not args.isolated_windows)]
    if maps:
        merged = freqmap.merge_freq_maps(maps)
    else:
        merged = freqmap.FrequencyMap(
            stream.geometry,
            np.full((stream.geometry.height, stream.geometry.width), np.nan))
    if args.out:
        write_image(args.out, freqmap.render_freq_map(merged, cfg, args.colormap))
    if args.csv:
        with open(args.csv, "w", encoding="ascii", newline="\n") as fh:
            fh.write(freqmap.export_map_csv(merged))
    print(f"windows: {len(maps)}", file=sys.stderr)
    print(f"estimated pixels: {merged.n_estimated}", file=sys.stderr)
    return 0


def _read_map_csv(path: str, width: int, height: int) -> freqmap.FrequencyMap:
    from .errors import ParseError

    values = np.full((height, width), np.nan)
    with open(path, "r", encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError("expected x,y,freq_hz", line=lineno)
            try:
                x, y, f = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"malformed row {line!r}", line=lineno) from None
            if not (0 <= x < width and 0 <= y < height):
                raise ParseError(f"coordinate ({x},{y}) outside {width}x{height}",
                                 line=lineno)
            values[y, x] = f
    return freqmap.FrequencyMap(SensorGeometry(width, height), values)


def _cmd_render(args) -> int:
    _require_file(args.input)
    fmap = _read_map_csv(args.input, args.width, args.height)
    cfg = freqmap.FreqMapConfig(f_min_hz=args.fmin, f_max_hz=args.fmax)
    write_image(args.out, freqmap.render_freq_map(fmap, cfg, args.colormap))
    return 0


def _read_freqs_csv(path: str) -> np.ndarray:
    vals = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if line:
                vals.append(float(line.split(",")[2]))
    return np.asarray(vals)


def _cmd_histogram(args) -> int:
    _require_file(args.input)
    freqs = _read_freqs_csv(args.input)
    if args.bins < 1:
        raise _UsageError("--bins must be >= 1")
    if len(freqs) == 0:
        print("empty")
        return 0
    lo = args.fmin if args.fmin is not None else float(freqs.min())
    hi = args.fmax if args.fmax is not None else float(freqs.max())
    if hi <= lo:
        hi = lo + 1.0
    counts, edges = np.histogram(freqs, bins=args.bins, range=(lo, hi))
    if args.csv:
        with open(args.csv, "w", encoding="ascii", newline="\n") as fh:
            for i, c in enumerate(counts):
                fh.write(f"{float(edges[i])!r},{float(edges[i + 1])!r},{int(c)}\n")
    i = int(np.argmax(counts))
    print(f"dominant: {float(edges[i])!r}:{float(edges[i + 1])!r} count={int(counts[i])}")
    return 0


def _cmd_magnify(args) -> int:
    _require_file(args.frames)
    if bool(args.band) == bool(args.band_from):
        raise _UsageError("give exactly one of --band or --band-from")
    if args.band:
        lo, hi = _parse_pair(args.band, "--band")
    else:
        _require_file(args.band_from)
        best = None
        with open(args.band_from, "r", encoding="ascii") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                blo, bhi, count = line.split(",")
                row = (int(count), float(blo), float(bhi))
                if best is None or row[0] > best[0]:
                    best = row
        if best is None:
            raise _UsageError(f"empty histogram file {args.band_from}")
        lo, hi = best[1], best[2]
        print(f"band from histogram: {lo}:{hi}", file=sys.stderr)
    frames = load_frame_dir(args.frames, args.fps)
    spec = magnify.TemporalFilter(lo, hi, args.fps, kind=args.filter_kind,
                                  order=args.order, n_taps=args.taps)
    params = magnify.MagnifyParams(m=args.m, filter=spec,
                                   denoise_sigma_px=args.sigma,
                                   amplify_lowpass_residual=args.amplify_lowpass)
    out = magnify.magnify_sequence(frames, params,
                                   n_orientations=args.orientations,
                                   octave_fraction=args.octave_fraction,
                                   threads=max(1, args.threads))
    save_frame_dir(args.out, out)
    n_transient = int(magnify.transient_mask(params, out.n_frames).sum())
    print(f"transient frames: {n_transient}", file=sys.stderr)
    return 0


def _cmd_measure(args) -> int:
    _require_file(args.frames)
    frames = load_frame_dir(args.frames, args.fps)
    disp = magnify.measure_displacement(frames, args.reference)
    lines = [f"{k},{float(disp[k, 0])!r},{float(disp[k, 1])!r}" for k in range(len(disp))]
    text = "\n".join(lines) + "\n"
    if args.csv:
        with open(args.csv, "w", encoding="ascii", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0


_HANDLERS = {
    "info": _cmd_info,
    "convert": _cmd_convert,
    "synth": _cmd_synth,
    "filter": _cmd_filter,
    "freqmap": _cmd_freqmap,
    "render": _cmd_render,
    "histogram": _cmd_histogram,
    "magnify": _cmd_magnify,
    "measure": _cmd_measure,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _HANDLERS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except EvkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()

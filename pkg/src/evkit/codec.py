"""Bit-exact event stream codecs: CSV text and the EVS1 binary container.

EVS1 layout (little-endian throughout):

    header, 14 bytes:  magic b"EVS1\\n" | version u8 (=1) | width u16
                       | height u16 | 4 reserved zero bytes
    records, 16 bytes each:  t u64 | x u16 | y u16 | p u8 (0/1) | 3 pad bytes

CSV is one ``t,x,y,p`` line per event (decimal ASCII, p in {0,1}); the
canonical encoding has no header line, but a single ``t,x,y,p`` header is
tolerated on decode.
"""
from __future__ import annotations

import struct
import warnings

import numpy as np

from .errors import OrderError, ParseError
from .model import EventStream, SensorGeometry

EVS1_MAGIC = b"EVS1\n"
EVS1_VERSION = 1
EVS1_HEADER = struct.Struct("<5sBHH4s")
EVS1_RECORD_DTYPE = np.dtype([("t", "<u8"), ("x", "<u2"), ("y", "<u2"),
                              ("p", "u1"), ("pad", "u1", (3,))])
assert EVS1_RECORD_DTYPE.itemsize == 16


def _check_order(t: np.ndarray, sort: bool):
    if len(t) < 2:
        return None
    drops = np.nonzero(np.diff(t) < 0)[0]
    if len(drops) == 0:
        return None
    if not sort:
        raise OrderError(
            f"events out of order at record {drops[0] + 1}; pass sort=True to reorder")
    return np.argsort(t, kind="stable")


def decode_csv(text: str, geometry: SensorGeometry | None = None, *,
               sort: bool = False) -> EventStream:
    """Parse ``t,x,y,p`` lines into a stream.

    Geometry is inferred as (max x + 1, max y + 1) when not supplied.
    Out-of-order input is rejected unless ``sort`` is set; malformed lines
    raise :class:`ParseError` carrying the 1-based line number.
    """
    ts, xs, ys, ps = [], [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if lineno == 1 and line.replace(" ", "") == "t,x,y,p":
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ParseError(f"expected 4 comma-separated fields, got {len(parts)}", line=lineno)
        try:
            t, x, y, p = (int(s) for s in parts)
        except ValueError:
            raise ParseError(f"non-integer field in {line!r}", line=lineno) from None
        if p not in (0, 1):
            raise ParseError(f"polarity must be 0 or 1, got {p}", line=lineno)
        if t < 0:
            raise ParseError(f"negative timestamp {t}", line=lineno)
        if x < 0 or y < 0:
            raise ParseError("negative coordinate", line=lineno)
        ts.append(t)
        xs.append(x)
        ys.append(y)
        ps.append(p)

    t_arr = np.array(ts, np.int64)
    x_arr = np.array(xs, np.int32)
    y_arr = np.array(ys, np.int32)
    p_arr = np.array(ps, np.uint8)
    if geometry is None:
        w = int(x_arr.max()) + 1 if len(x_arr) else 1
        h = int(y_arr.max()) + 1 if len(y_arr) else 1
        geometry = SensorGeometry(w, h)
    else:
        if len(x_arr) and (int(x_arr.max()) >= geometry.width or int(y_arr.max()) >= geometry.height):
            raise ParseError("coordinate out of range for supplied geometry")
    order = _check_order(t_arr, sort)
    if order is not None:
        t_arr, x_arr, y_arr, p_arr = t_arr[order], x_arr[order], y_arr[order], p_arr[order]
    return EventStream(geometry, t_arr, x_arr, y_arr, p_arr)


def encode_csv(stream: EventStream) -> str:
    """Canonical CSV: no header, one ``t,x,y,p`` line per event, newline-terminated."""
    if len(stream) == 0:
        return ""
    lines = [f"{t},{x},{y},{p}" for t, x, y, p in
             zip(stream.t.tolist(), stream.x.tolist(), stream.y.tolist(), stream.p.tolist())]
    return "\n".join(lines) + "\n"


def decode_evs1(data: bytes, *, sort: bool = False) -> EventStream:
    """Decode an EVS1 byte string.

    Rejects bad magic/version, truncated records and out-of-range
    coordinates; nonzero record padding is reported as a warning only,
    so future writers may extend the pad bytes compatibly.
    """
    if len(data) < EVS1_HEADER.size:
        raise ParseError("truncated header", offset=len(data))
    magic, version, width, height, reserved = EVS1_HEADER.unpack_from(data, 0)
    if magic != EVS1_MAGIC:
        raise ParseError(f"bad magic {magic!r}", offset=0)
    if version != EVS1_VERSION:
        raise ParseError(f"unsupported version {version}", offset=5)
    if width < 1 or height < 1:
        raise ParseError(f"invalid geometry {width}x{height}", offset=6)
    if reserved != b"\x00\x00\x00\x00":
        warnings.warn("nonzero reserved header bytes", stacklevel=2)
    body = data[EVS1_HEADER.size:]
    if len(body) % EVS1_RECORD_DTYPE.itemsize != 0:
        raise ParseError(
            f"truncated record: body of {len(body)} bytes is not a multiple of 16",
            offset=EVS1_HEADER.size + len(body) - len(body) % 16)
    records = np.frombuffer(body, dtype=EVS1_RECORD_DTYPE)
    if np.any(records["pad"]):
        warnings.warn("nonzero record padding bytes", stacklevel=2)
    if np.any(records["p"] > 1):
        bad = int(np.nonzero(records["p"] > 1)[0][0])
        raise ParseError(f"invalid polarity in record {bad}",
                         offset=EVS1_HEADER.size + bad * 16 + 12)
    if np.any(records["x"] >= width) or np.any(records["y"] >= height):
        bad = int(np.nonzero((records["x"] >= width) | (records["y"] >= height))[0][0])
        raise ParseError(f"coordinate out of range in record {bad}",
                         offset=EVS1_HEADER.size + bad * 16)
    if np.any(records["t"] > np.uint64(np.iinfo(np.int64).max)):
        raise ParseError("timestamp exceeds signed 64-bit range")
    t = records["t"].astype(np.int64)
    x = records["x"].astype(np.int32)
    y = records["y"].astype(np.int32)
    p = records["p"].astype(np.uint8)
    order = _check_order(t, sort)
    if order is not None:
        t, x, y, p = t[order], x[order], y[order], p[order]
    return EventStream(SensorGeometry(int(width), int(height)), t, x, y, p)


def encode_evs1(stream: EventStream) -> bytes:
    """Encode a valid stream; output is exactly header + 16*N bytes."""
    g = stream.geometry
    if g.width > 0xFFFF or g.height > 0xFFFF:
        raise ValueError("EVS1 geometry fields are 16-bit")
    header = EVS1_HEADER.pack(EVS1_MAGIC, EVS1_VERSION, g.width, g.height, b"\x00" * 4)
    records = np.zeros(len(stream), dtype=EVS1_RECORD_DTYPE)
    records["t"] = stream.t.astype(np.uint64)
    records["x"] = stream.x.astype(np.uint16)
    records["y"] = stream.y.astype(np.uint16)
    records["p"] = stream.p
    return header + records.tobytes()


def read_stream(path: str, *, sort: bool = False,
                geometry: SensorGeometry | None = None) -> EventStream:
    """Load a stream from a ``.csv`` or ``.evs1`` file by extension."""
    if path.endswith(".csv"):
        with open(path, "r", encoding="ascii") as fh:
            return decode_csv(fh.read(), geometry, sort=sort)
    if path.endswith(".evs1"):
        with open(path, "rb") as fh:
            return decode_evs1(fh.read(), sort=sort)
    raise ValueError(f"unknown event file extension: {path!r} (expected .csv or .evs1)")


def write_stream(path: str, stream: EventStream) -> None:
    """Write a stream to ``.csv`` or ``.evs1`` by extension."""
    if path.endswith(".csv"):
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write(encode_csv(stream))
    elif path.endswith(".evs1"):
        with open(path, "wb") as fh:
            fh.write(encode_evs1(stream))
    else:
        raise ValueError(f"unknown event file extension: {path!r} (expected .csv or .evs1)")

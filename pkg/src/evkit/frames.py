"""Grayscale frame sequences and deterministic image I/O.

Frames live in memory as float64 arrays in [0, 1]. On disk a sequence is
a directory of 8-bit binary PGM (P5) files with zero-padded numeric
names; the frame rate travels out of band (CLI ``--fps`` flag). Rendered
maps are written as binary PPM (P6) or PNG.
"""
from __future__ import annotations

import os
import re
from dataclasses import dataclass

import numpy as np

from .errors import ParseError


@dataclass(frozen=True)
class FrameSequence:
    """Ordered grayscale frames at a fixed frame rate.

    ``frames`` has shape (n_frames, height, width), values in [0, 1].
    """

    frames: np.ndarray
    fps: float

    def __post_init__(self) -> None:
        f = np.asarray(self.frames, np.float64)
        if f.ndim != 3 or f.shape[0] < 1:
            raise ValueError("frames must be a (n>=1, height, width) array")
        if not self.fps > 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "frames", f)

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def frame_time_us(self, k: int) -> int:
        return int(round(k * 1e6 / self.fps))

    def __len__(self) -> int:
        return self.n_frames


def _read_pgm_tokens(data: bytes, n: int, pos: int) -> tuple[list[bytes], int]:
    # header tokens are whitespace-separated; '#' starts a comment to EOL
    tokens: list[bytes] = []
    while len(tokens) < n:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ParseError("unexpected end of PGM header", offset=pos)
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path: str) -> np.ndarray:
    """Read an 8-bit binary PGM into a float64 image in [0, 1]."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise ParseError(f"not a binary PGM (P5): {path}", offset=0)
    tokens, pos = _read_pgm_tokens(data, 3, 2)
    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError:
        raise ParseError(f"malformed PGM header in {path}") from None
    if maxval != 255:
        raise ParseError(f"only maxval 255 PGM supported, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    body = data[pos:pos + width * height]
    if len(body) != width * height:
        raise ParseError(f"truncated PGM body in {path}", offset=pos + len(body))
    img = np.frombuffer(body, np.uint8).reshape(height, width)
    return img.astype(np.float64) / 255.0


def write_pgm(path: str, image: np.ndarray) -> None:
    """Write a [0, 1] grayscale image as binary PGM; values are clipped."""
    img = np.asarray(image, np.float64)
    if img.ndim != 2:
        raise ValueError("PGM image must be 2-D")
    data = np.clip(np.round(img * 255.0), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def write_ppm(path: str, rgb: np.ndarray) -> None:
    """Write an (H, W, 3) uint8 image as binary PPM (P6)."""
    img = np.asarray(rgb)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError("PPM image must be (H, W, 3) uint8")
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def write_image(path: str, rgb: np.ndarray) -> None:
    """Write an RGB image as .ppm or .png by extension."""
    if path.endswith(".ppm"):
        write_ppm(path, rgb)
    elif path.endswith(".png"):
        from PIL import Image

        Image.fromarray(np.asarray(rgb, np.uint8), mode="RGB").save(path)
    else:
        raise ValueError(f"unknown image extension: {path!r} (expected .ppm or .png)")


_FRAME_NAME = re.compile(r"^(\d+)\.pgm$")


def load_frame_dir(directory: str, fps: float) -> FrameSequence:
    """Load a directory of numeric ``NNNNNN.pgm`` frames in numeric order."""
    names = []
    for name in os.listdir(directory):
        m = _FRAME_NAME.match(name)
        if m:
            names.append((int(m.group(1)), name))
    if not names:
        raise ParseError(f"no .pgm frames found in {directory}")
    names.sort()
    imgs = [read_pgm(os.path.join(directory, name)) for _, name in names]
    shape = imgs[0].shape
    for (_, name), img in zip(names, imgs):
        if img.shape != shape:
            raise ParseError(f"frame {name} has shape {img.shape}, expected {shape}")
    return FrameSequence(np.stack(imgs), fps)


def save_frame_dir(directory: str, seq: FrameSequence) -> None:
    """Write frames as zero-padded ``NNNNNN.pgm`` files."""
    os.makedirs(directory, exist_ok=True)
    for k in range(seq.n_frames):
        write_pgm(os.path.join(directory, f"{k:06d}.pgm"), seq.frames[k])

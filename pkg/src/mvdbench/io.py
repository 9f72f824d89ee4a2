"""PFM and binary PPM file I/O.

PFM maps are written as single-channel ``Pf`` files in little-endian order
(negative scale), with rows stored bottom to top. Reading returns float32
arrays in top-to-bottom row order so that a write/read cycle is bit exact.
"""
from __future__ import annotations

import math

import numpy as np


class FormatError(ValueError):
    """A file does not follow the format it claims to be in."""


def _read_header_lines(buf: bytes, count: int) -> tuple[list[bytes], int]:
    lines = []
    pos = 0
    for _ in range(count):
        end = buf.find(b"\n", pos)
        if end < 0:
            raise FormatError("truncated header")
        lines.append(buf[pos:end].strip())
        pos = end + 1
    return lines, pos


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        buf = f.read()
    (magic, dims, scale_line), offset = _read_header_lines(buf, 3)
    if magic == b"PF":
        raise FormatError(f"{path}: magic: colour PFM (PF) is not a depth map")
    if magic != b"Pf":
        raise FormatError(f"{path}: magic: expected 'Pf', got {magic[:16]!r}")
    parts = dims.split()
    if len(parts) != 2:
        raise FormatError(f"{path}: dimensions: expected 'W H', got {dims[:32]!r}")
    try:
        width, height = int(parts[0]), int(parts[1])
    except ValueError:
        raise FormatError(f"{path}: dimensions: not integers: {dims[:32]!r}") from None
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: dimensions: must be positive, got {width}x{height}")
    try:
        scale = float(scale_line)
    except ValueError:
        raise FormatError(f"{path}: scale: not a number: {scale_line[:32]!r}") from None
    if not math.isfinite(scale) or scale == 0.0:
        raise FormatError(f"{path}: scale: must be finite and nonzero, got {scale_line[:32]!r}")
    dtype = "<f4" if scale < 0 else ">f4"
    expected = width * height * 4
    payload = buf[offset:]
    if len(payload) < expected:
        raise FormatError(f"{path}: payload: expected {expected} bytes, got {len(payload)}")
    data = np.frombuffer(payload, dtype=dtype, count=width * height).reshape(height, width)
    return np.flipud(data).astype(np.float32)


def write_pfm(path, depth: np.ndarray) -> None:
    depth = np.asarray(depth)
    if depth.ndim != 2:
        raise ValueError(f"expected a 2-D map, got shape {depth.shape}")
    h, w = depth.shape
    # scale line is fixed-width so a 1x1 file has a 15-byte header
    header = f"Pf\n{w} {h}\n{-1.0:.4f}\n".encode("ascii")
    payload = np.ascontiguousarray(np.flipud(depth.astype("<f4", copy=False))).tobytes()
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload)


def _ppm_tokens(buf: bytes, count: int) -> tuple[list[bytes], int]:
    tokens = []
    pos = 0
    n = len(buf)
    while len(tokens) < count:
        while pos < n and buf[pos : pos + 1].isspace():
            pos += 1
        if pos < n and buf[pos : pos + 1] == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < n and not buf[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated PPM header")
        tokens.append(buf[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    return tokens, pos + 1


def read_ppm(path) -> np.ndarray:
    """Binary P6 image -> (H, W, 3) float64 in [0, 1]."""
    with open(path, "rb") as f:
        buf = f.read()
    if buf[:2] != b"P6":
        raise FormatError(f"{path}: magic: expected 'P6', got {buf[:2]!r}")
    (_, w, h, maxval), offset = _ppm_tokens(buf, 4)
    try:
        width, height, mv = int(w), int(h), int(maxval)
    except ValueError:
        raise FormatError(f"{path}: malformed header") from None
    if mv != 255:
        raise FormatError(f"{path}: maxval: only 255 is supported, got {mv}")
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: dimensions: must be positive, got {width}x{height}")
    expected = width * height * 3
    raster = buf[offset : offset + expected]
    if len(raster) < expected:
        raise FormatError(f"{path}: payload: expected {expected} bytes, got {len(raster)}")
    img = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return img.astype(np.float64) / 255.0


def write_ppm(path, image: np.ndarray) -> None:
    """(H, W, 3) image in [0, 1] -> binary P6 with values ``round(255 * v)``."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = np.repeat(img[..., None], 3, axis=-1)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {img.shape}")
    q = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = q.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(q.tobytes())

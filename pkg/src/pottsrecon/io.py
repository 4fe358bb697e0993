"""Image and sinogram files: binary PGM and a lossless raw float64 grid."""

from __future__ import annotations

import re
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "FormatError",
    "RAW_MAGIC",
    "read_image",
    "read_pgm",
    "read_raw",
    "write_image",
    "write_labels",
    "write_pgm",
    "write_raw",
]

#: 8-byte magic of the raw grid format, followed by uint32 width and height.
RAW_MAGIC = b"POTTSF64"
_RAW_HEADER = struct.Struct("<8sII")

_PGM_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*(\S+)")


class FormatError(ValueError):
    """Raised for files that exist but do not parse."""


def read_pgm(path) -> np.ndarray:
    """Read a binary (P5) PGM, scaling samples to ``[0, 1]`` by maxval."""
    data = Path(path).read_bytes()
    pos = 0
    fields = []
    for _ in range(4):
        m = _PGM_TOKEN.match(data, pos)
        if m is None:
            raise FormatError(f"{path}: truncated PGM header")
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P5":
        raise FormatError(f"{path}: not a binary PGM (magic {fields[0]!r})")
    try:
        width, height, maxval = (int(x) for x in fields[1:])
    except ValueError:
        raise FormatError(f"{path}: malformed PGM header") from None
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise FormatError(f"{path}: invalid PGM dimensions or maxval")
    pos += 1  # single whitespace byte before the raster
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    size = width * height * dtype.itemsize
    raster = data[pos : pos + size]
    if len(raster) != size:
        raise FormatError(f"{path}: expected {size} raster bytes, found {len(raster)}")
    img = np.frombuffer(raster, dtype=dtype).reshape(height, width)
    return img.astype(np.float64) / maxval


def write_pgm(path, img, bits: int = 8) -> None:
    """Write ``img`` (values in ``[0, 1]``, clipped) as an 8- or 16-bit binary PGM."""
    if bits not in (8, 16):
        raise ValueError("bits must be 8 or 16")
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("PGM images must be 2-D")
    maxval = 255 if bits == 8 else 65535
    q = np.rint(np.clip(img, 0.0, 1.0) * maxval)
    raster = q.astype(">u2" if bits == 16 else "u1").tobytes()
    h, w = img.shape
    Path(path).write_bytes(b"P5\n%d %d\n%d\n" % (w, h, maxval) + raster)


def write_labels(path, labels) -> None:
    """Write an integer label image as a 16-bit PGM with raw label values."""
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 65535:
        raise ValueError("labels must lie in [0, 65535]")
    h, w = labels.shape
    Path(path).write_bytes(b"P5\n%d %d\n65535\n" % (w, h) + labels.astype(">u2").tobytes())


def write_raw(path, grid) -> None:
    """Write a 2-D float grid losslessly: 16-byte header then little-endian float64 rows."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 2:
        raise ValueError("raw grids must be 2-D")
    h, w = grid.shape
    Path(path).write_bytes(_RAW_HEADER.pack(RAW_MAGIC, w, h) + grid.astype("<f8").tobytes())


def read_raw(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _RAW_HEADER.size:
        raise FormatError(f"{path}: truncated raw header")
    magic, w, h = _RAW_HEADER.unpack_from(data)
    if magic != RAW_MAGIC:
        raise FormatError(f"{path}: bad raw magic {magic!r}")
    body = data[_RAW_HEADER.size :]
    if len(body) != 8 * w * h:
        raise FormatError(f"{path}: expected {8 * w * h} data bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<f8").reshape(h, w).astype(np.float64)


def read_image(path) -> np.ndarray:
    """Dispatch on content: raw grid magic, otherwise PGM."""
    with open(path, "rb") as fh:
        head = fh.read(len(RAW_MAGIC))
    if head == RAW_MAGIC:
        return read_raw(path)
    return read_pgm(path)


def write_image(path, img) -> None:
    """Write by suffix: ``.pgm`` as 8-bit PGM, anything else as a raw grid."""
    if Path(path).suffix.lower() == ".pgm":
        write_pgm(path, img)
    else:
        write_raw(path, img)

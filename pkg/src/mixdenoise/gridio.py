"""Raster grids and PGM file I/O.

Images are plain 2-D float64 arrays everywhere in this package. Values sit
on the 8-bit [0, 255] ladder at file boundaries only; between stages they
are unconstrained reals so iterative solvers can carry fractional
intermediates without quantization artifacts.
"""

from __future__ import annotations

import numpy as np

PGM_MAXVAL = 255

_WHITESPACE = b" \t\n\r\x0b\x0c"


class PgmParseError(ValueError):
    """Malformed PGM data; the message names the offending field or offset."""


def as_grid(a, name: str = "image") -> np.ndarray:
    """Validate and return `a` as a finite 2-D float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def round_half_away(a):
    """Round to the nearest integer with ties away from zero.

    numpy's default rounding is half-to-even; file output needs one fixed,
    platform-independent rule so saved bytes are reproducible.
    """
    a = np.asarray(a, dtype=np.float64)
    return np.sign(a) * np.floor(np.abs(a) + 0.5)


def clamp_quantize(img, d_min: float = 0.0, d_max: float = 255.0) -> np.ndarray:
    """Clamp every pixel to [d_min, d_max] and round to the nearest integer level."""
    if not d_min < d_max:
        raise ValueError(f"d_min must be < d_max, got [{d_min}, {d_max}]")
    img = as_grid(img)
    return np.clip(round_half_away(np.clip(img, d_min, d_max)), d_min, d_max)


def _skip_ws_and_comments(data: bytes, pos: int) -> int:
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c in (b"#",):
            while pos < n and data[pos : pos + 1] != b"\n":
                pos += 1
        elif c in (b" ", b"\t", b"\n", b"\r", b"\x0b", b"\x0c"):
            pos += 1
        else:
            break
    return pos


def _next_token(data: bytes, pos: int, field: str) -> tuple[bytes, int]:
    pos = _skip_ws_and_comments(data, pos)
    if pos >= len(data):
        raise PgmParseError(f"unexpected end of data while reading {field} (offset {pos})")
    start = pos
    n = len(data)
    while pos < n and data[pos : pos + 1] not in (b" ", b"\t", b"\n", b"\r", b"\x0b", b"\x0c", b"#"):
        pos += 1
    return data[start:pos], pos


def _int_token(data: bytes, pos: int, field: str) -> tuple[int, int]:
    tok, pos = _next_token(data, pos, field)
    try:
        value = int(tok)
    except ValueError:
        raise PgmParseError(f"{field} is not an integer: {tok!r} (offset {pos - len(tok)})") from None
    return value, pos


def load_pgm(data: bytes) -> np.ndarray:
    """Parse binary (P5) or ASCII (P2) PGM bytes into a float64 grid.

    Only maxval 255 is accepted. Header comments starting with '#' are
    skipped. Raises PgmParseError naming the bad field or byte offset.
    """
    if not isinstance(data, (bytes, bytearray, memoryview)):
        raise PgmParseError("PGM input must be a byte sequence")
    data = bytes(data)
    magic, pos = _next_token(data, 0, "magic number")
    if magic not in (b"P2", b"P5"):
        raise PgmParseError(f"unsupported magic number {magic!r}; expected P2 or P5")
    width, pos = _int_token(data, pos, "width")
    height, pos = _int_token(data, pos, "height")
    if width < 1 or height < 1:
        raise PgmParseError(f"dimensions must be positive, got {width}x{height}")
    maxval, pos = _int_token(data, pos, "maxval")
    if maxval != PGM_MAXVAL:
        raise PgmParseError(f"maxval must be {PGM_MAXVAL}, got {maxval}")
    count = width * height

    if magic == b"P5":
        if pos >= len(data) or data[pos : pos + 1] not in (b" ", b"\t", b"\n", b"\r", b"\x0b", b"\x0c"):
            raise PgmParseError(f"expected single whitespace after maxval (offset {pos})")
        pos += 1
        payload = data[pos : pos + count]
        if len(payload) < count:
            raise PgmParseError(
                f"truncated P5 payload: need {count} bytes, found {len(payload)} (offset {pos})"
            )
        flat = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    else:
        values = np.empty(count, dtype=np.float64)
        for k in range(count):
            v, pos = _int_token(data, pos, f"sample {k}")
            if not 0 <= v <= PGM_MAXVAL:
                raise PgmParseError(f"sample {k} out of range [0, {PGM_MAXVAL}]: {v}")
            values[k] = v
        flat = values
    return flat.reshape(height, width)


def save_pgm(img) -> bytes:
    """Serialize a grid as binary P5 with maxval 255.

    Pixels are clamped to [0, 255] and rounded half-away-from-zero, so the
    output is byte-identical for identical grids.
    """
    img = as_grid(img)
    quantized = round_half_away(np.clip(img, 0.0, 255.0)).astype(np.uint8)
    height, width = quantized.shape
    header = f"P5\n{width} {height}\n{PGM_MAXVAL}\n".encode("ascii")
    return header + quantized.tobytes()


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        return load_pgm(fh.read())


def write_pgm(path, img) -> None:
    with open(path, "wb") as fh:
        fh.write(save_pgm(img))

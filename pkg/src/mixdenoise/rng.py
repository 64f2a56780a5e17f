"""Counter-based random numbers keyed by (seed, row, col, draw).

Every random quantity at a pixel is a pure function of the seed, the pixel
coordinates, and a small draw index. That makes corruption reproducible
per site: the value at (i, j) never depends on array traversal order, image
shape, or how many other pixels were corrupted. The generator is a chain of
splitmix64 finalizer rounds, each absorbing one key word, evaluated on
uint64 numpy arrays (which wrap modulo 2**64 without warnings).
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

_SHIFT_30 = np.uint64(30)
_SHIFT_27 = np.uint64(27)
_SHIFT_31 = np.uint64(31)
_SHIFT_11 = np.uint64(11)

_INV_2_53 = float(2.0**-53)


def _mix(h: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer on a uint64 array."""
    h = h ^ (h >> _SHIFT_30)
    h = h * _MIX1
    h = h ^ (h >> _SHIFT_27)
    h = h * _MIX2
    h = h ^ (h >> _SHIFT_31)
    return h


def _absorb(h: np.ndarray, word: np.ndarray) -> np.ndarray:
    return _mix((h + _GAMMA) ^ word)


def site_hash(seed: int, rows, cols, draw: int) -> np.ndarray:
    """64-bit hash per site for key (seed, row, col, draw).

    `rows` and `cols` broadcast against each other; the result has the
    broadcast shape. Seed and draw must be non-negative Python ints.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    if draw < 0:
        raise ValueError(f"draw index must be non-negative, got {draw}")
    rows = np.asarray(rows)
    cols = np.asarray(cols)
    if np.any(rows < 0) or np.any(cols < 0):
        raise ValueError("row and column indices must be non-negative")
    shape = np.broadcast_shapes(rows.shape, cols.shape)
    # compute on >= 1-d arrays: 0-d uint64 arithmetic follows numpy's
    # scalar path, which warns on the intended modular wraparound
    rows_u = np.atleast_1d(rows.astype(np.uint64))
    cols_u = np.atleast_1d(cols.astype(np.uint64))
    h = np.full(np.broadcast_shapes(rows_u.shape, cols_u.shape), np.uint64(seed & _MASK))
    h = _mix(h)
    h = _absorb(h, rows_u)
    h = _absorb(h, cols_u)
    h = _absorb(h, np.uint64(draw & _MASK))
    return h.reshape(shape)


def site_uniform(seed: int, rows, cols, draw: int) -> np.ndarray:
    """Uniform floats in [0, 1) from the top 53 hash bits."""
    h = site_hash(seed, rows, cols, draw)
    return (h >> _SHIFT_11).astype(np.float64) * _INV_2_53


def site_uniform_open(seed: int, rows, cols, draw: int) -> np.ndarray:
    """Uniform floats in (0, 1), safe as a log argument."""
    h = site_hash(seed, rows, cols, draw)
    return ((h >> _SHIFT_11).astype(np.float64) + 0.5) * _INV_2_53


def site_normal(seed: int, rows, cols, draw_pair: tuple[int, int] = (1, 2)) -> np.ndarray:
    """Standard normal deviates via Box-Muller on two independent uniforms.

    Uses the cosine branch only, so one normal per site from two uniforms
    at draw indices `draw_pair`.
    """
    d1, d2 = draw_pair
    u1 = site_uniform_open(seed, rows, cols, d1)
    u2 = site_uniform(seed, rows, cols, d2)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


def grid_indices(shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Row and column index grids for an image shape, ready for site_* calls."""
    rows, cols = np.indices(shape)
    return rows, cols

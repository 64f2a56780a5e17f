"""Rank-order filters for impulse suppression.

All window filters extend the image across borders by mirror (symmetric)
extension, duplicating the edge row/column. That is the single boundary
rule of this package; it avoids manufacturing extreme values at borders
that a zero or wrap extension would introduce.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .gridio import as_grid

AMF_DEFAULT_MAX_WINDOW = 39

# random-valued impulse detection constants: threshold T_k = MAD_SCALE * MAD
# + OFFSETS[k] against the center-weighted median differences, k = 0..3
ACWMF_MAD_SCALE = 0.6
ACWMF_OFFSETS = (40.0, 25.0, 10.0, 5.0)


@dataclass(frozen=True)
class RofKind:
    """Which rank-order filter chain the pipeline runs before the variational step."""

    variant: str = "amf"
    max_window: int = AMF_DEFAULT_MAX_WINDOW

    VARIANTS = ("amf", "acwmf", "amf_then_acwmf")

    def __post_init__(self):
        if self.variant not in self.VARIANTS:
            raise ValueError(f"variant must be one of {self.VARIANTS}, got {self.variant!r}")
        if self.max_window < 3 or self.max_window % 2 == 0:
            raise ValueError(f"max_window must be odd and >= 3, got {self.max_window}")


def median_filter(img, window: int) -> np.ndarray:
    """Plain running median over a window x window neighborhood."""
    img = as_grid(img)
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    if window == 1:
        return img.copy()
    return ndimage.median_filter(img, size=window, mode="reflect")


def _gather_windows(padded: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                    pad: int, window: int) -> np.ndarray:
    """Window contents around each (row, col), as an (n_sites, window**2) array."""
    half = window // 2
    offsets = np.arange(-half, half + 1)
    off_r = np.repeat(offsets, window)
    off_c = np.tile(offsets, window)
    return padded[(rows[:, None] + pad) + off_r[None, :],
                  (cols[:, None] + pad) + off_c[None, :]]


def amf(img, max_window: int = AMF_DEFAULT_MAX_WINDOW) -> np.ndarray:
    """Adaptive median filter: replace only pixels that sit at a window extreme.

    Per pixel the window grows 3, 5, ..., max_window until the window
    median separates strictly from the window min and max. A pixel whose
    own value also lies strictly between the extremes passes through;
    otherwise it becomes the window median. If no window separates, the
    output is the largest window's median.
    """
    img = as_grid(img)
    if max_window < 3 or max_window % 2 == 0:
        raise ValueError(f"max_window must be odd and >= 3, got {max_window}")
    height, width = img.shape
    limit = min(max_window, 2 * max(height, width) - 1)
    pad = limit // 2
    padded = np.pad(img, pad, mode="symmetric")
    out = img.copy()
    rows, cols = np.indices(img.shape)
    rows = rows.ravel()
    cols = cols.ravel()
    for window in range(3, limit + 1, 2):
        if rows.size == 0:
            break
        values = _gather_windows(padded, rows, cols, pad, window)
        mid = (window * window) // 2
        part = np.partition(values, (0, mid, window * window - 1), axis=1)
        z_min, z_med, z_max = part[:, 0], part[:, mid], part[:, -1]
        separated = (z_min < z_med) & (z_med < z_max)
        center = img[rows, cols]
        extreme = (center <= z_min) | (center >= z_max)
        if window == limit:
            # last chance: separated windows apply the extremes test,
            # everything else falls back to this window's median
            replace = ~separated | extreme
            out[rows[replace], cols[replace]] = z_med[replace]
            rows = cols = rows[:0]
        else:
            done = separated & extreme
            out[rows[done], cols[done]] = z_med[done]
            undecided = ~separated
            rows, cols = rows[undecided], cols[undecided]
    return out


def acwmf(img) -> np.ndarray:
    """Center-weighted median impulse filter over 3x3 windows.

    Center weights 2k+1 for k = 0..3 give four weighted medians m_k; by
    the order-statistic identity each equals the center value clipped to a
    pair of sorted-neighbor ranks. A pixel is flagged impulsive when any
    difference |m_k - center| exceeds T_k = MAD_SCALE * MAD + OFFSETS[k],
    where MAD is the median absolute deviation of the window about its
    plain median. Flagged pixels become the plain median m_0.
    """
    img = as_grid(img)
    padded = np.pad(img, 1, mode="symmetric")
    height, width = img.shape
    stack = np.empty((height, width, 9), dtype=np.float64)
    idx = 0
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            stack[:, :, idx] = padded[1 + dr : 1 + dr + height, 1 + dc : 1 + dc + width]
            idx += 1
    center = img
    neighbors = np.sort(np.delete(stack, 4, axis=2), axis=2)
    m0 = np.clip(center, neighbors[:, :, 3], neighbors[:, :, 4])
    mad = np.median(np.abs(stack - m0[:, :, None]), axis=2)
    flagged = np.zeros(img.shape, dtype=bool)
    for k, offset in enumerate(ACWMF_OFFSETS):
        m_k = np.clip(center, neighbors[:, :, 3 - k], neighbors[:, :, 4 + k])
        flagged |= np.abs(m_k - center) > ACWMF_MAD_SCALE * mad + offset
    return np.where(flagged, m0, center)


def rof_apply(img, kind: RofKind) -> np.ndarray:
    """Run the configured rank-order filter chain."""
    if kind.variant == "amf":
        return amf(img, kind.max_window)
    if kind.variant == "acwmf":
        return acwmf(img)
    return acwmf(amf(img, kind.max_window))

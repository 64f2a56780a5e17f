"""Image quality metrics and residual-distribution statistics.

Metrics run on the real-valued arrays they are given. Pass quantize=True
to snap both inputs to the 8-bit ladder first; that is the path used when
comparing against numbers measured on 8-bit files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .gridio import as_grid, clamp_quantize

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DEFAULT_PEAK = 255.0


def _pair(reference, test, quantize: bool):
    reference = as_grid(reference, "reference")
    test = as_grid(test, "test")
    if reference.shape != test.shape:
        raise ValueError(f"shape mismatch: {reference.shape} vs {test.shape}")
    if quantize:
        reference = clamp_quantize(reference)
        test = clamp_quantize(test)
    return reference, test


def psnr(reference, test, peak: float = DEFAULT_PEAK, quantize: bool = False) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical inputs."""
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    reference, test = _pair(reference, test, quantize)
    mse = float(np.mean((reference - test) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * math.log10(peak * peak / mse)


def _ssim_kernel() -> np.ndarray:
    half = SSIM_WINDOW // 2
    x = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * SSIM_SIGMA**2))
    return k / k.sum()


def _ssim_filter(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    half = SSIM_WINDOW // 2
    out = correlate1d(img, kernel, axis=0, mode="constant")
    out = correlate1d(out, kernel, axis=1, mode="constant")
    return out[half:-half, half:-half]


def ssim(reference, test, quantize: bool = False) -> float:
    """Mean structural similarity over valid window positions.

    Gaussian 11x11 window (sigma 1.5), stabilizers K1 = 0.01 and K2 = 0.03
    at dynamic range 255, Gaussian-weighted (population) local moments.
    """
    reference, test = _pair(reference, test, quantize)
    if min(reference.shape) < SSIM_WINDOW:
        raise ValueError(
            f"image sides must be >= {SSIM_WINDOW}, got {reference.shape}"
        )
    kernel = _ssim_kernel()
    mu_r = _ssim_filter(reference, kernel)
    mu_t = _ssim_filter(test, kernel)
    var_r = _ssim_filter(reference * reference, kernel) - mu_r * mu_r
    var_t = _ssim_filter(test * test, kernel) - mu_t * mu_t
    cov = _ssim_filter(reference * test, kernel) - mu_r * mu_t
    c1 = (SSIM_K1 * DEFAULT_PEAK) ** 2
    c2 = (SSIM_K2 * DEFAULT_PEAK) ** 2
    numerator = (2.0 * mu_r * mu_t + c1) * (2.0 * cov + c2)
    denominator = (mu_r * mu_r + mu_t * mu_t + c1) * (var_r + var_t + c2)
    return float(np.mean(numerator / denominator))


@dataclass(frozen=True)
class ResidualStats:
    """Distributional summary of (processed - clean) residuals."""

    counts: np.ndarray
    bin_edges: np.ndarray
    sigma_hat: float
    tail_mass_3sigma: float
    excess_kurtosis: float

    @property
    def bin_centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[:-1] + self.bin_edges[1:])

    @property
    def sample_count(self) -> int:
        return int(self.counts.sum())

    def metric_block(self) -> dict[str, float]:
        return {
            "sigma_hat": self.sigma_hat,
            "tail_mass_3sigma": self.tail_mass_3sigma,
            "excess_kurtosis": self.excess_kurtosis,
        }


def residual_stats(clean, processed, bins: int = 101) -> ResidualStats:
    """Histogram, 3-sigma tail mass, and excess kurtosis of the residual.

    The histogram spans [min, max] of the residual with equal-width bins
    (a half-level-wide span when the residual is constant). A constant
    residual has sigma_hat = 0; its tail mass and excess kurtosis are
    reported as 0 by convention.
    """
    if bins < 3:
        raise ValueError(f"bins must be >= 3, got {bins}")
    clean = as_grid(clean, "clean")
    processed = as_grid(processed, "processed")
    if clean.shape != processed.shape:
        raise ValueError(f"shape mismatch: {clean.shape} vs {processed.shape}")
    residual = (processed - clean).ravel()
    lo = float(residual.min())
    hi = float(residual.max())
    if lo == hi:
        lo, hi = lo - 0.5, hi + 0.5
    counts, edges = np.histogram(residual, bins=bins, range=(lo, hi))
    mean = float(residual.mean())
    centered = residual - mean
    m2 = float(np.mean(centered**2))
    sigma_hat = math.sqrt(m2)
    if sigma_hat == 0.0:
        tail = 0.0
        kurt = 0.0
    else:
        tail = float(np.count_nonzero(np.abs(centered) > 3.0 * sigma_hat)) / residual.size
        m4 = float(np.mean(centered**4))
        kurt = m4 / (m2 * m2) - 3.0
    return ResidualStats(
        counts=counts.astype(np.int64),
        bin_edges=edges,
        sigma_hat=sigma_hat,
        tail_mass_3sigma=tail,
        excess_kurtosis=kurt,
    )


def histogram_csv(stats: ResidualStats) -> str:
    """Histogram rows ready for log-scale plotting (count + 1 inside the log)."""
    lines = ["bin_center,count,log10_count"]
    for center, count in zip(stats.bin_centers, stats.counts):
        lines.append(f"{float(center)!r},{int(count)},{math.log10(count + 1.0)!r}")
    return "\n".join(lines) + "\n"

"""Mixed Gaussian-impulse degradation of grayscale grids.

Per pixel, one uniform branch draw selects among four corruptions:

    pepper (d_min)           with probability p/2
    salt (d_max)             with probability p/2
    uniform random impulse   with probability r * (1 - p)
    additive Gaussian noise  with probability (1 - p) * (1 - r)

All randomness is counter-based (see rng), so each pixel's fate depends
only on (seed, row, col) and never on scan order or image content
elsewhere. Branch draw indices: 0 selects the branch, 1 and 2 feed the
Gaussian pair, 3 feeds the uniform impulse value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gridio import as_grid, round_half_away
from .rng import grid_indices, site_normal, site_uniform

BRANCH_PEPPER = 0
BRANCH_SALT = 1
BRANCH_RVIN = 2
BRANCH_GAUSS = 3

_DRAW_BRANCH = 0
_DRAW_GAUSS_PAIR = (1, 2)
_DRAW_RVIN = 3


@dataclass(frozen=True)
class NoiseSpec:
    """Degradation parameters.

    sigma: Gaussian standard deviation in gray levels.
    p: total extreme-impulse probability (split evenly between d_min and d_max).
    r: random-valued impulse probability among the remaining pixels.
    d_min, d_max: dynamic range bounds, also the extreme impulse values.
    clamp_gaussian: clip the Gaussian branch into [d_min, d_max] so every
        observed pixel is a representable level (sensor saturation model).
        Kept as a flag so the unclamped variant stays testable.
    """

    sigma: float
    p: float = 0.0
    r: float = 0.0
    d_min: float = 0.0
    d_max: float = 255.0
    clamp_gaussian: bool = True

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        if not 0.0 <= self.r <= 1.0:
            raise ValueError(f"r must be in [0, 1], got {self.r}")
        if not self.d_min < self.d_max:
            raise ValueError(f"d_min must be < d_max, got [{self.d_min}, {self.d_max}]")

    @property
    def has_impulses(self) -> bool:
        return self.p > 0.0 or self.r > 0.0


def add_awgn(img, sigma: float, seed: int) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise with standard deviation sigma.

    The output is not clamped; range enforcement is a separate step.
    """
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    img = as_grid(img)
    rows, cols = grid_indices(img.shape)
    return img + sigma * site_normal(seed, rows, cols, _DRAW_GAUSS_PAIR)


def classify_branches(shape: tuple[int, int], spec: NoiseSpec, seed: int) -> np.ndarray:
    """Branch code per pixel (BRANCH_* constants) for the given seed.

    The single branch draw u is partitioned as [0, p/2), [p/2, p),
    [p, p + r(1-p)), remainder, so the codes are exactly the branches
    corrupt_mixed applies.
    """
    rows, cols = grid_indices(shape)
    u = site_uniform(seed, rows, cols, _DRAW_BRANCH)
    codes = np.full(shape, BRANCH_GAUSS, dtype=np.int64)
    codes[u < spec.p + spec.r * (1.0 - spec.p)] = BRANCH_RVIN
    codes[u < spec.p] = BRANCH_SALT
    codes[u < spec.p / 2.0] = BRANCH_PEPPER
    return codes


def corrupt_mixed(img, spec: NoiseSpec, seed: int) -> np.ndarray:
    """Apply the mixed degradation model to a clean grid.

    Random-valued impulses are continuous-uniform draws over the dynamic
    range rounded to integer levels. With p = 0 and r = 0 the result is
    bit-identical to add_awgn followed by the clamp, because the Gaussian
    branch consumes the same per-site draws either way.
    """
    img = as_grid(img)
    noisy = add_awgn(img, spec.sigma, seed)
    if spec.clamp_gaussian:
        noisy = np.clip(noisy, spec.d_min, spec.d_max)
    if spec.p > 0.0 or spec.r > 0.0:
        codes = classify_branches(img.shape, spec, seed)
        if spec.p > 0.0:
            noisy = np.where(codes == BRANCH_PEPPER, spec.d_min, noisy)
            noisy = np.where(codes == BRANCH_SALT, spec.d_max, noisy)
        if spec.r > 0.0:
            rows, cols = grid_indices(img.shape)
            u = site_uniform(seed, rows, cols, _DRAW_RVIN)
            rvin = round_half_away(spec.d_min + u * (spec.d_max - spec.d_min))
            noisy = np.where(codes == BRANCH_RVIN, rvin, noisy)
    return noisy


def empirical_branch_fractions(clean, noisy, spec: NoiseSpec) -> dict[str, float]:
    """Observed fractions of pixels at d_min, at d_max, and elsewhere."""
    clean = as_grid(clean, "clean")
    noisy = as_grid(noisy, "noisy")
    if clean.shape != noisy.shape:
        raise ValueError(f"shape mismatch: {clean.shape} vs {noisy.shape}")
    n = noisy.size
    at_min = float(np.count_nonzero(noisy == spec.d_min)) / n
    at_max = float(np.count_nonzero(noisy == spec.d_max)) / n
    return {"at_d_min": at_min, "at_d_max": at_max, "elsewhere": 1.0 - at_min - at_max}


def detect_impulses(x_n, z) -> np.ndarray:
    """Trust mask from a rank filter pre-pass: True where the filter kept the pixel.

    x_n is the observed image, z its rank-filtered version. A pixel the
    filter left exactly unchanged is treated as impulse-free (True); a
    changed pixel is treated as impulse-corrupted (False) and its
    observation is discarded by the variational step. Exact comparison is
    well-defined because rank filters copy window members verbatim.
    """
    x_n = as_grid(x_n, "x_n")
    z = as_grid(z, "z")
    if x_n.shape != z.shape:
        raise ValueError(f"shape mismatch: {x_n.shape} vs {z.shape}")
    return x_n == z

"""Built-in deterministic test scenes.

Three synthetic 512x512 grayscale images stand in for classic photographic
test material: "blocks" is cartoon-like with large flat regions and sharp
edges, "strands" covers curved shading with fine hair-like detail whose
contrast varies across the frame, and "texture" layers coarse shading,
mid-scale structure, and fine detail; its contrast constants are
calibrated so that heavy mixed corruption (sigma 25, 30% impulses) lands
at the reference degradation level used by the acceptance suite (about
10.4 dB PSNR, 0.067 SSIM against the clean scene).

The strand detail exists because order-statistic filters misbehave on it:
a median window wider than the strand spacing flattens local extremes by
tens of intensity levels, which is the heavy-tailed failure mode the
variational step is designed to repair. A scene without such content
makes every impulse trivially fillable and hides that effect.

Every generator is a pure function of its arguments: pixel randomness
comes from the counter-based generator with fixed seeds, so repeated calls
are bit-identical across platforms and sessions.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .gridio import clamp_quantize
from .rng import grid_indices, site_uniform

SCENE_SIZE = 512
# clean scenes stay strictly inside the dynamic range so that injected
# extreme impulses are unambiguous
_LEVEL_LO = 8.0
_LEVEL_HI = 247.0


def _smooth_field(seed: int, shape: tuple[int, int], scale: float) -> np.ndarray:
    """Band-limited pseudo-random field, normalized to zero mean, unit variance."""
    rows, cols = grid_indices(shape)
    white = site_uniform(seed, rows, cols, 0) - 0.5
    f = ndimage.gaussian_filter(white, sigma=scale, mode="reflect")
    f -= f.mean()
    return f / f.std()


def _unit(component: np.ndarray) -> np.ndarray:
    out = component - component.mean()
    std = out.std()
    return out / std if std > 0 else out


def scene_blocks(size: int = SCENE_SIZE) -> np.ndarray:
    """Flat rectangles over a gentle vertical ramp; strong straight edges."""
    k = np.arange(24)
    top = np.floor(site_uniform(101, k, 0 * k, 0) * size * 0.82).astype(int)
    left = np.floor(site_uniform(101, k, 0 * k, 1) * size * 0.82).astype(int)
    height = (np.floor(site_uniform(101, k, 0 * k, 2) * size * 0.30) + 24).astype(int)
    width = (np.floor(site_uniform(101, k, 0 * k, 3) * size * 0.30) + 24).astype(int)
    level = 40.0 + site_uniform(101, k, 0 * k, 4) * 180.0
    rows, _ = grid_indices((size, size))
    img = 96.0 + 28.0 * (rows / max(size - 1, 1))
    for i in range(k.size):
        r0, c0 = top[i], left[i]
        img[r0 : r0 + height[i], c0 : c0 + width[i]] = level[i]
    return clamp_quantize(np.clip(img, _LEVEL_LO, _LEVEL_HI))


# strand detail contrast: low/high ends of the spatial modulation
_STRAND_AMP_LO = 50.0
_STRAND_AMP_HI = 74.0


def scene_strands(size: int = SCENE_SIZE) -> np.ndarray:
    """Curved shading under fine strand-like detail of varying contrast."""
    shape = (size, size)
    rows, cols = grid_indices(shape)
    y = rows / max(size - 1, 1)
    x = cols / max(size - 1, 1)
    img = 128.0
    img = img + 26.0 * np.sin(2.0 * np.pi * (1.6 * x + 0.5 * y))
    img = img + 16.0 * _smooth_field(202, shape, 24.0)
    for cy, cx, ry, rx, amp in ((0.32, 0.62, 0.16, 0.21, 26.0), (0.70, 0.28, 0.20, 0.14, -22.0)):
        d2 = ((y - cy) / ry) ** 2 + ((x - cx) / rx) ** 2
        img = img + amp * np.exp(-2.2 * d2)
    # fine detail everywhere, stronger inside organically shaped patches
    patches = 1.0 / (1.0 + np.exp(-2.2 * _smooth_field(707, shape, 26.0)))
    contrast = _STRAND_AMP_LO + (_STRAND_AMP_HI - _STRAND_AMP_LO) * patches
    img = img + contrast * _smooth_field(606, shape, 2.0)
    return clamp_quantize(np.clip(img, _LEVEL_LO, _LEVEL_HI))


# contrast calibration for the texture scene: overall amplitude and the
# standard-deviation split across component scales (coarse shading,
# mid-scale structure, fine detail, plateau regions)
_TEXTURE_AMPLITUDE = 46.7
_TEXTURE_MIX = (0.40, 0.35, 0.15, 0.10)


def scene_texture(size: int = SCENE_SIZE) -> np.ndarray:
    """Layered detail scene; contrast calibrated against reference corruption."""
    shape = (size, size)
    rows, cols = grid_indices(shape)
    y = rows / max(size - 1, 1)
    x = cols / max(size - 1, 1)

    low = _smooth_field(303, shape, 44.0)
    mid = _smooth_field(404, shape, 7.0)
    fine = _smooth_field(505, shape, 1.4)

    plateau = np.zeros(shape)
    hull = ((y - 0.58) / 0.30) ** 2 + ((x - 0.45) / 0.38) ** 2 < 1.0
    sail = (np.abs(x - 0.60) < 0.16) & (y > 0.12) & (y < 0.52)
    band = y > 0.82
    plateau[hull] += 1.0
    plateau[sail] -= 1.0
    plateau[band] += 0.6
    plateau = _unit(ndimage.gaussian_filter(plateau, sigma=2.0, mode="reflect"))

    v_low, v_mid, v_fine, v_plat = _TEXTURE_MIX
    raw = (
        np.sqrt(v_low) * low
        + np.sqrt(v_mid) * mid
        + np.sqrt(v_fine) * fine
        + np.sqrt(v_plat) * plateau
    )
    img = 130.0 + _TEXTURE_AMPLITUDE * _unit(raw)
    return clamp_quantize(np.clip(img, _LEVEL_LO, _LEVEL_HI))


SCENES = {
    "blocks": scene_blocks,
    "strands": scene_strands,
    "texture": scene_texture,
}


def make_scene(name: str, size: int = SCENE_SIZE) -> np.ndarray:
    try:
        builder = SCENES[name]
    except KeyError:
        raise ValueError(f"unknown scene {name!r}; choose from {sorted(SCENES)}") from None
    if size < 16:
        raise ValueError(f"scene size must be >= 16, got {size}")
    return builder(size)

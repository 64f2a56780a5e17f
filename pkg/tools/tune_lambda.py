"""Grid search for the built-in smoother strength.

Reproduces the tuning that produced REFTV_LAMBDA_SIGMA25 and
REFTV_LAMBDA_SIGMA10 in mixdenoise.pipeline: corrupt the "strands" scene
with pure Gaussian noise on one fixed seed, run the reference smoother
over a lambda grid, and report the PSNR gain of each setting.

Run from the repository root after installing the package:

    python3 tools/tune_lambda.py
"""

from __future__ import annotations

import numpy as np

import mixdenoise as mx

GRID = (0.05, 0.1, 0.15, 0.2, 0.21, 0.22, 0.23, 0.24, 0.25, 0.26, 0.28, 0.3, 0.35, 0.5)
SEED = 0


def main() -> None:
    img = mx.make_scene("strands")
    for sigma in (25.0, 10.0):
        noisy = np.clip(mx.add_awgn(img, sigma, SEED), 0.0, 255.0)
        base = mx.psnr(img, noisy)
        print(f"sigma={sigma:g}  noisy PSNR {base:.3f}")
        best = (-np.inf, None)
        for lam in GRID:
            out = mx.reference_smoother(noisy, lam)
            gain = mx.psnr(img, out) - base
            best = max(best, (gain, lam))
            print(f"  lambda={lam:<5g} gain {gain:+.3f} dB")
        print(f"  best: lambda={best[1]:g} ({best[0]:+.3f} dB)")


if __name__ == "__main__":
    main()

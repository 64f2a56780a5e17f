"""Degradation model tests: branch law, determinism, and edge behavior."""

import numpy as np
import pytest

from mixdenoise.noise import (
    BRANCH_GAUSS,
    BRANCH_PEPPER,
    BRANCH_RVIN,
    BRANCH_SALT,
    NoiseSpec,
    add_awgn,
    classify_branches,
    corrupt_mixed,
    detect_impulses,
    empirical_branch_fractions,
)

N512 = 512 * 512


def mid_gray(size: int = 512) -> np.ndarray:
    return np.full((size, size), 128.0)


def binomial_band(q: float, n: int, sigmas: float = 4.0) -> float:
    return sigmas * np.sqrt(q * (1.0 - q) / n)


class TestNoiseSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            NoiseSpec(sigma=-1.0)
        with pytest.raises(ValueError):
            NoiseSpec(sigma=1.0, p=1.5)
        with pytest.raises(ValueError):
            NoiseSpec(sigma=1.0, r=-0.1)
        with pytest.raises(ValueError):
            NoiseSpec(sigma=1.0, d_min=10.0, d_max=10.0)

    def test_has_impulses(self):
        assert not NoiseSpec(sigma=25.0).has_impulses
        assert NoiseSpec(sigma=25.0, p=0.1).has_impulses
        assert NoiseSpec(sigma=25.0, r=0.05).has_impulses


class TestAddAwgn:
    def test_sigma_zero_is_identity(self):
        img = np.arange(12.0).reshape(3, 4)
        np.testing.assert_array_equal(add_awgn(img, 0.0, 7), img)

    def test_sample_moments_at_sigma_25(self):
        out = add_awgn(mid_gray(), 25.0, 0)
        delta = out - 128.0
        assert 24.8 <= delta.std(ddof=1) <= 25.2
        assert abs(delta.mean()) <= 0.15

    def test_output_is_not_clamped(self):
        out = add_awgn(np.full((256, 256), 2.0), 25.0, 3)
        assert out.min() < 0.0

    def test_negative_sigma_rejected(self):
        with pytest.raises(ValueError):
            add_awgn(mid_gray(64), -1.0, 0)

    def test_deterministic_per_seed(self):
        a = add_awgn(mid_gray(64), 25.0, 5)
        b = add_awgn(mid_gray(64), 25.0, 5)
        c = add_awgn(mid_gray(64), 25.0, 6)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)


class TestCorruptMixed:
    def test_identity_when_noise_free(self):
        img = np.arange(30.0).reshape(5, 6) + 8.0
        spec = NoiseSpec(sigma=0.0)
        np.testing.assert_array_equal(corrupt_mixed(img, spec, 0), img)

    def test_p_one_yields_only_extremes(self):
        spec = NoiseSpec(sigma=25.0, p=1.0)
        out = corrupt_mixed(mid_gray(), spec, 1)
        assert set(np.unique(out)) <= {0.0, 255.0}
        frac_min = np.mean(out == 0.0)
        assert 0.49 <= frac_min <= 0.51

    def test_awgn_only_equals_clamped_add_awgn(self):
        img = mid_gray(128)
        spec = NoiseSpec(sigma=25.0, p=0.0, r=0.0)
        direct = np.clip(add_awgn(img, 25.0, 9), 0.0, 255.0)
        np.testing.assert_array_equal(corrupt_mixed(img, spec, 9), direct)

    def test_unclamped_flag_preserves_gaussian_branch(self):
        img = np.full((128, 128), 4.0)
        spec = NoiseSpec(sigma=25.0, clamp_gaussian=False)
        np.testing.assert_array_equal(corrupt_mixed(img, spec, 2), add_awgn(img, 25.0, 2))

    def test_rvin_values_are_integer_levels(self):
        spec = NoiseSpec(sigma=0.0, p=0.0, r=1.0)
        out = corrupt_mixed(mid_gray(128), spec, 4)
        assert np.all(out == np.round(out))
        assert out.min() >= 0.0 and out.max() <= 255.0
        # continuous draws hit many distinct levels
        assert np.unique(out).size > 200

    def test_branch_fractions_follow_the_law(self):
        n = N512
        img = mid_gray()
        for p, r in ((0.3, 0.0), (0.5, 0.0), (0.25, 0.05)):
            spec = NoiseSpec(sigma=25.0, p=p, r=r)
            codes = classify_branches(img.shape, spec, 11)
            expected = {
                BRANCH_PEPPER: p / 2.0,
                BRANCH_SALT: p / 2.0,
                BRANCH_RVIN: r * (1.0 - p),
                BRANCH_GAUSS: (1.0 - p) * (1.0 - r),
            }
            for code, q in expected.items():
                observed = np.mean(codes == code)
                assert abs(observed - q) <= max(binomial_band(q, n), 1e-12)

    def test_sites_independent_of_image_shape(self):
        spec = NoiseSpec(sigma=25.0, p=0.3, r=0.05)
        big = corrupt_mixed(mid_gray(96), spec, 13)
        small = corrupt_mixed(mid_gray(48), spec, 13)
        np.testing.assert_array_equal(big[:48, :48], small)

    def test_deterministic_per_seed(self):
        spec = NoiseSpec(sigma=25.0, p=0.3)
        img = mid_gray(64)
        np.testing.assert_array_equal(corrupt_mixed(img, spec, 21), corrupt_mixed(img, spec, 21))
        assert not np.array_equal(corrupt_mixed(img, spec, 21), corrupt_mixed(img, spec, 22))


class TestEmpiricalBranchFractions:
    def test_pure_spin_on_mid_gray(self):
        spec = NoiseSpec(sigma=0.0, p=0.4)
        noisy = corrupt_mixed(mid_gray(), spec, 3)
        frac = empirical_branch_fractions(mid_gray(), noisy, spec)
        assert abs(frac["at_d_min"] - 0.20) <= 0.005
        assert abs(frac["at_d_max"] - 0.20) <= 0.005
        assert frac["at_d_min"] + frac["at_d_max"] + frac["elsewhere"] == pytest.approx(1.0)

    def test_impulse_free_counts_native_extremes(self):
        clean = np.full((32, 32), 255.0)
        spec = NoiseSpec(sigma=0.0, p=0.0)
        frac = empirical_branch_fractions(clean, corrupt_mixed(clean, spec, 0), spec)
        assert frac["at_d_max"] == 1.0
        assert frac["at_d_min"] == 0.0

    def test_shape_mismatch_rejected(self):
        spec = NoiseSpec(sigma=1.0)
        with pytest.raises(ValueError):
            empirical_branch_fractions(mid_gray(16), mid_gray(17), spec)


class TestDetectImpulses:
    def test_exact_equality_semantics(self):
        x_n = np.array([[10.0, 20.0], [30.0, 40.0]])
        z = np.array([[10.0, 21.0], [30.0, 40.0]])
        mask = detect_impulses(x_n, z)
        np.testing.assert_array_equal(mask, [[True, False], [True, True]])
        assert mask.dtype == np.bool_

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            detect_impulses(mid_gray(8), mid_gray(9))

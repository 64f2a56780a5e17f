"""Pipeline orchestration tests: stage wiring, reports, and the experiment grid."""

import numpy as np
import pytest

from mixdenoise.gridio import clamp_quantize
from mixdenoise.metrics import psnr, ssim
from mixdenoise.noise import NoiseSpec, corrupt_mixed
from mixdenoise.pipeline import (
    BETA_RVIN,
    BETA_SPIN,
    PipelineConfig,
    PipelineError,
    SmootherKind,
    default_beta,
    denoise,
    gaussianize,
    reference_smoother,
    run_experiment,
)
from mixdenoise.rng import grid_indices
from mixdenoise.rof import RofKind, rof_apply
from mixdenoise.variational import VariationalConfig

NO_SMOOTH = SmootherKind(variant="none")


def scene64(seed: int = 0) -> np.ndarray:
    rows, cols = grid_indices((64, 64))
    y = rows / 63.0
    x = cols / 63.0
    img = 120.0 + 70.0 * np.sin(5.0 * x + seed) * np.cos(4.0 * y) + 30.0 * x
    return clamp_quantize(np.clip(img, 8.0, 247.0))


def mixed_noisy(seed: int = 0, p: float = 0.3):
    clean = scene64()
    spec = NoiseSpec(sigma=25.0, p=p)
    return clean, corrupt_mixed(clean, spec, seed)


class TestBetaDefaults:
    def test_default_beta_switches_on_rvin(self):
        assert default_beta(NoiseSpec(sigma=25.0, p=0.3)) == BETA_SPIN
        assert default_beta(NoiseSpec(sigma=10.0, p=0.25, r=0.05)) == BETA_RVIN

    def test_auto_beta_resolution(self):
        cfg = PipelineConfig(variational=VariationalConfig(beta=1.0), auto_beta=True)
        resolved = cfg.resolved_for(NoiseSpec(sigma=10.0, p=0.25, r=0.05))
        assert resolved.variational.beta == BETA_RVIN
        untouched = cfg.resolved_for(NoiseSpec(sigma=25.0, p=0.3))
        assert untouched.variational.beta == BETA_SPIN

    def test_auto_beta_without_variational_is_noop(self):
        cfg = PipelineConfig(variational=None, auto_beta=True)
        assert cfg.resolved_for(NoiseSpec(sigma=25.0)).variational is None


class TestGaussianize:
    def test_variational_disabled_returns_filter_output(self):
        _, noisy = mixed_noisy()
        cfg = PipelineConfig(rof=RofKind(variant="amf"), variational=None, smoother=NO_SMOOTH)
        out, mask = gaussianize(noisy, cfg)
        z = rof_apply(noisy, RofKind(variant="amf"))
        np.testing.assert_array_equal(out, z)
        np.testing.assert_array_equal(mask, noisy == z)

    def test_clean_constant_input_passes_through(self):
        img = np.full((32, 32), 128.0)
        cfg = PipelineConfig(
            rof=RofKind(variant="amf"),
            variational=VariationalConfig(beta=0.0002),
            smoother=NO_SMOOTH,
        )
        out, mask = gaussianize(img, cfg)
        assert mask.all()
        np.testing.assert_array_equal(out, img)

    def test_inpaints_impulse_sites(self):
        clean, noisy = mixed_noisy(seed=1)
        cfg = PipelineConfig(
            rof=RofKind(variant="amf"),
            variational=VariationalConfig(beta=0.0002),
            smoother=NO_SMOOTH,
        )
        out, mask = gaussianize(noisy, cfg)
        assert psnr(clean, out) > psnr(clean, noisy) + 3.0
        assert not np.any(out[~mask] == 0.0)
        assert not np.any(out[~mask] == 255.0)


class TestReferenceSmoother:
    def test_vanishing_strength_returns_input(self):
        img = scene64(2)
        out = reference_smoother(img, 1e-9)
        assert np.max(np.abs(out - img)) < 0.01

    def test_constant_image_is_fixed_point(self):
        img = np.full((24, 24), 77.0)
        np.testing.assert_array_equal(reference_smoother(img, 5.0), img)

    def test_strength_must_be_positive(self):
        with pytest.raises(ValueError):
            reference_smoother(scene64(), 0.0)


class TestDenoise:
    def test_identity_pipeline(self):
        clean, noisy = mixed_noisy(seed=2)
        cfg = PipelineConfig(rof=None, variational=None, smoother=NO_SMOOTH)
        report = denoise(noisy, clean, cfg, seed=2)
        np.testing.assert_array_equal(report.final, noisy)
        assert report.metrics["final"]["psnr_db"] == report.metrics["noisy"]["psnr_db"]

    def test_report_metrics_recomputable(self):
        clean, noisy = mixed_noisy(seed=3)
        cfg = PipelineConfig(
            rof=RofKind(variant="amf"),
            variational=VariationalConfig(beta=0.0002),
            smoother=NO_SMOOTH,
        )
        report = denoise(noisy, clean, cfg, seed=3)
        for stage, img in report.images.items():
            block = report.metrics[stage]
            assert block["psnr_db"] == pytest.approx(
                psnr(clean, img, quantize=True), abs=1e-9
            )
            assert block["ssim"] == pytest.approx(ssim(clean, img, quantize=True), abs=1e-9)

    def test_deterministic_reports(self):
        clean, noisy = mixed_noisy(seed=4)
        cfg = PipelineConfig(
            rof=RofKind(variant="amf"),
            variational=VariationalConfig(beta=0.0002),
            smoother=NO_SMOOTH,
        )
        a = denoise(noisy, clean, cfg, seed=4)
        b = denoise(noisy, clean, cfg, seed=4)
        for stage in a.images:
            np.testing.assert_array_equal(a.images[stage], b.images[stage])

    def test_without_clean_reports_no_metrics(self):
        _, noisy = mixed_noisy(seed=5)
        cfg = PipelineConfig(rof=RofKind(variant="amf"), variational=None, smoother=NO_SMOOTH)
        report = denoise(noisy, None, cfg)
        assert report.metrics == {}
        assert report.residuals == {}

    def test_disabling_vstep_only_changes_late_stages(self):
        clean, noisy = mixed_noisy(seed=6)
        with_vstep = PipelineConfig(
            rof=RofKind(variant="amf"),
            variational=VariationalConfig(beta=0.0002),
            smoother=NO_SMOOTH,
        )
        without = PipelineConfig(rof=RofKind(variant="amf"), variational=None, smoother=NO_SMOOTH)
        a = denoise(noisy, clean, with_vstep, seed=6)
        b = denoise(noisy, clean, without, seed=6)
        np.testing.assert_array_equal(a.images["noisy"], b.images["noisy"])
        np.testing.assert_array_equal(a.images["rof_out"], b.images["rof_out"])
        assert not np.array_equal(a.images["vstep_out"], b.images["vstep_out"])

    def test_injected_rof_output_is_used_verbatim(self):
        clean, noisy = mixed_noisy(seed=7)
        cfg = PipelineConfig(rof=RofKind(variant="amf"), variational=None, smoother=NO_SMOOTH)
        z = rof_apply(noisy, RofKind(variant="amf"))
        report = denoise(noisy, clean, cfg, rof_out=z)
        np.testing.assert_array_equal(report.images["rof_out"], z)
        assert report.timing_s["rof_out"] == 0.0


class TestExternalSmoother:
    def test_copy_command_quantizes_only(self):
        clean, noisy = mixed_noisy(seed=8)
        cfg = PipelineConfig(
            rof=None, variational=None,
            smoother=SmootherKind(variant="external", command="cp {input} {output}"),
        )
        report = denoise(noisy, clean, cfg)
        np.testing.assert_array_equal(report.final, clamp_quantize(noisy))

    def test_nonzero_exit_raises(self):
        _, noisy = mixed_noisy(seed=9)
        cfg = PipelineConfig(
            rof=None, variational=None,
            smoother=SmootherKind(variant="external", command="false"),
        )
        with pytest.raises(PipelineError):
            denoise(noisy, None, cfg)

    def test_missing_output_raises(self):
        _, noisy = mixed_noisy(seed=10)
        cfg = PipelineConfig(
            rof=None, variational=None,
            smoother=SmootherKind(variant="external", command="true"),
        )
        with pytest.raises(PipelineError):
            denoise(noisy, None, cfg)

    def test_external_requires_command(self):
        with pytest.raises(ValueError):
            SmootherKind(variant="external", command="")


class TestRunExperiment:
    def test_single_cell_matches_denoise(self):
        clean, noisy = mixed_noisy(seed=0)
        spec = NoiseSpec(sigma=25.0, p=0.3)
        cfg = PipelineConfig(rof=RofKind(variant="amf"), variational=None, smoother=NO_SMOOTH)
        result = run_experiment([("tile", clean)], [spec], [("amf", cfg)], [0])
        assert len(result.rows) == 1
        row = result.rows[0]
        report = denoise(noisy, clean, cfg, seed=0)
        assert row["psnr_mean"] == pytest.approx(report.metrics["final"]["psnr_db"], abs=1e-12)
        assert row["ssim_mean"] == pytest.approx(report.metrics["final"]["ssim"], abs=1e-12)
        assert row["seed_count"] == 1
        assert result.errors == []

    def test_self_comparison_has_zero_percent_increase(self):
        clean = scene64(1)
        spec = NoiseSpec(sigma=25.0, p=0.3)
        cfg = PipelineConfig(rof=RofKind(variant="amf"), variational=None, smoother=NO_SMOOTH)
        result = run_experiment(
            [("tile", clean)], [spec], [("base", cfg), ("again", cfg)], [0, 1]
        )
        again = [row for row in result.rows if row["method"] == "again"][0]
        assert again["pct_increase_psnr"] == 0.0
        assert again["pct_increase_ssim"] == 0.0

    def test_duplicate_method_names_rejected(self):
        cfg = PipelineConfig(rof=None, variational=None, smoother=NO_SMOOTH)
        with pytest.raises(ValueError):
            run_experiment([("tile", scene64())], [NoiseSpec(sigma=1.0)],
                           [("m", cfg), ("m", cfg)], [0])

    def test_empty_inputs_rejected(self):
        cfg = PipelineConfig(rof=None, variational=None, smoother=NO_SMOOTH)
        with pytest.raises(ValueError):
            run_experiment([], [NoiseSpec(sigma=1.0)], [("m", cfg)], [0])
        with pytest.raises(ValueError):
            run_experiment([("tile", scene64())], [NoiseSpec(sigma=1.0)], [("m", cfg)], [])

    def test_failing_cell_is_recorded_and_run_continues(self):
        clean = scene64(2)
        spec = NoiseSpec(sigma=25.0, p=0.3)
        good = PipelineConfig(rof=RofKind(variant="amf"), variational=None, smoother=NO_SMOOTH)
        bad = PipelineConfig(
            rof=None, variational=None,
            smoother=SmootherKind(variant="external", command="false"),
        )
        result = run_experiment([("tile", clean)], [spec], [("good", good), ("bad", bad)], [0])
        assert len(result.errors) == 1
        rows = {row["method"]: row for row in result.rows}
        assert rows["good"]["psnr_mean"] is not None
        assert rows["bad"]["psnr_mean"] is None

    def test_csv_layout(self):
        clean = scene64(3)
        spec = NoiseSpec(sigma=25.0, p=0.3)
        cfg = PipelineConfig(rof=RofKind(variant="amf"), variational=None, smoother=NO_SMOOTH)
        result = run_experiment([("tile", clean)], [spec], [("amf", cfg)], [0, 1])
        lines = result.to_csv().strip().split("\n")
        assert lines[0] == ("image,sigma,p,r,method,seed_count,psnr_mean,ssim_mean,"
                            "pct_increase_psnr,pct_increase_ssim")
        assert len(lines) == 2
        cells = lines[1].split(",")
        assert cells[0] == "tile"
        assert float(cells[1]) == 25.0
        assert int(cells[5]) == 2

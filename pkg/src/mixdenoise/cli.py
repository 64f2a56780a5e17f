"""Command-line interface.

Machine-readable results go to standard output (JSON by default, CSV with
--format csv); logs and errors go to the error stream. File outputs are
written atomically (temp file + rename) and contain no wall-clock data, so
a fixed seed yields byte-identical files and standard output across runs.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import math
import os
import re
import sys
import tempfile
from pathlib import Path

import numpy as np

from .gridio import PgmParseError, read_pgm, save_pgm
from .metrics import histogram_csv, psnr, residual_stats, ssim
from .noise import NoiseSpec, corrupt_mixed
from .pipeline import (
    BETA_RVIN,
    BETA_SPIN,
    REFTV_LAMBDA_SIGMA25,
    PipelineConfig,
    PipelineError,
    SmootherKind,
    denoise,
    run_experiment,
)
from .rof import AMF_DEFAULT_MAX_WINDOW, RofKind
from .scenes import SCENES, make_scene
from .variational import SolverBreakdownError, VariationalConfig

log = logging.getLogger("mixdenoise")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3

_ROF_CHOICES = {
    "amf": "amf",
    "acwmf": "acwmf",
    "amf+acwmf": "amf_then_acwmf",
    "none": None,
}


def _jsonable(obj):
    """JSON payloads carry non-finite floats as the strings inf/-inf/nan."""
    if isinstance(obj, dict):
        return {key: _jsonable(value) for key, value in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(value) for value in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        obj = float(obj)
    if isinstance(obj, float):
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        if math.isnan(obj):
            return "nan"
    return obj


def _print_json(payload) -> None:
    print(json.dumps(_jsonable(payload), indent=2, sort_keys=True))


def _write_atomic(path, data: bytes) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent) or ".", prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def cmd_corrupt(args) -> int:
    img = read_pgm(args.input)
    spec = NoiseSpec(
        sigma=args.sigma, p=args.p, r=args.r, clamp_gaussian=args.clamp_gaussian
    )
    noisy = corrupt_mixed(img, spec, args.seed)
    _write_atomic(args.out, save_pgm(noisy))
    log.info("wrote %s", args.out)
    metrics = {
        "psnr_db": psnr(img, noisy, quantize=True),
        "ssim": ssim(img, noisy, quantize=True),
    }
    if args.format == "csv":
        print("psnr_db,ssim")
        print(f"{_fmt(metrics['psnr_db'])},{_fmt(metrics['ssim'])}")
    else:
        _print_json(metrics)
    return EXIT_OK


def _denoise_config(args) -> PipelineConfig:
    rof_variant = _ROF_CHOICES[args.rof]
    rof = None if rof_variant is None else RofKind(variant=rof_variant, max_window=args.max_window)
    variational = None
    if args.vstep:
        beta = args.beta
        if beta is None:
            beta = BETA_RVIN if rof is not None and "acwmf" in rof.variant else BETA_SPIN
        variational = VariationalConfig(
            beta=beta,
            eta=args.eta,
            outer_tol=args.tol,
            max_outer=args.max_outer,
            inner_tol=args.inner_tol,
            max_inner=args.max_inner,
        )
    if args.smoother == "reftv":
        smoother = SmootherKind(variant="reference_tv", lam=args.lam)
    elif args.smoother == "external":
        if not args.smoother_cmd:
            raise ValueError("--smoother external requires --smoother-cmd")
        smoother = SmootherKind(variant="external", command=args.smoother_cmd)
    else:
        smoother = SmootherKind(variant="none")
    return PipelineConfig(
        rof=rof,
        variational=variational,
        smoother=smoother,
        quantize_metrics=args.quantize_metrics,
    )


def _config_echo(cfg: PipelineConfig) -> dict:
    rof = None
    if cfg.rof is not None:
        rof = {"variant": cfg.rof.variant, "max_window": cfg.rof.max_window}
    variational = None
    if cfg.variational is not None:
        v = cfg.variational
        variational = {
            "beta": v.beta,
            "eta": v.eta,
            "outer_tol": v.outer_tol,
            "max_outer": v.max_outer,
            "inner_tol": v.inner_tol,
            "max_inner": v.max_inner,
        }
    return {
        "rof": rof,
        "variational": variational,
        "smoother": {
            "variant": cfg.smoother.variant,
            "lam": cfg.smoother.lam,
            "command": cfg.smoother.command,
        },
        "quantize_metrics": cfg.quantize_metrics,
    }


_STAGE_METRIC_COLUMNS = ("psnr_db", "ssim", "sigma_hat", "tail_mass_3sigma", "excess_kurtosis")


def cmd_denoise(args) -> int:
    cfg = _denoise_config(args)
    x_n = read_pgm(args.input)
    clean = read_pgm(args.clean) if args.clean else None
    report = denoise(x_n, clean, cfg, seed=args.seed)
    _write_atomic(args.out, save_pgm(report.final))
    log.info("wrote %s", args.out)
    if args.dump_stages:
        stage_dir = Path(args.dump_stages)
        for stage, image in report.images.items():
            _write_atomic(stage_dir / f"{stage}.pgm", save_pgm(image))
        log.info("dumped stage images to %s", stage_dir)
    log.info("stage timing (s): %s", {k: round(v, 3) for k, v in report.timing_s.items()})
    if args.format == "csv":
        print("stage," + ",".join(_STAGE_METRIC_COLUMNS))
        for stage, block in report.metrics.items():
            print(stage + "," + ",".join(_fmt(block[c]) for c in _STAGE_METRIC_COLUMNS))
    else:
        _print_json(
            {
                "seed": args.seed,
                "config": _config_echo(cfg),
                "stages": report.metrics,
            }
        )
    return EXIT_OK


def cmd_hist(args) -> int:
    clean = read_pgm(args.clean)
    processed = read_pgm(args.processed)
    stats = residual_stats(clean, processed, bins=args.bins)
    csv_text = histogram_csv(stats)
    if args.out:
        _write_atomic(args.out, csv_text.encode("ascii"))
        log.info("wrote %s", args.out)
    if args.format == "csv":
        sys.stdout.write(csv_text)
    else:
        _print_json(
            {
                "bins": args.bins,
                "sample_count": stats.sample_count,
                **stats.metric_block(),
            }
        )
    return EXIT_OK


def _parse_seed_list(text: str) -> list[int]:
    parts = [part for part in re.split(r"[,\s]+", text.strip()) if part]
    if not parts:
        raise ValueError("seed list is empty")
    return [int(part) for part in parts]


def _load_experiment_config(path: Path):
    parser = configparser.ConfigParser(strict=True, inline_comment_prefixes=("#", ";"))
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ValueError(f"experiment config parse error: {exc}") from exc

    if not parser.has_section("images"):
        raise ValueError("experiment config needs an [images] section")
    image_entries = list(parser.items("images"))
    if not image_entries:
        raise ValueError("[images] section is empty")

    specs = []
    methods = []
    for section in parser.sections():
        if section.startswith("noise "):
            name = section.split(" ", 1)[1]
            sec = parser[section]
            specs.append(
                (
                    name,
                    NoiseSpec(
                        sigma=sec.getfloat("sigma", 0.0),
                        p=sec.getfloat("p", 0.0),
                        r=sec.getfloat("r", 0.0),
                        clamp_gaussian=sec.getboolean("clamp_gaussian", True),
                    ),
                )
            )
        elif section.startswith("method "):
            name = section.split(" ", 1)[1]
            methods.append((name, _method_from_section(parser[section])))
    if not specs:
        raise ValueError("experiment config needs at least one [noise NAME] section")
    if not methods:
        raise ValueError("experiment config needs at least one [method NAME] section")

    seeds = list(range(5))
    if parser.has_section("run") and parser.has_option("run", "seeds"):
        seeds = _parse_seed_list(parser.get("run", "seeds"))
    return image_entries, specs, methods, seeds


def _method_from_section(sec) -> PipelineConfig:
    rof_name = sec.get("rof", "amf").strip()
    if rof_name not in _ROF_CHOICES:
        raise ValueError(f"unknown rof {rof_name!r}; choose from {sorted(_ROF_CHOICES)}")
    rof_variant = _ROF_CHOICES[rof_name]
    rof = None
    if rof_variant is not None:
        rof = RofKind(variant=rof_variant, max_window=sec.getint("max_window", AMF_DEFAULT_MAX_WINDOW))
    variational = None
    auto_beta = False
    if sec.getboolean("vstep", True):
        beta_raw = sec.get("beta", "auto").strip().lower()
        if beta_raw == "auto":
            auto_beta = True
            beta = BETA_SPIN
        else:
            beta = float(beta_raw)
        variational = VariationalConfig(
            beta=beta,
            eta=sec.getfloat("eta", 1e-4),
            outer_tol=sec.getfloat("tol", 1e-3),
            max_outer=sec.getint("max_outer", 100),
            inner_tol=sec.getfloat("inner_tol", 1e-6),
            max_inner=sec.getint("max_inner", 500),
        )
    smoother_name = sec.get("smoother", "none").strip()
    if smoother_name == "reftv":
        smoother = SmootherKind(variant="reference_tv", lam=sec.getfloat("lambda", REFTV_LAMBDA_SIGMA25))
    elif smoother_name == "external":
        command = sec.get("command", "").strip()
        smoother = SmootherKind(variant="external", command=command)
    elif smoother_name == "none":
        smoother = SmootherKind(variant="none")
    else:
        raise ValueError(f"unknown smoother {smoother_name!r}; choose from none, reftv, external")
    return PipelineConfig(
        rof=rof,
        variational=variational,
        smoother=smoother,
        auto_beta=auto_beta,
        quantize_metrics=sec.getboolean("quantize_metrics", True),
    )


def _load_image_entry(value: str) -> np.ndarray:
    if value.startswith("builtin:"):
        return make_scene(value.split(":", 1)[1])
    return read_pgm(value)


def cmd_experiment(args) -> int:
    image_entries, named_specs, methods, seeds = _load_experiment_config(args.config)
    images = [(name, _load_image_entry(value)) for name, value in image_entries]
    log.info(
        "running %d image(s) x %d noise spec(s) x %d method(s) x %d seed(s)",
        len(images), len(named_specs), len(methods), len(seeds),
    )
    result = run_experiment(images, [spec for _name, spec in named_specs], methods, seeds)
    for error in result.errors:
        log.error("cell failed: %s", error)
    csv_text = result.to_csv()
    json_text = json.dumps(_jsonable(result.to_json_dict()), indent=2, sort_keys=True) + "\n"
    _write_atomic(Path(str(args.out) + ".csv"), csv_text.encode("ascii"))
    _write_atomic(Path(str(args.out) + ".json"), json_text.encode("ascii"))
    log.info("wrote %s.csv and %s.json", args.out, args.out)
    if args.format == "csv":
        sys.stdout.write(csv_text)
    else:
        sys.stdout.write(json_text)
    return EXIT_OK


def cmd_make_images(args) -> int:
    outdir = Path(args.outdir)
    written = []
    for name in sorted(SCENES):
        path = outdir / f"{name}.pgm"
        _write_atomic(path, save_pgm(make_scene(name, args.size)))
        written.append(str(path))
    _print_json({"written": written})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mixdenoise",
        description="Mixed Gaussian-impulse noise simulation and removal for PGM images.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    c = sub.add_parser("corrupt", help="corrupt a PGM image with mixed noise")
    c.add_argument("input", type=Path, help="clean input PGM")
    c.add_argument("--sigma", type=float, default=0.0, help="Gaussian noise std dev (gray levels)")
    c.add_argument("--p", type=float, default=0.0, help="extreme impulse probability in [0,1]")
    c.add_argument("--r", type=float, default=0.0, help="random-valued impulse probability in [0,1]")
    c.add_argument("--seed", type=int, default=0, help="noise seed")
    c.add_argument("--out", type=Path, required=True, help="output PGM path")
    c.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format")
    c.add_argument(
        "--clamp-gaussian", action=argparse.BooleanOptionalAction, default=True,
        help="clip the Gaussian branch into [0,255]",
    )
    c.set_defaults(func=cmd_corrupt)

    d = sub.add_parser("denoise", help="run the denoising pipeline on a PGM image")
    d.add_argument("input", type=Path, help="noisy input PGM")
    d.add_argument("--clean", type=Path, default=None, help="clean reference PGM (enables metrics)")
    d.add_argument("--out", type=Path, required=True, help="output PGM path for the final image")
    d.add_argument("--dump-stages", type=Path, default=None, help="directory for per-stage PGMs")
    d.add_argument(
        "--rof", choices=tuple(_ROF_CHOICES), default="amf",
        help="rank-order filter chain (amf+acwmf is the random-valued impulse protocol)",
    )
    d.add_argument("--max-window", type=int, default=AMF_DEFAULT_MAX_WINDOW,
                   help="adaptive median filter window limit (odd)")
    d.add_argument("--vstep", action=argparse.BooleanOptionalAction, default=True,
                   help="run the variational impulse-tail removal step")
    d.add_argument("--beta", type=float, default=None,
                   help="edge penalty weight; default 0.0002, or 0.002 when the chain includes acwmf")
    d.add_argument("--eta", type=float, default=1e-4, help="square-root smoothing constant")
    d.add_argument("--tol", type=float, default=1e-3, help="outer relative-change stop")
    d.add_argument("--inner-tol", type=float, default=1e-6, help="linear solver residual tolerance")
    d.add_argument("--max-outer", type=int, default=100, help="outer iteration limit")
    d.add_argument("--max-inner", type=int, default=500, help="inner solver iteration limit")
    d.add_argument("--smoother", choices=("none", "reftv", "external"), default="none",
                   help="final Gaussian-noise smoother")
    d.add_argument("--lam", type=float, default=REFTV_LAMBDA_SIGMA25,
                   help="reference smoother strength (default tuned for sigma=25)")
    d.add_argument("--smoother-cmd", type=str, default="",
                   help="external smoother command template with {input} and {output}")
    d.add_argument("--quantize-metrics", action=argparse.BooleanOptionalAction, default=True,
                   help="snap images to 8-bit levels before computing metrics")
    d.add_argument("--seed", type=int, default=None, help="seed echoed into the report")
    d.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format")
    d.set_defaults(func=cmd_denoise)

    h = sub.add_parser("hist", help="residual histogram and tail statistics")
    h.add_argument("clean", type=Path, help="clean reference PGM")
    h.add_argument("processed", type=Path, help="processed PGM")
    h.add_argument("--bins", type=int, default=101, help="histogram bin count (>= 3)")
    h.add_argument("--out", type=Path, default=None, help="histogram CSV path")
    h.add_argument("--seed", type=int, default=None, help="accepted for interface uniformity")
    h.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format")
    h.set_defaults(func=cmd_hist)

    e = sub.add_parser("experiment", help="run a config-driven experiment grid")
    e.add_argument("config", type=Path, help="experiment config file (INI format, see README)")
    e.add_argument("--out", type=Path, required=True,
                   help="output prefix; writes <prefix>.csv and <prefix>.json")
    e.add_argument("--seed", type=int, default=None,
                   help="accepted for interface uniformity; seeds come from the config")
    e.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format")
    e.set_defaults(func=cmd_experiment)

    m = sub.add_parser("make-images", help="write the built-in test scenes as PGM files")
    m.add_argument("--outdir", type=Path, required=True, help="destination directory")
    m.add_argument("--size", type=int, default=512, help="square scene size")
    m.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format")
    m.set_defaults(func=cmd_make_images)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
        return EXIT_OK if code == 0 else EXIT_VALIDATION
    try:
        return args.func(args)
    except PgmParseError as exc:
        log.error("invalid image file: %s", exc)
        return EXIT_IO
    except OSError as exc:
        log.error("i/o failure: %s", exc)
        return EXIT_IO
    except (SolverBreakdownError, PipelineError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except ValueError as exc:
        log.error("invalid arguments: %s", exc)
        return EXIT_VALIDATION


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

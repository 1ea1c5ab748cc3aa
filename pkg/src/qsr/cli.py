"""Command-line front end.

    qsr trajectory --config fig3.cfg --seed 3 --out run0
    qsr spectrum   --config fig3.cfg --out run1 --keep-trajectories
    qsr sweep      --config fig4.cfg --seed 7 --out run2 --workers 4
    qsr validate   --config fig3.cfg

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from . import config as cfgmod
from .harness import StageError, SweepConfig, run_experiment, sweep_noise
from .jump import simulate_trajectory
from .master import IntegrationError
from .model import validate_params

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("trajectory", "simulate one photon-emission record"),
            ("spectrum", "single-point pipeline: trajectories, spectrum, harmonic SNRs"),
            ("sweep", "SNR at the driving frequency versus noise intensity"),
            ("validate", "report the broadband/dressed-state regime margins")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="config file or shipped preset name")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--keep-trajectories", action="store_true")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _apply_overrides(cfg, args):
    resolved = dict(cfg.resolved)
    settings = cfg.settings
    if args.seed is not None:
        settings = replace(settings, seed=args.seed)
        resolved["run.seed"] = args.seed
    if args.workers is not None:
        settings = replace(settings, workers=args.workers)
    out = args.out or cfg.out_dir
    if out is not None:
        resolved["output.dir"] = out
    # worker count never changes results, so it is kept out of the echo
    resolved.pop("run.workers", None)
    return settings, out, resolved


def _cmd_validate(cfg, settings, out, resolved):
    report = validate_params(cfg.params, settings.validation_factor)
    for name, (lower, upper) in sorted(report.ratios.items()):
        print(f"{name}: bandwidth/decay = {lower:.4g}  omega/bandwidth = {upper:.4g}")
    for w in report.warnings:
        print(f"warning: {w}")
    print(f"ok = {str(report.ok).lower()}")
    return EXIT_OK


def _cmd_trajectory(cfg, settings, out, resolved):
    params = cfg.params
    record = simulate_trajectory(params, settings.seed, settings.horizon_periods * params.period,
                                 burn_in=settings.burn_in_periods * params.period,
                                 bisect_tol=settings.bisect_tol / params.gamma22)
    text = record.to_text()
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).mkdir(parents=True, exist_ok=True)
        (Path(out) / "trajectory.txt").write_text(text)
        print(f"{len(record)} emissions written to {Path(out) / 'trajectory.txt'}")
    return EXIT_OK


def _cmd_spectrum(cfg, settings, out, resolved, keep=False):
    res = run_experiment(cfg.params, settings, out_dir=out, keep_trajectories=keep,
                         config_echo=resolved)
    print(f"snr at f = {cfg.params.drive_frequency:.6g}: {res.snr:.4g} +- {res.stderr:.3g}")
    for h in res.harmonics:
        print(f"  k={h.k} peak={h.peak:.4g} background={h.background:.4g} snr={h.snr:.4g}")
    for d in res.diagnostics:
        print(f"note: {d}", file=sys.stderr)
    return EXIT_OK


def _cmd_sweep(cfg, settings, out, resolved):
    if cfg.sweep_values is None:
        raise cfgmod.ConfigError("sweep values required for the sweep command", "sweep.points")
    curve = sweep_noise(SweepConfig(cfg.params, cfg.sweep_values, settings), out_dir=out,
                        config_echo=resolved)
    print("W,snr,stderr")
    for w, s, e in zip(curve.noise_values, curve.snr, curve.standard_errors):
        print(f"{w:.6g},{s:.6g},{e:.3g}")
    for d in curve.diagnostics:
        print(f"note: {d}", file=sys.stderr)
    if any(math.isnan(s) for s in curve.snr):
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cfgmod.load_config(args.config)
        settings, out, resolved = _apply_overrides(cfg, args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (cfgmod.ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "validate":
            return _cmd_validate(cfg, settings, out, resolved)
        if args.command == "trajectory":
            return _cmd_trajectory(cfg, settings, out, resolved)
        if args.command == "spectrum":
            return _cmd_spectrum(cfg, settings, out, resolved, keep=args.keep_trajectories)
        return _cmd_sweep(cfg, settings, out, resolved)
    except cfgmod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StageError, IntegrationError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

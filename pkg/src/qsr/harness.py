"""Experiment orchestration: trajectory batches, spectra, SNR sweeps, run directories."""
from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import dsp
from .drive import TablePumps
from .jump import DEFAULT_BISECT_TOL, segment_table, simulate_trajectory, trajectory_seeds
from .model import SystemParams, validate_params

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunSettings:
    """Trajectory batch and signal-processing settings of one experiment."""

    trajectories: int = 64
    horizon_periods: float = 256
    burn_in_periods: float = 5
    bins_per_period: int = 32
    threshold_fraction: float = 0.1
    segment_length: int = 1024
    overlap: float = 0.5
    window: str = "hann"
    guard_bins: int = 2
    background_window: int = 20
    n_harmonics: int = 5
    seed: int = 0
    workers: int = 1
    bisect_tol: float = DEFAULT_BISECT_TOL
    validation_factor: float = 3.0

    def __post_init__(self):
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")
        if not self.horizon_periods > 0:
            raise ValueError("horizon_periods must be > 0")
        if self.burn_in_periods < 0:
            raise ValueError("burn_in_periods must be >= 0")
        if self.bins_per_period < 2:
            raise ValueError("bins_per_period must be >= 2")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class SweepConfig:
    base: SystemParams
    sweep_values: tuple
    settings: RunSettings = field(default_factory=RunSettings)

    def __post_init__(self):
        vals = list(self.sweep_values)
        if len(vals) < 1:
            raise ValueError("sweep needs at least one value")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("sweep_values must be strictly increasing")
        if any(v <= 0 for v in vals):
            raise ValueError("sweep multipliers must be > 0")


@dataclass
class ExperimentResult:
    records: list
    spectrum: dsp.Spectrum
    harmonics: list
    snr: float
    stderr: float
    validation: object
    horizon: float
    diagnostics: list = field(default_factory=list)


@dataclass
class SnrCurve:
    noise_values: list
    snr: list
    standard_errors: list
    multipliers: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)

    def to_csv(self) -> str:
        lines = ["W,snr,stderr"]
        for w, s, e in zip(self.noise_values, self.snr, self.standard_errors):
            lines.append(f"{w!r},{s!r},{e!r}")
        return "\n".join(lines) + "\n"


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage, exc):
        super().__init__(f"[{stage}] {exc}")
        self.stage = stage
        self.original = exc


def noise_value(params: SystemParams) -> float:
    """The controlled noise intensity: W33,weak in table mode, field-3 w_max otherwise."""
    if isinstance(params.pumps, TablePumps):
        return params.pumps.w33_weak
    return params.noise3.w_max


@lru_cache(maxsize=16)
def _table(params):
    return segment_table(params)


def _trajectory_task(args):
    params, seed, horizon, burn_in, settings = args
    record = simulate_trajectory(params, seed, horizon, burn_in=burn_in,
                                 table=_table(params),
                                 bisect_tol=settings.bisect_tol / params.gamma22)
    series = dsp.bin_counts(record, params.period / settings.bins_per_period)
    binary = dsp.binarize(series, params, settings.threshold_fraction)
    spec = dsp.power_spectrum(binary, settings.segment_length, settings.overlap, settings.window)
    return record, spec


def _map(tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [_trajectory_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trajectory_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _snr_or_zero(spectrum, f0, settings):
    """SNR at f0; a spectrum that is identically zero carries no signal at all."""
    if not np.any(spectrum.power[1:] > 0):
        return 0.0
    return dsp.snr_at(spectrum, f0, settings.guard_bins, settings.background_window)


def _jackknife(spectra, f0, settings):
    n = len(spectra)
    if n < 2:
        return math.nan
    total = np.sum([s.power * s.segments_averaged for s in spectra], axis=0)
    count = sum(s.segments_averaged for s in spectra)
    loo = []
    for s in spectra:
        power = (total - s.power * s.segments_averaged) / (count - s.segments_averaged)
        loo.append(_snr_or_zero(dsp.Spectrum(s.frequencies, power, count), f0, settings))
    loo = np.asarray(loo)
    return float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def _run_batch(params, settings, point, horizon_periods):
    seeds = trajectory_seeds(settings.seed, point, settings.trajectories)
    horizon = horizon_periods * params.period
    burn_in = settings.burn_in_periods * params.period
    tasks = [(params, s, horizon, burn_in, settings) for s in seeds]
    try:
        results = _map(tasks, settings.workers)
    except dsp.ThresholdError as exc:
        raise StageError("binarize", exc) from exc
    except dsp.SpectrumError as exc:
        raise StageError("spectrum", exc) from exc
    except Exception as exc:
        raise StageError("trajectory", exc) from exc
    return [r for r, _ in results], [s for _, s in results], horizon


def run_experiment(params: SystemParams, settings: RunSettings = RunSettings(),
                   point: int = 0, out_dir=None, keep_trajectories: bool = False,
                   config_echo: dict | None = None) -> ExperimentResult:
    """simulate x N -> bin -> binarize -> spectrum -> harmonic report -> SNR."""
    validation = validate_params(params, settings.validation_factor)
    f0 = params.drive_frequency
    diagnostics = []
    horizon_periods = settings.horizon_periods
    for attempt in range(2):
        records, spectra, horizon = _run_batch(params, settings, point, horizon_periods)
        spectrum = dsp.average_spectra(spectra)
        try:
            snr = _snr_or_zero(spectrum, f0, settings)
            n_h = min(settings.n_harmonics, _max_harmonics(spectrum, f0, settings))
            harmonics = dsp.harmonic_report(spectrum, f0, n_h, settings.guard_bins,
                                            settings.background_window) if snr > 0 else []
            break
        except dsp.SpectrumError as exc:
            if attempt == 1 or "background unresolved" not in str(exc):
                raise StageError("snr", exc) from exc
            diagnostics.append(f"point {point}: {exc}; retrying with horizon x4")
            horizon_periods *= 4
    if snr == 0.0:
        diagnostics.append(f"point {point}: binary series has zero variance, SNR set to 0")
    stderr = _jackknife(spectra, f0, settings)
    result = ExperimentResult(records, spectrum, harmonics, snr, stderr, validation, horizon,
                              diagnostics)
    if out_dir is not None:
        write_experiment(result, params, settings, Path(out_dir), keep_trajectories, config_echo)
    return result


def _max_harmonics(spectrum, f0, settings):
    k_last = len(spectrum.power) - 1 - settings.guard_bins - settings.background_window
    return max(1, int(k_last * spectrum.df / f0 + 1e-9))


def sweep_noise(config: SweepConfig, out_dir=None, config_echo: dict | None = None) -> SnrCurve:
    """SNR at the driving frequency as a function of the noise-intensity multiplier."""
    curve = SnrCurve([], [], [], [])
    for i, m in enumerate(config.sweep_values):
        params = config.base.with_noise_scale(m)
        try:
            res = run_experiment(params, config.settings, point=i)
            snr, err = res.snr, res.stderr
            curve.diagnostics.extend(res.diagnostics)
        except StageError as exc:
            if exc.stage != "snr":
                raise
            snr, err = math.nan, math.nan
            curve.diagnostics.append(f"point {i} failed: {exc}")
        log.info("sweep point %d: multiplier %.4g snr %.4g +- %.3g", i, m, snr, err)
        curve.noise_values.append(noise_value(params))
        curve.multipliers.append(float(m))
        curve.snr.append(snr)
        curve.standard_errors.append(err)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "snr_curve.csv").write_text(curve.to_csv())
        _write_manifest(out, config_echo, validate_params(config.base,
                                                          config.settings.validation_factor),
                        {"snr_curve.csv": curve.to_csv(), "diagnostics": curve.diagnostics})
    return curve


def git_blob_hash(text: str) -> str:
    data = text.encode()
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _write_manifest(out: Path, config_echo, validation, outputs):
    manifest = {
        "config": config_echo or {},
        "config_hash": git_blob_hash(json.dumps(config_echo or {}, sort_keys=True)),
        "validation": {"ok": validation.ok, "warnings": validation.warnings,
                       "ratios": {k: list(v) for k, v in validation.ratios.items()}},
        "outputs": {name: git_blob_hash(text) for name, text in outputs.items()
                    if isinstance(text, str)},
        "diagnostics": outputs.get("diagnostics", []),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True,
                                                  default=str) + "\n")


def write_experiment(result: ExperimentResult, params, settings, out: Path,
                     keep_trajectories=False, config_echo=None):
    out.mkdir(parents=True, exist_ok=True)
    spectrum_text = result.spectrum.to_csv()
    harmonics_text = dsp.harmonics_csv(result.harmonics)
    (out / "spectrum.csv").write_text(spectrum_text)
    (out / "harmonics.csv").write_text(harmonics_text)
    outputs = {"spectrum.csv": spectrum_text, "harmonics.csv": harmonics_text,
               "diagnostics": result.diagnostics}
    if keep_trajectories:
        tdir = out / "trajectories"
        tdir.mkdir(exist_ok=True)
        for i, rec in enumerate(result.records):
            (tdir / f"{i:03d}.txt").write_text(rec.to_text())
    _write_manifest(out, config_echo, result.validation, outputs)

import json
import math

import numpy as np
import pytest

from qsr.harness import (RunSettings, StageError, SweepConfig, git_blob_hash, noise_value,
                         run_experiment, sweep_noise)

from conftest import make_params

SMALL = RunSettings(trajectories=4, horizon_periods=64, burn_in_periods=2, bins_per_period=8,
                    segment_length=256, n_harmonics=3, seed=5)


@pytest.fixture(scope="module")
def small_params():
    return make_params(w33_weak=0.05, t_m=640.0)


@pytest.fixture(scope="module")
def small_result(small_params):
    return run_experiment(small_params, SMALL)


def test_run_experiment_shapes(small_result):
    res = small_result
    assert len(res.records) == 4
    assert res.snr > 3
    assert [h.k for h in res.harmonics] == [1, 2, 3]
    assert res.harmonics[0].snr == pytest.approx(res.snr)
    assert math.isfinite(res.stderr) and res.stderr > 0


def test_single_point_sweep_matches_experiment(small_params, small_result):
    curve = sweep_noise(SweepConfig(small_params, (1.0,), SMALL))
    assert curve.snr == [small_result.snr]
    assert curve.standard_errors == [small_result.stderr]
    assert curve.noise_values == [0.05]


def test_no_noise_no_peak():
    p = make_params(w33_weak=0.0, t_m=640.0)
    res = run_experiment(p, SMALL)
    assert res.snr <= 3
    assert res.diagnostics


def test_workers_do_not_change_results(small_params, small_result):
    from dataclasses import replace
    res = run_experiment(small_params, replace(SMALL, workers=2))
    assert np.array_equal(res.spectrum.power, small_result.spectrum.power)
    assert all(a == b for a, b in zip(res.records, small_result.records))
    assert res.snr == small_result.snr


def test_unit_rescaling_invariance(small_params, small_result):
    res = run_experiment(small_params.rescaled(2.0), SMALL)
    assert res.snr == pytest.approx(small_result.snr, rel=1e-6)


def test_noise_scaling_along_sweep(small_params):
    cfg = SweepConfig(small_params, (0.5, 2.0), SMALL)
    assert [noise_value(small_params.with_noise_scale(m)) for m in cfg.sweep_values] == [0.025, 0.1]


def test_sweep_config_validation(small_params):
    with pytest.raises(ValueError):
        SweepConfig(small_params, (), SMALL)
    with pytest.raises(ValueError):
        SweepConfig(small_params, (2.0, 1.0), SMALL)
    with pytest.raises(ValueError):
        SweepConfig(small_params, (0.0, 1.0), SMALL)


def test_threshold_failure_tagged(small_params):
    from dataclasses import replace
    with pytest.raises(StageError) as info:
        run_experiment(small_params, replace(SMALL, bins_per_period=128))
    assert info.value.stage == "binarize"


def test_run_directory(tmp_path, small_params):
    echo = {"run.seed": 5}
    res = run_experiment(small_params, SMALL, out_dir=tmp_path, keep_trajectories=True,
                         config_echo=echo)
    spectrum = (tmp_path / "spectrum.csv").read_text()
    assert spectrum.splitlines()[0] == "frequency,power"
    assert (tmp_path / "harmonics.csv").read_text().splitlines()[0] == \
        "k,frequency,peak,background,snr"
    assert len(list((tmp_path / "trajectories").iterdir())) == 4
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"] == echo
    assert manifest["outputs"]["spectrum.csv"] == git_blob_hash(spectrum)
    assert manifest["validation"]["ok"] is True
    assert res.spectrum.to_csv() == spectrum


def test_sweep_outputs(tmp_path, small_params):
    curve = sweep_noise(SweepConfig(small_params, (0.5, 1.0), SMALL), out_dir=tmp_path)
    text = (tmp_path / "snr_curve.csv").read_text()
    assert text == curve.to_csv()
    assert text.splitlines()[0] == "W,snr,stderr"
    assert len(text.splitlines()) == 3
    assert (tmp_path / "manifest.json").exists()


def test_git_blob_hash():
    # value of `git hash-object` for "hello\n"
    assert git_blob_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"

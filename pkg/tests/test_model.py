import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qsr.drive import Beat, Step, TablePumps
from qsr.model import (DressedState, NoiseFieldConfig, ParameterError, SystemParams,
                       emission_rate, level2_population, validate_params)

from conftest import make_params


def test_validate_fig5_margins():
    noise = NoiseFieldConfig(0.05, 6.66)
    p = SystemParams(1.0, 1.0, 50.0, 10.0, noise, noise, Step(100.0))
    rep = validate_params(p)
    assert rep.ok
    lower, upper = rep.ratios["field3"]
    assert lower == pytest.approx(6.66)
    assert upper == pytest.approx(7.51, abs=5e-3)
    assert rep.warnings == []


def test_validate_bandwidth_exceeds_rabi():
    wide = NoiseFieldConfig(0.05, 60.0)
    narrow = NoiseFieldConfig(0.05, 6.66)
    rep = validate_params(SystemParams(1.0, 1.0, 50.0, 10.0, wide, narrow, Step(100.0)))
    assert not rep.ok
    assert any("Δω3 ≥ Ω" in w for w in rep.warnings)


def test_validate_zero_gamma33():
    noise = NoiseFieldConfig(0.05, 6.66)
    rep = validate_params(SystemParams(1.0, 0.0, 50.0, 10.0, noise, noise, Step(100.0)))
    assert math.isinf(rep.ratios["field3"][0])
    assert rep.ok
    narrow_rabi = SystemParams(1.0, 0.0, 15.0, 1.0, noise, noise, Step(100.0))
    assert not validate_params(narrow_rabi).ok


def test_validate_is_independent_of_timing():
    a = make_params(t_m=100.0)
    b = make_params(t_m=5000.0)
    assert validate_params(a) == validate_params(b)


@pytest.mark.parametrize("kwargs", [
    dict(gamma22=0.0), dict(gamma33=-1.0), dict(omega=0.0), dict(delta_omega=50.0),
    dict(delta_omega=-1.0),
])
def test_params_rejected(kwargs):
    noise = NoiseFieldConfig(0.05, 6.66)
    base = dict(gamma22=1.0, gamma33=1.0, omega=50.0, delta_omega=10.0, noise3=noise,
                noise4=noise, schedule=Step(10.0))
    base.update(kwargs)
    with pytest.raises(ParameterError):
        SystemParams(**base)


def test_noise_field_rejected():
    with pytest.raises(ParameterError):
        NoiseFieldConfig(-1.0, 1.0)
    with pytest.raises(ParameterError):
        NoiseFieldConfig(1.0, 0.0)


def test_table_with_beat_rejected():
    noise = NoiseFieldConfig(0.05, 6.66)
    with pytest.raises(ParameterError):
        SystemParams(1.0, 1.0, 50.0, 10.0, noise, noise, Beat(50, 10, 0.049),
                     TablePumps(1, 1, 1, 1))


def test_level2_population_examples():
    assert level2_population(DressedState.ground()) == 0.0
    assert level2_population(DressedState.excited()) == pytest.approx(1.0)
    assert level2_population(DressedState(1.0, 0.0, 0.0, 0.0)) == pytest.approx(0.5)


def test_emission_rate_examples():
    assert emission_rate(DressedState(0.0, 0.5, 0.0, 0.5), 1.0) == pytest.approx(0.5)
    assert emission_rate(DressedState.shelved(), 1.0) == 0.0
    assert emission_rate(DressedState.ground(), 1.0) == 0.0


@st.composite
def valid_states(draw):
    w = np.array([draw(st.floats(0, 1)) for _ in range(4)]) + 1e-9
    w = w / w.sum()
    r = draw(st.floats(0, 1))
    phi = draw(st.floats(0, 2 * math.pi))
    coh = r * math.sqrt(w[0] * w[1]) * complex(math.cos(phi), math.sin(phi))
    return DressedState(*w, coh)


@given(valid_states())
def test_level2_population_in_unit_interval(state):
    assert state.is_valid()
    assert 0.0 <= level2_population(state) <= 1.0 + 1e-12


@given(valid_states(), valid_states(), st.floats(0, 1))
@settings(max_examples=50)
def test_emission_rate_linear(a, b, alpha):
    mix = DressedState.from_vector(alpha * a.as_vector() + (1 - alpha) * b.as_vector())
    expected = alpha * emission_rate(a, 1.0) + (1 - alpha) * emission_rate(b, 1.0)
    assert emission_rate(mix, 1.0) == pytest.approx(expected, abs=1e-12)


def test_state_vector_round_trip():
    s = DressedState(0.1, 0.2, 0.3, 0.4, 0.05 - 0.02j)
    assert DressedState.from_vector(s.as_vector()) == s
    assert s.trace == pytest.approx(1.0)


def test_noise_scale_and_rescale():
    p = make_params()
    q = p.with_noise_scale(3.0)
    assert q.pumps.w33_weak == pytest.approx(3 * 0.0128)
    assert q.pumps.w44_strong == pytest.approx(3 * 0.0128)
    r = p.rescaled(2.0)
    assert r.gamma22 == 2.0 and r.schedule.t_m == pytest.approx(p.schedule.t_m / 2)

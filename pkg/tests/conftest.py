import math

import pytest

from qsr.config import load_config
from qsr.drive import Beat, LineshapePumps, Step, TablePumps
from qsr.model import NoiseFieldConfig, SystemParams


@pytest.fixture(scope="session")
def fig3():
    return load_config("fig3.cfg")


@pytest.fixture(scope="session")
def fig4():
    return load_config("fig4.cfg")


@pytest.fixture(scope="session")
def fig5():
    return load_config("fig5.cfg")


def make_params(w33_weak=0.0128, ratio=10.0, t_m=2 * math.pi / 0.0049, gamma33=1.0,
                omega=50.0, delta_omega=10.0, bandwidth=6.66):
    noise = NoiseFieldConfig(w33_weak, bandwidth)
    pumps = TablePumps(w33_weak, w33_weak / ratio, w33_weak / ratio, w33_weak)
    return SystemParams(1.0, gamma33, omega, delta_omega, noise, noise, Step(t_m), pumps)


def make_beat(w_max=0.05, bandwidth=6.66, profile="lorentzian"):
    noise = NoiseFieldConfig(w_max, bandwidth)
    return SystemParams(1.0, 1.0, 50.0, 10.0, noise, noise, Beat(50.0, 10.0, 0.049),
                        LineshapePumps(profile))

"""Modulated coherent drive and the broadband pump-rate schedule.

The coherent 1<->2 drive is either a square (step) modulation of the Rabi
frequency or the slow envelope of two beating lasers. The broadband fields
on 1<->3 and 2<->4 act through effective pump rates W33(t), W44(t), given
either by a fixed weak/strong table or by a lineshape evaluated at the
mismatch between the instantaneous dressed splitting and each field's
resonance point.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Union

if TYPE_CHECKING:
    from .model import SystemParams


@dataclass(frozen=True)
class Step:
    """Square modulation, Omega + dOmega on the first half of each period."""

    t_m: float

    def __post_init__(self):
        if not self.t_m > 0:
            raise ValueError(f"Step.t_m must be > 0, got {self.t_m}")

    @property
    def period(self) -> float:
        return self.t_m

    @property
    def frequency(self) -> float:
        return 1.0 / self.t_m


@dataclass(frozen=True)
class Beat:
    """Two lasers of Rabi frequencies omega1 > omega2 detuned by delta_w."""

    omega1: float
    omega2: float
    delta_w: float

    def __post_init__(self):
        if not (self.omega1 > self.omega2 > 0):
            raise ValueError(
                f"Beat requires omega1 > omega2 > 0, got {self.omega1}, {self.omega2}")
        if not self.delta_w > 0:
            raise ValueError(f"Beat.delta_w must be > 0, got {self.delta_w}")

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.delta_w

    @property
    def frequency(self) -> float:
        return self.delta_w / (2.0 * math.pi)


DriveSchedule = Union[Step, Beat]


@dataclass(frozen=True)
class TablePumps:
    """Pump rates switched between a weak-laser and a strong-laser value."""

    w33_weak: float
    w33_strong: float
    w44_weak: float
    w44_strong: float

    def __post_init__(self):
        for name in ("w33_weak", "w33_strong", "w44_weak", "w44_strong"):
            if getattr(self, name) < 0:
                raise ValueError(f"TablePumps.{name} must be >= 0")

    def scaled(self, factor: float) -> "TablePumps":
        return TablePumps(self.w33_weak * factor, self.w33_strong * factor,
                          self.w44_weak * factor, self.w44_strong * factor)


@dataclass(frozen=True)
class LineshapePumps:
    """Pump rates from the noise-field lineshapes (w_max and bandwidth per field)."""

    profile: str = "lorentzian"

    def __post_init__(self):
        if self.profile not in ("lorentzian", "gaussian"):
            raise ValueError(f"unknown lineshape profile {self.profile!r}")


PumpMode = Union[TablePumps, LineshapePumps]


def rabi_at(schedule: DriveSchedule, params: "SystemParams", t: float) -> float:
    """Instantaneous Rabi frequency of the coherent drive at time ``t``."""
    if isinstance(schedule, Step):
        phase = (t / schedule.t_m) % 1.0
        if phase < 0.5:
            return params.omega + params.delta_omega
        return params.omega - params.delta_omega
    o1, o2 = schedule.omega1, schedule.omega2
    arg = o1 * o1 + o2 * o2 + 2.0 * o1 * o2 * math.cos(schedule.delta_w * t)
    return math.sqrt(max(arg, 0.0))


def detunings_for(omega: float, delta_omega: float) -> tuple[float, float]:
    """Broadband-field detunings (Delta31, Delta41) for a given Omega and dOmega."""
    if not omega > delta_omega >= 0:
        raise ValueError("need omega > delta_omega >= 0")
    return (omega + delta_omega) / 2.0, -(omega - delta_omega) / 2.0


def resonance_points(schedule: DriveSchedule, params: "SystemParams") -> tuple[float, float]:
    """Rabi frequencies at which field 3 and field 4 are exactly resonant.

    Field 3 is resonant in the weak-laser configuration and field 4 in the
    strong-laser one. For a beat note these are Omega1 - Omega2 and
    Omega1 + Omega2.
    """
    if isinstance(schedule, Beat):
        return schedule.omega1 - schedule.omega2, schedule.omega1 + schedule.omega2
    return params.omega - params.delta_omega, params.omega + params.delta_omega


def lineshape(mismatch: float, bandwidth: float, profile: str = "lorentzian") -> float:
    """Normalized lineshape (peak 1, FWHM ``bandwidth``) at ``mismatch``."""
    x = 2.0 * mismatch / bandwidth
    if profile == "lorentzian":
        return 1.0 / (1.0 + x * x)
    if profile == "gaussian":
        return math.exp(-math.log(2.0) * x * x)
    raise ValueError(f"unknown lineshape profile {profile!r}")


def pump_rates_for_rabi(mode: PumpMode, schedule: DriveSchedule,
                        params: "SystemParams", omega_t: float,
                        strong: bool | None = None) -> tuple[float, float]:
    """Pump rates (W33, W44) given the instantaneous Rabi frequency.

    ``strong`` selects the table half-cycle; it is only consulted in table mode.
    """
    if isinstance(mode, TablePumps):
        if isinstance(schedule, Beat):
            raise ValueError("table pump mode requires a step schedule")
        if strong:
            return mode.w33_strong, mode.w44_strong
        return mode.w33_weak, mode.w44_weak
    res3, res4 = resonance_points(schedule, params)
    d3 = (omega_t - res3) / 2.0
    d4 = (res4 - omega_t) / 2.0
    w3 = params.noise3.w_max * lineshape(d3, params.noise3.bandwidth, mode.profile)
    w4 = params.noise4.w_max * lineshape(d4, params.noise4.bandwidth, mode.profile)
    return w3, w4


def pump_rates_at(mode: PumpMode, schedule: DriveSchedule, params: "SystemParams",
                  t: float) -> tuple[float, float]:
    """Effective pump rates (W33, W44) at time ``t``.

    Raises
    ------
    ValueError
        If table mode is combined with a beat-note schedule.
    """
    if isinstance(mode, TablePumps) and isinstance(schedule, Beat):
        raise ValueError("table pump mode requires a step schedule")
    omega_t = rabi_at(schedule, params, t)
    strong = None
    if isinstance(schedule, Step):
        strong = (t / schedule.t_m) % 1.0 < 0.5
    return pump_rates_for_rabi(mode, schedule, params, omega_t, strong)


def piecewise_schedule(params: "SystemParams", segments_per_period: int = 256):
    """Split one modulation period into constant-coefficient pieces.

    Returns a list of ``(start, length, omega_t, w33, w44)`` covering
    ``[0, period)``. A step schedule has exactly two pieces; a beat schedule
    is cut into ``segments_per_period`` equal pieces with coefficients frozen
    at each piece's midpoint.
    """
    schedule, mode = params.schedule, params.pumps
    if isinstance(schedule, Step):
        half = schedule.t_m / 2.0
        out = []
        for k, strong in enumerate((True, False)):
            om = params.omega + params.delta_omega if strong else params.omega - params.delta_omega
            w33, w44 = pump_rates_for_rabi(mode, schedule, params, om, strong)
            out.append((k * half, half, om, w33, w44))
        return out
    if isinstance(mode, TablePumps):
        raise ValueError("table pump mode requires a step schedule")
    n = int(segments_per_period)
    length = schedule.period / n
    out = []
    for k in range(n):
        mid = (k + 0.5) * length
        om = rabi_at(schedule, params, mid)
        w33, w44 = pump_rates_for_rabi(mode, schedule, params, om)
        out.append((k * length, length, om, w33, w44))
    return out

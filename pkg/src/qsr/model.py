"""Domain types for the driven four-level shelving atom.

Units: every rate is measured in units of gamma22 and every time in units
of 1/gamma22. Level 2 population decays at 2*gamma22, level 3 decays into
level 4 at 2*gamma33, level 4 is metastable.

The density operator is kept in the dressed basis ``|+-> = (|1> +- |2>)/sqrt(2)``
as five real-or-complex degrees of freedom: the populations of ``+``, ``-``,
3 and 4 and the complex coherence rho_{+-}. Its real vector representation is
``(p_plus, p_minus, p3, p4, Re coh, Im coh)``.
"""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .drive import Beat, DriveSchedule, LineshapePumps, PumpMode, Step, TablePumps, detunings_for

EPS_NUM = 1e-12


class ParameterError(ValueError):
    """Structurally invalid system parameters."""


@dataclass(frozen=True)
class NoiseFieldConfig:
    """Broadband noise field: peak pump rate, FWHM bandwidth and detuning."""

    w_max: float
    bandwidth: float
    detuning: float = 0.0

    def __post_init__(self):
        if not self.w_max >= 0:
            raise ParameterError(f"noise w_max must be >= 0, got {self.w_max}")
        if not self.bandwidth > 0:
            raise ParameterError(f"noise bandwidth must be > 0, got {self.bandwidth}")


@dataclass(frozen=True)
class SystemParams:
    """Everything that defines the dynamics of one run."""

    gamma22: float
    gamma33: float
    omega: float
    delta_omega: float
    noise3: NoiseFieldConfig
    noise4: NoiseFieldConfig
    schedule: DriveSchedule
    pumps: PumpMode = field(default_factory=LineshapePumps)
    # Prefactor of the (p++ + p--) source in the unconditional coherence equation.
    coherence_source: float = 1.0

    def __post_init__(self):
        if not self.gamma22 > 0:
            raise ParameterError("gamma22 must be > 0")
        if not self.gamma33 >= 0:
            raise ParameterError("gamma33 must be >= 0")
        if not self.omega > 0:
            raise ParameterError("omega must be > 0")
        if not 0 <= self.delta_omega < self.omega:
            raise ParameterError("need 0 <= delta_omega < omega")
        if not isinstance(self.schedule, (Step, Beat)):
            raise ParameterError(f"unknown drive schedule {self.schedule!r}")
        if not isinstance(self.pumps, (TablePumps, LineshapePumps)):
            raise ParameterError(f"unknown pump mode {self.pumps!r}")
        if isinstance(self.pumps, TablePumps) and isinstance(self.schedule, Beat):
            raise ParameterError("table pump mode requires a step schedule")

    @property
    def period(self) -> float:
        return self.schedule.period

    @property
    def drive_frequency(self) -> float:
        return self.schedule.frequency

    def with_noise_scale(self, factor: float) -> "SystemParams":
        """Copy with every pump strength multiplied by ``factor``."""
        from dataclasses import replace

        if isinstance(self.pumps, TablePumps):
            return replace(self, pumps=self.pumps.scaled(factor))
        return replace(
            self,
            noise3=replace(self.noise3, w_max=self.noise3.w_max * factor),
            noise4=replace(self.noise4, w_max=self.noise4.w_max * factor),
        )

    def rescaled(self, factor: float) -> "SystemParams":
        """Copy with every rate multiplied by ``factor`` (time scaled by 1/factor)."""
        from dataclasses import replace

        sched = self.schedule
        if isinstance(sched, Step):
            sched = Step(sched.t_m / factor)
        else:
            sched = Beat(sched.omega1 * factor, sched.omega2 * factor, sched.delta_w * factor)
        pumps = self.pumps.scaled(factor) if isinstance(self.pumps, TablePumps) else self.pumps
        return replace(
            self,
            gamma22=self.gamma22 * factor,
            gamma33=self.gamma33 * factor,
            omega=self.omega * factor,
            delta_omega=self.delta_omega * factor,
            noise3=NoiseFieldConfig(self.noise3.w_max * factor, self.noise3.bandwidth * factor,
                                    self.noise3.detuning * factor),
            noise4=NoiseFieldConfig(self.noise4.w_max * factor, self.noise4.bandwidth * factor,
                                    self.noise4.detuning * factor),
            schedule=sched,
            pumps=pumps,
        )

    def fingerprint(self) -> str:
        """Short content hash identifying these parameters."""
        return hashlib.sha1(repr(self).encode()).hexdigest()[:12]


def default_noise_fields(omega: float, delta_omega: float, w_max: float,
                         bandwidth: float) -> tuple[NoiseFieldConfig, NoiseFieldConfig]:
    d31, d41 = detunings_for(omega, delta_omega)
    return NoiseFieldConfig(w_max, bandwidth, d31), NoiseFieldConfig(w_max, bandwidth, d41)


@dataclass(frozen=True)
class DressedState:
    p_plus: float
    p_minus: float
    p3: float
    p4: float
    coh: complex = 0j

    @classmethod
    def ground(cls) -> "DressedState":
        """Bare level 1, i.e. the state right after an emission."""
        return cls(0.5, 0.5, 0.0, 0.0, 0.5 + 0j)

    @classmethod
    def excited(cls) -> "DressedState":
        """Bare level 2."""
        return cls(0.5, 0.5, 0.0, 0.0, -0.5 + 0j)

    @classmethod
    def shelved(cls) -> "DressedState":
        return cls(0.0, 0.0, 0.0, 1.0, 0j)

    @classmethod
    def from_vector(cls, v) -> "DressedState":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), float(v[1]), float(v[2]), float(v[3]), complex(v[4], v[5]))

    def as_vector(self) -> np.ndarray:
        return np.array([self.p_plus, self.p_minus, self.p3, self.p4,
                         self.coh.real, self.coh.imag])

    @property
    def trace(self) -> float:
        return self.p_plus + self.p_minus + self.p3 + self.p4

    def normalized(self) -> "DressedState":
        tr = self.trace
        return DressedState(self.p_plus / tr, self.p_minus / tr, self.p3 / tr,
                            self.p4 / tr, self.coh / tr)

    def is_valid(self, conditional: bool = False, eps: float = EPS_NUM) -> bool:
        pops = (self.p_plus, self.p_minus, self.p3, self.p4)
        if min(pops) < -eps:
            return False
        if conditional:
            if not 0 < self.trace <= 1 + eps:
                return False
        elif abs(self.trace - 1) > 1e-9:
            return False
        bound = math.sqrt(max(self.p_plus, 0.0) * max(self.p_minus, 0.0))
        return abs(self.coh) <= bound + eps


def level2_population(state: DressedState) -> float:
    """Bare level-2 population, clamped at zero."""
    return max(0.0, 0.5 * (state.p_plus + state.p_minus - 2.0 * state.coh.real))


def emission_rate(state: DressedState, gamma22: float) -> float:
    """Instantaneous photon emission rate 2*gamma22*rho22."""
    return 2.0 * gamma22 * level2_population(state)


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    warnings: list
    # {"field3": (bandwidth/decay, omega/bandwidth), "field4": (...)}
    ratios: dict


def validate_params(params: SystemParams, factor: float = 3.0) -> ValidationReport:
    """Check the broadband/dressed-state regime decay << bandwidth << Omega.

    Never raises: each violated or marginal inequality is returned as a
    warning string. Level 4 decay is neglected, so field 4's decay margin is
    infinite.
    """
    warnings = []
    ratios = {}
    ok = True
    decays = {"3": params.gamma33, "4": 0.0}
    for name, noise in (("3", params.noise3), ("4", params.noise4)):
        bw = noise.bandwidth
        g = decays[name]
        lower = math.inf if g == 0 else bw / g
        upper = params.omega / bw
        ratios[f"field{name}"] = (lower, upper)
        if lower <= 1.0:
            warnings.append(f"Γ{name}{name} ≥ Δω{name}: broadband pump-rate limit violated")
        elif lower < factor:
            warnings.append(f"Δω{name}/Γ{name}{name} = {lower:.3g} is marginal (< {factor:g})")
        if upper <= 1.0:
            warnings.append(f"Δω{name} ≥ Ω: noise field cannot address a single dressed state")
        elif upper < factor:
            warnings.append(f"Ω/Δω{name} = {upper:.3g} is marginal (< {factor:g})")
        if not (lower > factor and upper > factor):
            ok = False
    return ValidationReport(ok=ok, warnings=warnings, ratios=ratios)

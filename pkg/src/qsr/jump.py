"""Quantum-jump unraveling: conditional evolution, resets and photon records.

Between emissions the state follows the non-trace-preserving conditional
equations; its trace is the probability that no photon has been emitted
yet. A jump time is found by drawing ``u`` uniformly and solving
``trace(t) = u``. After an emission on the 2->1 transition the atom is reset
to bare level 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernel
from .drive import piecewise_schedule
from .master import IM, P3, P4, PM, PP, RE, IntegrationError
from .model import DressedState, SystemParams

TICKS_PER_UNIT = 10**9
DEFAULT_BISECT_TOL = 1e-9


def conditional_generator_at(params: SystemParams, w33: float, w44: float,
                             omega_t: float) -> np.ndarray:
    """6x6 real generator of the no-emission evolution."""
    g = params.gamma22
    g33 = params.gamma33
    G = np.zeros((6, 6))
    # (g/2)(coh + coh*) = g * Re coh
    G[PP, PP] = -(2 * w33 + g)
    G[PP, RE] = g
    G[PP, P3] = 2 * w33

    G[PM, PM] = -(2 * w44 + g)
    G[PM, RE] = g
    G[PM, P4] = 2 * w44

    damp = w33 + w44 + g
    G[RE, PP] = G[RE, PM] = g / 2
    G[RE, RE] = -damp
    G[RE, IM] = omega_t / 2
    G[IM, RE] = -omega_t / 2
    G[IM, IM] = -damp

    G[P3, PP] = 2 * w33
    G[P3, P3] = -(2 * w33 + 2 * g33)

    G[P4, P3] = 2 * g33
    G[P4, PM] = 2 * w44
    G[P4, P4] = -2 * w44
    return G


@dataclass(frozen=True)
class SegmentTable:
    """Periodic table of constant conditional generators and their propagators."""

    G: np.ndarray
    P: np.ndarray
    h: np.ndarray
    nsub: np.ndarray
    starts: np.ndarray
    period: float


def segment_table(params: SystemParams, segments_per_period: int = 256) -> SegmentTable:
    pieces = piecewise_schedule(params, segments_per_period)
    K = len(pieces)
    G = np.empty((K, 6, 6))
    P = np.empty((K, 6, 6))
    h = np.empty(K)
    nsub = np.empty(K, dtype=np.int64)
    starts = np.empty(K)
    for k, (start, length, om, w33, w44) in enumerate(pieces):
        Gk = conditional_generator_at(params, w33, w44, om)
        norm = np.abs(Gk).sum(axis=1).max()
        m = max(1, math.ceil(length * norm))
        G[k] = Gk
        h[k] = length / m
        nsub[k] = m
        P[k] = scipy.linalg.expm(Gk * h[k])
        starts[k] = start
    return SegmentTable(G, P, h, nsub, starts, params.period)


def apply_jump(state: DressedState | None = None) -> DressedState:
    """State immediately after an emission: bare level 1."""
    return DressedState.ground()


@dataclass(frozen=True)
class JumpAt:
    time: float
    state: DressedState


@dataclass(frozen=True)
class Survived:
    state: DressedState


def _run(table, x0, t0, t_end, uniforms, probes=None, stop_at_first=False,
         bisect_tol=DEFAULT_BISECT_TOL, collect_after=0.0, max_jumps=None):
    probes = np.zeros(0) if probes is None else np.ascontiguousarray(probes, dtype=float)
    if max_jumps is None:
        max_jumps = len(uniforms)
    jump_times = np.empty(max_jumps)
    probe_states = np.full((len(probes), 6), np.nan)
    status, n, n_u, t_final, x = _kernel.run(
        table.G, table.P, table.h, table.nsub, table.starts, table.period,
        np.ascontiguousarray(x0, dtype=float), float(t0), float(t_end),
        np.ascontiguousarray(uniforms, dtype=float), probes, jump_times, probe_states,
        stop_at_first, bisect_tol, float(collect_after))
    if status == _kernel.TRACE_INCREASED:
        raise IntegrationError(f"conditional trace increased at t={t_final:.9g}")
    return status, jump_times[:n], probe_states, t_final, x


def evolve_no_jump(state: DressedState, params: SystemParams, t0: float, u: float,
                   horizon: float, table: SegmentTable | None = None,
                   bisect_tol: float = DEFAULT_BISECT_TOL):
    """Conditional evolution from ``t0`` until the trace falls to ``u``.

    ``horizon`` is the absolute time at which to stop if no jump occurs.
    Returns ``JumpAt(time, state)`` with the pre-jump state renormalized, or
    ``Survived(state)``.
    """
    if not 0 < u < 1:
        raise ValueError("u must lie in (0, 1)")
    if abs(state.trace - 1) > 1e-9:
        raise ValueError("evolve_no_jump requires a normalized state")
    table = table or segment_table(params)
    status, times, _, t_final, x = _run(table, state.as_vector(), t0, horizon,
                                        np.array([u]), stop_at_first=True,
                                        bisect_tol=bisect_tol, max_jumps=1)
    out = DressedState.from_vector(x)
    if len(times) == 1:
        return JumpAt(t_final, out)
    return Survived(out)


@dataclass(frozen=True, eq=False)
class PhotonRecord:
    """Emission times of one trajectory, stored as integer ticks of 1e-9/gamma22."""

    seed: int
    horizon: float
    ticks: np.ndarray = field(repr=False)
    params_hash: str = ""

    @property
    def emission_times(self) -> np.ndarray:
        return self.ticks / TICKS_PER_UNIT

    def __len__(self):
        return len(self.ticks)

    def __eq__(self, other):
        if not isinstance(other, PhotonRecord):
            return NotImplemented
        return (self.seed == other.seed and self.horizon == other.horizon
                and self.params_hash == other.params_hash
                and np.array_equal(self.ticks, other.ticks))

    def to_text(self) -> str:
        lines = [f"# seed={self.seed} horizon={self.horizon!r} params={self.params_hash} "
                 f"n={len(self.ticks)}"]
        for tick in self.ticks.tolist():
            lines.append(f"{tick // TICKS_PER_UNIT}.{tick % TICKS_PER_UNIT:09d}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "PhotonRecord":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("#"):
            raise ValueError("photon record is missing its header line")
        header = dict(item.split("=", 1) for item in lines[0][1:].split())
        ticks = []
        for line in lines[1:]:
            line = line.strip()
            if not line:
                continue
            whole, _, frac = line.partition(".")
            ticks.append(int(whole) * TICKS_PER_UNIT + int(frac.ljust(9, "0")))
        return cls(int(header["seed"]), float(header["horizon"]),
                   np.array(ticks, dtype=np.int64), header.get("params", ""))


def _to_ticks(times: np.ndarray) -> np.ndarray:
    ticks = np.round(times * TICKS_PER_UNIT).astype(np.int64)
    # keep the record strictly increasing at 1e-9 resolution
    for i in range(1, len(ticks)):
        if ticks[i] <= ticks[i - 1]:
            ticks[i] = ticks[i - 1] + 1
    return ticks


def _uniform_stream(seed: int, n: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(seed))
    # (0, 1]: a zero threshold would never be reached
    return 1.0 - rng.random(n)


def simulate_trajectory(params: SystemParams, seed: int, horizon: float,
                        burn_in: float = 0.0, table: SegmentTable | None = None,
                        bisect_tol: float = DEFAULT_BISECT_TOL) -> PhotonRecord:
    """One photon-emission record on ``[0, horizon]`` after discarding ``burn_in``.

    The atom starts in level 1 at time ``-burn_in``. Results depend only on
    ``(params, seed, bisect_tol)``.
    """
    if not horizon > 0:
        raise ValueError("horizon must be > 0")
    table = table or segment_table(params)
    total = burn_in + horizon
    n_u = int(math.ceil(1.25 * params.gamma22 * total)) + 64
    while True:
        uniforms = _uniform_stream(seed, n_u)
        try:
            status, times, _, t_final, _ = _run(table, DressedState.ground().as_vector(),
                                                0.0, total, uniforms, bisect_tol=bisect_tol,
                                                collect_after=burn_in)
        except IntegrationError as exc:
            raise IntegrationError(f"trajectory seed={seed}: {exc}") from exc
        if status == _kernel.OK:
            break
        n_u *= 2
    times = times - burn_in
    ticks = _to_ticks(times)
    ticks = ticks[(ticks > 0) & (ticks <= round(horizon * TICKS_PER_UNIT))]
    return PhotonRecord(int(seed), float(horizon), ticks, params.fingerprint())


def sample_states(params: SystemParams, seed: int, probe_times,
                  table: SegmentTable | None = None,
                  bisect_tol: float = DEFAULT_BISECT_TOL) -> np.ndarray:
    """Normalized conditional state vectors of one trajectory at ``probe_times``."""
    probes = np.sort(np.asarray(probe_times, dtype=float))
    table = table or segment_table(params)
    total = float(probes[-1])
    n_u = int(math.ceil(1.25 * params.gamma22 * total)) + 64
    while True:
        uniforms = _uniform_stream(seed, n_u)
        status, _, states, _, _ = _run(table, DressedState.ground().as_vector(), 0.0,
                                       total, uniforms, probes=probes,
                                       bisect_tol=bisect_tol)
        if status == _kernel.OK:
            return states
        n_u *= 2


def ensemble_states(params: SystemParams, n_trajectories: int, seed: int, probe_times):
    """Per-trajectory states, shape ``(n_trajectories, n_probes, 6)``."""
    table = segment_table(params)
    seeds = trajectory_seeds(seed, 0, n_trajectories)
    return np.stack([sample_states(params, s, probe_times, table) for s in seeds])


def trajectory_seeds(master_seed: int, point: int, n: int) -> list[int]:
    """Independent 64-bit trajectory seeds for sweep point ``point``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(point),))
    return [int(s) for s in ss.generate_state(n, dtype=np.uint64)]

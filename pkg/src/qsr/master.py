"""Unconditional dressed-state master equation.

Generators act on the real vector ``(p_plus, p_minus, p3, p4, Re coh, Im coh)``
for frozen coefficients (Omega(t), W33, W44).
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp
from scipy.sparse.csgraph import connected_components

from .drive import Beat, piecewise_schedule, pump_rates_at, rabi_at
from .model import DressedState, SystemParams

PP, PM, P3, P4, RE, IM = range(6)


class IntegrationError(RuntimeError):
    """Numerical propagation failed (step-size underflow, trace growth, ...)."""


class DegenerateSteadyState(ValueError):
    """The population rate graph is not irreducible."""


def generator_at(params: SystemParams, w33: float, w44: float, omega_t: float,
                 closure: str = "explicit") -> np.ndarray:
    """6x6 real generator of the unconditional dressed-state equations.

    ``closure="residual"`` builds the p4 row as minus the sum of the other
    population rows instead of writing it out.
    """
    g = params.gamma22
    g33 = params.gamma33
    src = params.coherence_source
    G = np.zeros((6, 6))
    G[PP, PP] = -(2 * w33 + g / 2)
    G[PP, PM] = g / 2
    G[PP, P3] = 2 * w33

    G[PM, PP] = g / 2
    G[PM, PM] = -(2 * w44 + g / 2)
    G[PM, P4] = 2 * w44

    G[P3, PP] = 2 * w33
    G[P3, P3] = -(2 * w33 + 2 * g33)

    if closure == "explicit":
        G[P4, P3] = 2 * g33
        G[P4, PM] = 2 * w44
        G[P4, P4] = -2 * w44
    elif closure == "residual":
        G[P4, :] = -(G[PP, :] + G[PM, :] + G[P3, :])
    else:
        raise ValueError(f"unknown closure {closure!r}")

    # d/dt coh = src*g*(p++ + p--) - (W33 + W44 + 3g/2 + i*omega/2) coh - (g/2) coh*
    damp = w33 + w44 + 1.5 * g
    G[RE, PP] = G[RE, PM] = src * g
    G[RE, RE] = -(damp + g / 2)
    G[RE, IM] = omega_t / 2
    G[IM, RE] = -omega_t / 2
    G[IM, IM] = -(damp - g / 2)
    return G


def _segment_generators(params, build):
    return [(start, length, build(params, w33, w44, om))
            for start, length, om, w33, w44 in piecewise_schedule(params)]


@lru_cache(maxsize=64)
def _expm_cached(G_bytes: bytes, dt: float) -> np.ndarray:
    G = np.frombuffer(G_bytes).reshape(6, 6)
    return scipy.linalg.expm(G * dt)


def _expm(G, dt):
    return _expm_cached(np.ascontiguousarray(G).tobytes(), float(dt))


def _piece_index(pieces, T, t):
    """Global index of the constant piece containing ``t``."""
    n = int(np.floor(t / T))
    rel = t - n * T
    starts = [p[0] for p in pieces]
    k = int(np.searchsorted(starts, rel, side="right")) - 1
    return n * len(pieces) + max(k, 0)


def _propagate_piecewise(x, params, t0, t1, build):
    """Exact exponential steps across the constant pieces of the schedule."""
    pieces = _segment_generators(params, build)
    T = params.period
    K = len(pieces)
    m = _piece_index(pieces, T, t0)
    t = t0
    while t < t1:
        start, length, G = pieces[m % K]
        end = min((m // K) * T + start + length, t1)
        if end > t:
            x = _expm(G, end - t) @ x
            t = end
        m += 1
    return x


def _propagate_adaptive(x, params, t0, t1, tol, build):
    max_step = params.period / 200.0

    def rhs(t, y):
        om = rabi_at(params.schedule, params, t)
        w33, w44 = pump_rates_at(params.pumps, params.schedule, params, t)
        return build(params, w33, w44, om) @ y

    sol = solve_ivp(rhs, (t0, t1), x, method="DOP853", rtol=tol, atol=tol,
                    max_step=max_step, first_step=None)
    if sol.status != 0:
        raise IntegrationError(f"adaptive propagation failed at t={sol.t[-1]:.6g}: {sol.message}")
    # the final step is clipped to t1 and may legitimately be short
    if len(sol.t) > 2 and np.min(np.diff(sol.t)[:-1]) < 1e-12 / params.gamma22:
        raise IntegrationError("step size underflow below 1e-12/gamma22")
    return sol.y[:, -1]


def propagate_vector(x, params: SystemParams, t0: float, t1: float, tol: float = 1e-10,
                     method: str = "auto", build=generator_at) -> np.ndarray:
    """Propagate a raw state vector from ``t0`` to ``t1``.

    ``method``: ``"expm"`` uses exact exponentials on constant pieces
    (beat schedules are cut into midpoint-frozen pieces), ``"adaptive"`` uses
    an embedded Runge-Kutta stepper with the exact time dependence, and
    ``"auto"`` picks expm for step schedules and adaptive for beat notes.
    """
    x = np.array(x, dtype=float)
    if t1 < t0:
        raise ValueError("t1 must be >= t0")
    if t1 == t0:
        return x
    if method == "auto":
        method = "adaptive" if isinstance(params.schedule, Beat) else "expm"
    if method == "expm":
        return _propagate_piecewise(x, params, t0, t1, build)
    if method == "adaptive":
        return _propagate_adaptive(x, params, t0, t1, tol, build)
    raise ValueError(f"unknown method {method!r}")


def propagate(state: DressedState, params: SystemParams, t0: float, t1: float,
              tol: float = 1e-10, method: str = "auto") -> DressedState:
    """Advance an unconditional state from ``t0`` to ``t1``."""
    return DressedState.from_vector(
        propagate_vector(state.as_vector(), params, t0, t1, tol, method))


def population_block(params: SystemParams, w33: float, w44: float) -> np.ndarray:
    return generator_at(params, w33, w44, params.omega)[:4, :4]


def steady_populations(params: SystemParams, w33: float, w44: float) -> np.ndarray:
    """Stationary (p_plus, p_minus, p3, p4) for frozen pump rates.

    Raises
    ------
    DegenerateSteadyState
        If the population rate graph is not strongly connected.
    """
    A = population_block(params, w33, w44)
    adjacency = (np.abs(A.T) > 0) & ~np.eye(4, dtype=bool)
    n_comp, _ = connected_components(adjacency, directed=True, connection="strong")
    if n_comp != 1:
        raise DegenerateSteadyState(
            f"population rate graph is reducible ({n_comp} strongly connected components); "
            "no unique steady state")
    M = A.copy()
    M[3, :] = 1.0
    rhs = np.zeros(4)
    rhs[3] = 1.0
    return np.linalg.solve(M, rhs)

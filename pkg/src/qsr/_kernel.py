"""Compiled inner loop of the quantum-jump unraveling.

The schedule is a periodic table of constant-coefficient pieces. Piece ``k``
is integrated with ``nsub[k]`` exact exponential sub-steps of length
``h[k]`` (precomputed propagators ``P[k]``). Partial sub-steps and the
jump-time search use a Taylor expansion of the same generator, which is
accurate because every sub-step satisfies ``||G|| h <= 1``.
"""
import numpy as np
from numba import njit

TAYLOR_TERMS = 26

OK = 0
NEED_MORE_UNIFORMS = 1
TRACE_INCREASED = 2
JUMP_BUFFER_FULL = 3

RESET = np.array([0.5, 0.5, 0.0, 0.0, 0.5, 0.0])


@njit(cache=True)
def _matvec(A, x, out):
    for i in range(6):
        acc = 0.0
        for j in range(6):
            acc += A[i, j] * x[j]
        out[i] = acc


@njit(cache=True)
def _taylor_terms(G, x, terms):
    """terms[m] = G^m x / m!"""
    for i in range(6):
        terms[0, i] = x[i]
    for m in range(1, TAYLOR_TERMS):
        for i in range(6):
            acc = 0.0
            for j in range(6):
                acc += G[i, j] * terms[m - 1, j]
            terms[m, i] = acc / m


@njit(cache=True)
def _taylor_eval(terms, s, out):
    for i in range(6):
        acc = 0.0
        for m in range(TAYLOR_TERMS - 1, -1, -1):
            acc = acc * s + terms[m, i]
        out[i] = acc


@njit(cache=True)
def _taylor_trace(terms, s):
    acc = 0.0
    for m in range(TAYLOR_TERMS - 1, -1, -1):
        c = terms[m, 0] + terms[m, 1] + terms[m, 2] + terms[m, 3]
        acc = acc * s + c
    return acc


@njit(cache=True)
def _trace(x):
    return x[0] + x[1] + x[2] + x[3]


@njit(cache=True)
def run(G, P, h, nsub, starts, period, x0, t0, t_end, uniforms, probes,
        jump_times, probe_states, stop_at_first, bisect_tol, collect_after):
    """Alternate no-jump evolution and resets from ``t0`` until ``t_end``.

    Returns ``(status, n_jumps, n_uniforms_used, t_final, x_final)``. Jump
    times ``>= collect_after`` are written to ``jump_times``; the normalized
    state at each probe time is written to ``probe_states``. With
    ``stop_at_first`` the loop returns at the first jump and ``x_final`` is
    the normalized state just before it.
    """
    K = G.shape[0]
    x = x0.copy()
    xn = np.empty(6)
    terms = np.empty((TAYLOR_TERMS, 6))
    n_jumps = 0
    n_u = 0
    n_probe = probes.shape[0]
    ip = 0
    while ip < n_probe and probes[ip] < t0:
        ip += 1

    if n_u >= uniforms.shape[0]:
        return NEED_MORE_UNIFORMS, n_jumps, n_u, t0, x
    u = uniforms[n_u]
    n_u += 1

    # locate (period n, piece k, sub-step j, offset off) of t0
    n = int(np.floor(t0 / period))
    rel = t0 - n * period
    k = 0
    while k < K - 1 and rel >= starts[k + 1]:
        k += 1
    j = int(np.floor((rel - starts[k]) / h[k]))
    if j >= nsub[k]:
        j = nsub[k] - 1
    off = rel - starts[k] - j * h[k]
    if off < 0.0:
        off = 0.0

    t = t0
    while True:
        step_start = n * period + starts[k] + j * h[k]
        t = step_start + off
        s_full = h[k] - off
        # next breakpoint inside this sub-step
        bp = step_start + h[k]
        at_probe = False
        at_end = False
        if ip < n_probe and probes[ip] <= bp:
            bp = probes[ip]
            at_probe = True
        if t_end <= bp:
            if t_end < bp or not at_probe:
                at_probe = False
            bp = t_end
            at_end = True
        s = bp - t
        if s < 0.0:
            s = 0.0
        full_step = (off == 0.0) and (not at_probe) and (not at_end)
        full_step = full_step or (s >= s_full and off == 0.0)
        tr_old = _trace(x)
        if s > 0.0:
            if full_step:
                _matvec(P[k], x, xn)
            else:
                _taylor_terms(G[k], x, terms)
                _taylor_eval(terms, s, xn)
        else:
            for i in range(6):
                xn[i] = x[i]
        tr_new = _trace(xn)
        if tr_new > tr_old * (1.0 + 1e-10) + 1e-300:
            return TRACE_INCREASED, n_jumps, n_u, t, x

        if tr_new <= u:
            # jump inside [t, t + s]: bisect the trace on the Taylor series
            _taylor_terms(G[k], x, terms)
            lo = 0.0
            hi = s
            while hi - lo > bisect_tol:
                mid = 0.5 * (lo + hi)
                if _taylor_trace(terms, mid) > u:
                    lo = mid
                else:
                    hi = mid
            tau = hi
            t_jump = t + tau
            if stop_at_first:
                _taylor_eval(terms, tau, xn)
                tr = _trace(xn)
                for i in range(6):
                    xn[i] /= tr
                return OK, 1, n_u, t_jump, xn
            if t_jump >= collect_after:
                if n_jumps >= jump_times.shape[0]:
                    return JUMP_BUFFER_FULL, n_jumps, n_u, t_jump, x
                jump_times[n_jumps] = t_jump
                n_jumps += 1
            for i in range(6):
                x[i] = RESET[i]
            if n_u >= uniforms.shape[0]:
                return NEED_MORE_UNIFORMS, n_jumps, n_u, t_jump, x
            u = uniforms[n_u]
            n_u += 1
            off += tau
            if off >= h[k]:
                off = 0.0
                j += 1
                if j >= nsub[k]:
                    j = 0
                    k += 1
                    if k >= K:
                        k = 0
                        n += 1
            continue

        for i in range(6):
            x[i] = xn[i]
        if at_probe:
            tr = _trace(x)
            for i in range(6):
                probe_states[ip, i] = x[i] / tr
            ip += 1
            off += s
            # several probes may share one instant
            if not at_end and off < h[k]:
                continue
        if at_end:
            # probes at exactly t_end
            while ip < n_probe and probes[ip] <= t_end:
                tr = _trace(x)
                for i in range(6):
                    probe_states[ip, i] = x[i] / tr
                ip += 1
            tr = _trace(x)
            for i in range(6):
                x[i] /= tr
            return OK, n_jumps, n_u, t_end, x
        # advance to the next sub-step
        off = 0.0
        j += 1
        if j >= nsub[k]:
            j = 0
            k += 1
            if k >= K:
                k = 0
                n += 1
        # renormalize at piece boundaries to keep the trace well scaled
        if j == 0:
            tr = _trace(x)
            if tr < 1e-100:
                for i in range(6):
                    x[i] /= tr
                u /= tr

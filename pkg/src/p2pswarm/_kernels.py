"""JIT-compiled inner loops of the exact simulators.

Random numbers are supplied by the caller in buffers so the stream
discipline stays with numpy's counter-based generators; a kernel returns
``NEED_RANDOMS`` when its buffer runs dry and is simply called again.
"""

import math

import numpy as np
from numba import njit

RUNNING = 0
HORIZON = 1
ABSORBED = 2
EVENT_CAP = 3
NEED_RANDOMS = 4
OUT_FULL = 5


@njit(cache=False, nogil=True)
def _rates(xe, coef, i1, i2, owner, rates):
    rates[:] = 0.0
    for m in range(coef.shape[0]):
        rates[owner[m]] += coef[m] * xe[i1[m]] * xe[i2[m]]
    total = 0.0
    for k in range(rates.shape[0]):
        total += rates[k]
    return total


@njit(cache=False, nogil=True)
def ssa_run(xe, t, t_max, n_done, max_events, uniforms, coef, i1, i2, owner, zeta,
            out_t, out_j):
    """Direct-method SSA.  ``xe`` is the state with a trailing constant 1 and
    is updated in place.  Returns ``(t, n_out, n_done, status)``."""
    K = zeta.shape[0]
    d = zeta.shape[1]
    rates = np.empty(K)
    k = 0
    n_out = 0
    while True:
        total = _rates(xe, coef, i1, i2, owner, rates)
        if total <= 0.0:
            return t, n_out, n_done, ABSORBED
        if n_done >= max_events:
            return t, n_out, n_done, EVENT_CAP
        if k + 2 > uniforms.shape[0]:
            return t, n_out, n_done, NEED_RANDOMS
        if n_out >= out_t.shape[0]:
            return t, n_out, n_done, OUT_FULL
        dt = -math.log(uniforms[k]) / total
        t_next = t + dt
        if t_next > t_max:
            return t_max, n_out, n_done, HORIZON
        target = uniforms[k + 1] * total
        k += 2
        acc = 0.0
        j = -1
        for q in range(K):
            if rates[q] > 0.0:
                j = q
                acc += rates[q]
                if acc > target:
                    break
        for c in range(d):
            xe[c] += zeta[j, c]
        t = t_next
        out_t[n_out] = t
        out_j[n_out] = j
        n_out += 1
        n_done += 1


@njit(cache=False, nogil=True)
def time_change_run(xe, t, t_max, n_done, max_events, internal, next_fire, exps, coef, i1, i2,
                    owner, zeta, out_t, out_j):
    """Random-time-change representation: one unit-rate Poisson clock per
    jump, run on its integrated-rate scale (``internal``) with next firing
    level ``next_fire``.  Consumes one unit exponential per event."""
    K = zeta.shape[0]
    d = zeta.shape[1]
    rates = np.empty(K)
    k = 0
    n_out = 0
    while True:
        total = _rates(xe, coef, i1, i2, owner, rates)
        if total <= 0.0:
            return t, n_out, n_done, k, ABSORBED
        if n_done >= max_events:
            return t, n_out, n_done, k, EVENT_CAP
        if k + 1 > exps.shape[0]:
            return t, n_out, n_done, k, NEED_RANDOMS
        if n_out >= out_t.shape[0]:
            return t, n_out, n_done, k, OUT_FULL
        j = -1
        best = math.inf
        for q in range(K):
            if rates[q] > 0.0:
                wait = (next_fire[q] - internal[q]) / rates[q]
                if wait < best:
                    best = wait
                    j = q
        if t + best > t_max:
            for q in range(K):
                internal[q] += rates[q] * (t_max - t)
            return t_max, n_out, n_done, k, HORIZON
        for q in range(K):
            internal[q] += rates[q] * best
        internal[j] = next_fire[j]
        next_fire[j] += exps[k]
        k += 1
        for c in range(d):
            xe[c] += zeta[j, c]
        t += best
        out_t[n_out] = t
        out_j[n_out] = j
        n_out += 1
        n_done += 1

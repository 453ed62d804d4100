"""Deterministic fluid limit of the swarm: vector field, Jacobian, ODE
integration and the closed-form solutions of the small cases."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from . import _rk
from ._rk import IntegrationError, IntegratorStats
from .labels import bits, mask_relates, mask_subset, popcount
from .model import JumpSet, ModelParams

__all__ = [
    "IntegrationError",
    "FluidTrajectory",
    "PhiPsi",
    "phi_psi",
    "vector_field",
    "field_component",
    "drift_oracle",
    "jacobian",
    "integrate",
    "closed_form_logistic",
    "sir_integral",
    "sir_final_size",
    "closed_form_case1",
]

RTOL = 1e-9
ATOL = 1e-12
TOL_NEG = 1e-10


class PhiPsi(NamedTuple):
    phi_d: float
    phi_s: float
    psi_d: float
    psi_s: Optional[float]


def phi_psi(params: ModelParams, x: Sequence[float], a: int, b: int | None = None) -> PhiPsi:
    """Peer counts an A-peer can download from / swap with, and counts of
    peers that can turn into A by a download / by a swap with a B-peer.

    The download-source count runs over strict supersets of A.
    """
    size = params.size
    phi_d = sum(x[c] for c in range(size) if c != a and mask_subset(a, c))
    phi_s = sum(x[c] for c in range(size) if not mask_relates(a, c))
    psi_d = sum(x[a ^ bit] for bit in bits(a))
    psi_s = None if b is None else sum(x[a ^ bit] for bit in bits(a & b))
    return PhiPsi(phi_d, phi_s, psi_d, psi_s)


def field_component(params: ModelParams, x: Sequence[float], a: int) -> float:
    """``v^A(x)`` evaluated term by term from the φ/ψ counts (slow reference path)."""
    size = params.size
    pp = phi_psi(params, x, a)
    v = params.alpha[a] - x[a] * (params.beta * pp.phi_d + params.gamma * pp.phi_s)
    for b in range(size):
        denom = 1 + popcount(b & ~a)
        if mask_subset(a, b):
            v += params.beta * pp.psi_d * x[b] / denom
        elif params.gamma:
            v += params.gamma * phi_psi(params, x, a, b).psi_s * x[b] / denom
    if a == params.full:
        v -= params.delta * x[a]
    return v


class _Field:
    """The vector field expanded into quadratic monomials ``coef * x[i] * x[j]``
    attached to output component ``target``."""

    def __init__(self, params: ModelParams):
        size = params.size
        beta, gamma = params.beta, params.gamma
        target, coef, ii, jj = [], [], [], []

        def term(t, c, i, j):
            target.append(t)
            coef.append(c)
            ii.append(i)
            jj.append(j)

        for a in range(size):
            for b in range(size):
                sub = mask_subset(a, b)
                denom = 1 + popcount(b & ~a)
                if sub:
                    if b != a:
                        term(a, -beta, a, b)
                    for bit in bits(a):
                        term(a, beta / denom, a ^ bit, b)
                elif gamma > 0:
                    if not mask_relates(a, b):
                        term(a, -gamma, a, b)
                    for bit in bits(a & b):
                        term(a, gamma / denom, a ^ bit, b)
        self.size = size
        self.full = params.full
        self.alpha = params.alpha_array
        self.delta = params.delta
        self.target = np.array(target, dtype=np.int64)
        self.coef = np.array(coef)
        self.i = np.array(ii, dtype=np.int64)
        self.j = np.array(jj, dtype=np.int64)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        prod = self.coef * x[self.i] * x[self.j]
        v = self.alpha + np.bincount(self.target, prod, minlength=self.size)
        v[self.full] -= self.delta * x[self.full]
        return v

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        J = np.zeros((self.size, self.size))
        np.add.at(J, (self.target, self.i), self.coef * x[self.j])
        np.add.at(J, (self.target, self.j), self.coef * x[self.i])
        J[self.full, self.full] -= self.delta
        return J


@lru_cache(maxsize=64)
def _field(params: ModelParams) -> _Field:
    return _Field(params)


def vector_field(params: ModelParams, x: Sequence[float]) -> np.ndarray:
    return _field(params)(np.asarray(x, dtype=float))


def jacobian(params: ModelParams, x: Sequence[float]) -> np.ndarray:
    """Exact Jacobian ``Dv(x)``; entries are affine in ``x``."""
    return _field(params).jacobian(np.asarray(x, dtype=float))


def drift_oracle(params: ModelParams, jumps: JumpSet, x: Sequence[float]) -> np.ndarray:
    """``sum_zeta zeta * Q_zeta(x)`` summed jump by jump over the transition list."""
    x = list(map(float, x))
    out = np.zeros(params.size)
    for jv in jumps:
        r = jv.rate(x)
        if r:
            for m, d in jv.changes:
                out[m] += d * r
    return out


@dataclass(frozen=True)
class FluidTrajectory:
    times: np.ndarray
    states: np.ndarray
    stats: IntegratorStats
    dense: _rk.DenseSolution

    def at(self, t) -> np.ndarray:
        return self.dense(t)

    @property
    def final(self) -> np.ndarray:
        return self.dense.y_end


def integrate(
    params: ModelParams,
    x0: Sequence[float],
    T: float,
    t_eval: Sequence[float] | None = None,
    rtol: float = RTOL,
    atol: float = ATOL,
    tol_neg: float = TOL_NEG,
) -> FluidTrajectory:
    """Solve ``x' = v(x)`` on ``[0, T]``; ``t_eval`` selects the output grid."""
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (params.size,):
        raise ValueError(f"initial state needs {params.size} entries")
    if x0.min() < 0:
        raise ValueError("initial state must be nonnegative")
    if not T > 0:
        raise ValueError("horizon must be positive")
    field = _field(params)
    sol = _rk.solve(lambda t, y: field(y), x0, 0.0, T, rtol=rtol, atol=atol,
                    t_eval=t_eval, tol_neg=tol_neg)
    return FluidTrajectory(sol.t, sol.y, sol.stats, sol.dense)


# --------------------------------------------------------------------------
# Closed forms for n = 1 and n = 2


def closed_form_logistic(x0, beta, t):
    """Fraction of have-nothing peers in the closed conservative single-chunk swarm."""
    x0 = np.asarray(x0, dtype=float)
    if np.any((x0 < 0) | (x0 > 1)):
        raise ValueError("x0 must lie in [0, 1]")
    decay = np.exp(-beta * np.asarray(t, dtype=float))
    return x0 * decay / (x0 * decay + (1 - x0))


def sir_integral(x, x0, y0, beta, delta):
    """Seed density on the orbit of the closed dissipative single-chunk swarm
    through ``(x0, y0)``, as a function of the have-nothing density ``x``."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0) or x0 <= 0:
        raise ValueError("x and x0 must be positive")
    return (x0 + y0) + (delta / beta) * np.log(x / x0) - x


def sir_final_size(x0: float, y0: float, beta: float, delta: float) -> float:
    """Limit ``x*`` of the have-nothing density, the root of the orbit at y = 0."""
    if y0 <= 0:
        return x0
    g = lambda x: float(sir_integral(x, x0, y0, beta, delta))
    lo = x0
    while g(lo) > 0:
        lo *= 0.5
        if lo < 1e-300:
            raise ValueError("final size below representable range")
    return brentq(g, lo, x0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def closed_form_case1(x0, u0, w0, beta, t):
    """``(x, u, w)`` for two chunks, no swaps, closed conservative swarm with
    ``x0 + u0 + w0 = 1``; ``u`` is the combined one-chunk density."""
    if w0 <= 0:
        raise ValueError("w0 must be positive")
    if not math.isclose(x0 + u0 + w0, 1.0, rel_tol=0, abs_tol=1e-12):
        raise ValueError("x0 + u0 + w0 must equal 1")
    t = np.asarray(t, dtype=float)
    x = closed_form_logistic(x0, beta, t)
    # divide numerator and denominator by e^{beta t} to stay finite for large t
    decay = np.exp(-beta * t)
    num = x0 * decay + (1 - x0)
    w = num / (num + (x0 * beta * t + (1 - w0) / w0) * decay)
    return x, 1 - x - w, w

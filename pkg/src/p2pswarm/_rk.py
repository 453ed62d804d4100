"""Adaptive Dormand-Prince 5(4) integrator with quartic dense output."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

# Dormand & Prince (1980) tableau; dense-output matrix from Shampine (1986).
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([-71 / 57600, 0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class IntegratorStats:
    steps: int
    rejected: int
    nfev: int
    clamped: int
    rtol: float
    atol: float


class DenseSolution:
    """Piecewise quartic interpolant over the accepted steps."""

    def __init__(self, t0s: np.ndarray, hs: np.ndarray, y0s: np.ndarray, qs: np.ndarray,
                 t_end: float, y_end: np.ndarray):
        self.t0s = t0s
        self.hs = hs
        self.y0s = y0s
        self.qs = qs  # (steps, dim, 4)
        self.t_end = t_end
        self.y_end = y_end

    @property
    def t_start(self) -> float:
        return float(self.t0s[0]) if len(self.t0s) else self.t_end

    def __call__(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if len(self.t0s) == 0:
            out = np.broadcast_to(self.y_end, t.shape + self.y_end.shape).copy()
            return out[0] if scalar else out
        if np.any(t < self.t_start - 1e-12 * max(1.0, abs(self.t_start))) or np.any(
            t > self.t_end + 1e-12 * max(1.0, abs(self.t_end))
        ):
            raise ValueError("dense output requested outside the integrated interval")
        idx = np.clip(np.searchsorted(self.t0s, t, side="right") - 1, 0, len(self.t0s) - 1)
        theta = (t - self.t0s[idx]) / self.hs[idx]
        powers = np.stack([theta, theta**2, theta**3, theta**4], axis=-1)
        out = self.y0s[idx] + self.hs[idx][:, None] * np.einsum("kdp,kp->kd", self.qs[idx], powers)
        at_end = t >= self.t_end
        out[at_end] = self.y_end
        return out[0] if scalar else out


@dataclass
class Solution:
    t: np.ndarray
    y: np.ndarray
    dense: DenseSolution
    stats: IntegratorStats


def _initial_step(f, t0, y0, f0, rtol, atol, direction=1.0):
    scale = atol + np.abs(y0) * rtol
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = f(t0 + h0 * direction, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def solve(
    f: Callable[[float, np.ndarray], np.ndarray],
    y0,
    t0: float,
    t1: float,
    rtol: float = 1e-9,
    atol: float = 1e-12,
    t_eval=None,
    tol_neg: float | None = None,
    max_steps: int = 10_000_000,
) -> Solution:
    """Integrate ``y' = f(t, y)`` from ``t0`` to ``t1``.

    With ``tol_neg`` set, accepted states are checked for negative entries:
    excursions down to ``-tol_neg`` are clamped to zero (and counted), deeper
    ones raise :class:`IntegrationError`.
    """
    y = np.array(y0, dtype=float)
    if t1 < t0:
        raise ValueError("t1 must not precede t0")
    dim = y.size
    t = float(t0)
    t0s, hs, y0s, qs = [], [], [], []
    steps = rejected = clamped = 0
    nfev = 0
    if t1 == t0:
        dense = DenseSolution(np.empty(0), np.empty(0), np.empty((0, dim)), np.empty((0, dim, 4)), t, y.copy())
        tt = np.atleast_1d(np.asarray(t_eval if t_eval is not None else [t0], dtype=float))
        return Solution(tt, dense(tt), dense, IntegratorStats(0, 0, 0, 0, rtol, atol))

    fy = f(t, y)
    nfev += 1
    h = _initial_step(f, t, y, fy, rtol, atol)
    nfev += 1
    K = np.empty((7, dim))
    while t < t1:
        if steps >= max_steps:
            raise IntegrationError(f"step limit {max_steps} reached at t={t}")
        min_h = 10 * np.finfo(float).eps * max(abs(t), 1.0)
        h = min(h, t1 - t)
        while True:
            if h < min_h:
                raise IntegrationError(f"step size underflow at t={t}")
            K[0] = fy
            for s in range(1, 6):
                dy = np.dot(_A[s], K[:s]) * h
                K[s] = f(t + _C[s] * h, y + dy)
            y_new = y + h * (_B @ K[:6])
            K[6] = f(t + h, y_new)
            nfev += 6
            err_vec = h * (_E @ K)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = np.sqrt(np.mean((err_vec / scale) ** 2))
            if err <= 1.0:
                break
            rejected += 1
            h *= max(MIN_FACTOR, SAFETY * err ** (-1 / 5))
        t_new = t + h if t1 - (t + h) > min_h else t1
        q = K.T @ _P
        t0s.append(t)
        hs.append(t_new - t)
        y0s.append(y.copy())
        qs.append(q)
        steps += 1
        fy = K[6].copy()
        if tol_neg is not None and y_new.min() < 0:
            if y_new.min() < -tol_neg:
                raise IntegrationError(
                    f"state left the nonnegative orthant by {-y_new.min():.3g} at t={t_new}"
                )
            clamped += int((y_new < 0).sum())
            y_new = np.clip(y_new, 0, None)
            fy = f(t_new, y_new)
            nfev += 1
        t, y = t_new, y_new
        factor = MAX_FACTOR if err == 0 else min(MAX_FACTOR, SAFETY * err ** (-1 / 5))
        h *= factor

    dense = DenseSolution(np.array(t0s), np.array(hs), np.array(y0s), np.array(qs), t, y.copy())
    if t_eval is None:
        tt = np.append(np.array(t0s), t)
        yy = np.vstack([np.array(y0s), y])
    else:
        tt = np.asarray(t_eval, dtype=float)
        yy = dense(tt)
    stats = IntegratorStats(steps, rejected, nfev, clamped, rtol, atol)
    return Solution(tt, yy, dense, stats)

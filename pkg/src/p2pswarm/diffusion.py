"""Gaussian fluctuations about the fluid path: Euler-Maruyama paths of the
linear SDE, its exact moment equations, and empirical fluctuations of the
scaled chain."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _rk
from .fluid import RTOL, ATOL, FluidTrajectory, integrate, jacobian, vector_field
from .labels import format_label
from .model import JumpSet, ModelParams, build_jump_set
from .stochastic import (
    SimConfig,
    largest_remainder_round,
    replica_rng,
    run_replicas,
    simulate_ssa,
)

DEFAULT_DT_FRACTION = 1e-3


def _default_grid(T: float, k: int = 10) -> np.ndarray:
    return np.linspace(0.0, T, k + 1)


def _noise_matrix(jumps: JumpSet) -> np.ndarray:
    return jumps.zeta.astype(float)


@dataclass
class MomentStats:
    """Per-time ensemble (or exact) first and second moments of ``Y``."""

    t: np.ndarray
    mean: np.ndarray  # (G, d)
    cov: np.ndarray  # (G, d, d)
    cov_se: np.ndarray | None = None  # standard errors of the covariance entries
    n_paths: int = 0

    def to_csv(self, path, n: int) -> None:
        write_covariance_csv(path, self.t, self.cov, n)


def write_covariance_csv(path, t: np.ndarray, cov: np.ndarray, n: int) -> None:
    """One row per (time, label pair) with the covariance entry."""
    d = cov.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "label_i", "label_j", "cov"])
        for g, tt in enumerate(t):
            for i in range(d):
                for j in range(d):
                    w.writerow([repr(float(tt)), format_label(i, n), format_label(j, n), repr(float(cov[g, i, j]))])


def ensemble_moments(t: np.ndarray, samples: np.ndarray) -> MomentStats:
    """Sample mean, covariance and covariance standard errors from
    ``samples`` of shape ``(G, P, d)``."""
    G, P, d = samples.shape
    if P < 2:
        raise ValueError("need at least two samples")
    mean = samples.mean(axis=1)
    c = samples - mean[:, None, :]
    prods = c[:, :, :, None] * c[:, :, None, :]
    cov = prods.sum(axis=1) / (P - 1)
    se = prods.std(axis=1, ddof=1) / math.sqrt(P)
    cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    return MomentStats(np.asarray(t, dtype=float), mean, cov, se, P)


def simulate_diffusion(
    params: ModelParams,
    jumps: JumpSet,
    x0: Sequence[float],
    T: float,
    n_paths: int,
    dt: float | None = None,
    seed: int = 0,
    t_grid: Sequence[float] | None = None,
    fluid: FluidTrajectory | None = None,
    replica: int = 0,
) -> MomentStats:
    """Euler-Maruyama ensemble of ``dY = Dv(x_t) Y dt + sum_zeta zeta sqrt(Q_zeta(x_t)) dW_zeta``
    started at ``Y_0 = 0``; statistics are reported at the step times
    nearest to ``t_grid``."""
    if dt is None:
        dt = DEFAULT_DT_FRACTION * T
    if not dt > 0:
        raise ValueError("dt must be positive")
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    if not T > 0:
        raise ValueError("T must be positive")
    n_steps = max(1, int(math.ceil(T / dt - 1e-9)))
    h = T / n_steps
    if fluid is None:
        fluid = integrate(params, x0, T)
    grid = _default_grid(T) if t_grid is None else np.asarray(t_grid, dtype=float)
    if np.any(grid < 0) or np.any(grid > T * (1 + 1e-12)):
        raise ValueError("t_grid must lie in [0, T]")
    rec_steps = np.unique(np.rint(grid / h).astype(np.int64))
    zeta = _noise_matrix(jumps)
    d = params.size
    rng = replica_rng(seed, replica)
    Y = np.zeros((n_paths, d))
    out = np.empty((len(rec_steps), n_paths, d))
    times = np.linspace(0.0, T, n_steps + 1)
    xs = fluid.at(times)
    sq = math.sqrt(h)
    r = 0
    for k in range(n_steps + 1):
        if r < len(rec_steps) and rec_steps[r] == k:
            out[r] = Y
            r += 1
        if k == n_steps:
            break
        x = xs[k]
        J = jacobian(params, x)
        amp = np.sqrt(np.clip(jumps.rates(x), 0, None))
        dW = rng.standard_normal((n_paths, len(amp))) * sq
        Y = Y + h * (Y @ J.T) + (dW * amp) @ zeta
    return ensemble_moments(rec_steps * h, out)


def moment_odes(
    params: ModelParams,
    jumps: JumpSet,
    x0: Sequence[float],
    T: float,
    t_grid: Sequence[float] | None = None,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> MomentStats:
    """Exact mean and covariance of the linear SDE from ``Y_0 = 0``, integrated
    jointly with the fluid path: ``m' = Dv m`` and
    ``S' = Dv S + S Dv^T + sum_zeta zeta zeta^T Q_zeta``."""
    x0 = np.asarray(x0, dtype=float)
    d = params.size
    zeta = _noise_matrix(jumps)

    def rhs(t, y):
        x = y[:d]
        m = y[d:2 * d]
        S = y[2 * d:].reshape(d, d)
        J = jacobian(params, x)
        q = jumps.rates(np.clip(x, 0, None))
        dS = J @ S + S @ J.T + (zeta.T * q) @ zeta
        return np.concatenate([vector_field(params, x), J @ m, dS.ravel()])

    y0 = np.concatenate([x0, np.zeros(d), np.zeros(d * d)])
    grid = _default_grid(T) if t_grid is None else np.asarray(t_grid, dtype=float)
    sol = _rk.solve(rhs, y0, 0.0, T, rtol=rtol, atol=atol, t_eval=grid)
    mean = sol.y[:, d:2 * d]
    cov = sol.y[:, 2 * d:].reshape(-1, d, d)
    cov = 0.5 * (cov + np.swapaxes(cov, 1, 2))
    return MomentStats(grid, mean, cov)


@dataclass
class FluctuationSample:
    t_grid: np.ndarray
    mean: np.ndarray
    cov: np.ndarray
    N: int
    n_replicas: int

    def to_csv(self, path, n: int) -> None:
        write_covariance_csv(path, self.t_grid, self.cov, n)


def empirical_fluctuations(
    params: ModelParams,
    x0: Sequence[float],
    N: int,
    n_replicas: int,
    t_grid: Sequence[float],
    seed: int = 0,
    workers: int = 1,
) -> FluctuationSample:
    """Moments of ``sqrt(N) (X_{N,t}/N - x_t)`` over SSA replicas of the
    ``N``-scaled chain.

    The chain starts from the largest-remainder rounding of ``N x0`` and the
    fluid path from that rounded density, so the fluctuation is exactly zero
    at time 0.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) == 0 or np.any(np.diff(t_grid) < 0) or t_grid[0] < 0:
        raise ValueError("t_grid must be a nonempty increasing sequence of nonnegative times")
    T = float(t_grid[-1])
    counts = largest_remainder_round(N * np.asarray(x0, dtype=float))
    start = counts / N
    fluid_x = integrate(params, start, T).at(t_grid) if T > 0 else np.tile(start, (len(t_grid), 1))
    pN = params.scaled(N)
    jumps = build_jump_set(pN)
    cfg = SimConfig(seed=seed, t_max=max(T, 1e-300), record="events")

    def one(r: int) -> np.ndarray:
        traj = simulate_ssa(pN, jumps, counts, cfg, replica=r)
        idx = np.searchsorted(traj.times, t_grid, side="right") - 1
        return math.sqrt(N) * (traj.states[idx] / N - fluid_x)

    samples = np.stack(run_replicas(one, n_replicas, workers), axis=1)
    stats = ensemble_moments(t_grid, samples)
    return FluctuationSample(t_grid, stats.mean, stats.cov, int(N), int(n_replicas))

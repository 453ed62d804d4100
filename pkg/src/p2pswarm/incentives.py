"""Does splitting the file into two chunks help?  Equilibrium population of a
one-chunk swarm against a two-chunk swarm with swaps, plus a steady-state
check of Little's law on simulated peers."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from .model import ModelParams
from .stochastic import SimConfig, simulate_agents

LAMBDA_SCAN_CAP = 1e6  # in units of delta
LAMBDA_SCAN_FLOOR = 1e-12
N_BATCHES = 20
MIN_SOJOURNS = 100


class InsufficientData(RuntimeError):
    pass


def _positive(**kw) -> None:
    for name, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise ValueError(f"{name} must be positive and finite, got {v}")


def q_coefficients(lam, beta_t, gamma_t, delta) -> tuple[float, float]:
    """``(b, c)`` with ``q(u) = u^2 + b u - c``."""
    return 2 * beta_t * lam / (gamma_t * delta), 2 * lam / gamma_t


def q_value(u, lam, beta_t, gamma_t, delta) -> float:
    b, c = q_coefficients(lam, beta_t, gamma_t, delta)
    return u * u + b * u - c


def q_root(lam: float, beta_t: float, gamma_t: float, delta: float) -> float:
    """Positive root of ``q``: the combined one-chunk density of the split swarm."""
    _positive(lam=lam, beta_t=beta_t, gamma_t=gamma_t, delta=delta)
    b, c = q_coefficients(lam, beta_t, gamma_t, delta)
    return 2 * c / (b + math.sqrt(b * b + 4 * c))


def q_tilde_coefficients(lam, beta, beta_t, delta) -> tuple[float, float]:
    """``(p, c)`` with ``q~(u) = u^2 - p u - c``."""
    return delta / beta - lam / delta, lam / beta - lam / beta_t


def q_tilde_value(u, lam, beta, beta_t, delta) -> float:
    p, c = q_tilde_coefficients(lam, beta, beta_t, delta)
    return u * u - p * u - c


def q_tilde_root(lam: float, beta: float, beta_t: float, delta: float) -> float | None:
    """Positive root of ``q~``, or ``None`` when there is none (only possible
    for ``beta_t == beta`` with ``delta/beta <= lam/delta``)."""
    _positive(lam=lam, beta=beta, beta_t=beta_t, delta=delta)
    if beta_t < beta:
        raise ValueError("requires beta_t >= beta")
    p, c = q_tilde_coefficients(lam, beta, beta_t, delta)
    if c > 0:
        disc = math.sqrt(p * p + 4 * c)
        return (p + disc) / 2 if p >= 0 else 2 * c / (disc - p)
    return p if p > 0 else None


class SystemSummary(NamedTuple):
    x_star: list
    norm: float
    mean_acquisition_time: float


@dataclass
class ComparisonReport:
    lam: float
    beta: float
    delta: float
    beta_t: float
    gamma_t: float
    baseline: SystemSummary
    split: SystemSummary
    u: float
    u_tilde: float | None
    improved: bool
    improved_by_criterion: bool | None
    routes_agree: bool | None
    status: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["baseline"] = self.baseline._asdict()
        d["split"] = self.split._asdict()
        return d


def mean_acquisition_time(norm: float, lam: float, delta: float) -> float:
    """Mean time from arrival to holding the whole file (Little's law on the
    whole population minus the mean seeding time)."""
    return norm / lam - 1 / delta


def compare_systems(lam: float, beta: float, delta: float, beta_t: float, gamma_t: float) -> ComparisonReport:
    """Compare the equilibrium population of the one-chunk swarm ``(lam, beta,
    delta)`` with that of the two-chunk swarm ``(lam, beta_t, gamma_t, delta)``.

    ``improved`` comes from the two population norms directly; when
    ``beta_t >= beta`` it is recomputed from the root criterion ``u < u~`` and
    the agreement of both routes is recorded.
    """
    from .equilibria import equilibrium_n2_open

    _positive(lam=lam, beta=beta, delta=delta, beta_t=beta_t, gamma_t=gamma_t)
    x_star = [delta / beta, lam / delta]
    norm = sum(x_star)
    x_split = equilibrium_n2_open(lam, beta_t, gamma_t, delta)
    norm_split = float(x_split.sum())
    u = q_root(lam, beta_t, gamma_t, delta)
    improved = bool(norm > norm_split)
    if beta_t >= beta:
        u_tilde = q_tilde_root(lam, beta, beta_t, delta)
        by_crit = bool(u_tilde is not None and u < u_tilde)
        agree = by_crit == improved
        status = "ok" if u_tilde is not None else "no improvement region"
    else:
        u_tilde, by_crit, agree = None, None, None
        status = "beta_t < beta: criterion not applicable"
    return ComparisonReport(
        lam, beta, delta, beta_t, gamma_t,
        SystemSummary(x_star, norm, mean_acquisition_time(norm, lam, delta)),
        SystemSummary(x_split.tolist(), norm_split, mean_acquisition_time(norm_split, lam, delta)),
        u, u_tilde, improved, by_crit, agree, status,
    )


def improves(lam: float, beta: float, delta: float, beta_t: float, gamma_t: float) -> bool:
    """``u < u~``, evaluated as ``q(u~) > 0`` (q is increasing past its root)."""
    ut = q_tilde_root(lam, beta, beta_t, delta)
    return bool(ut is not None and q_value(ut, lam, beta_t, gamma_t, delta) > 0)


class ThresholdAnomaly(RuntimeError):
    """Splitting does not help even for the smallest arrival rate scanned."""


def lambda_threshold(beta: float, delta: float, beta_t: float, gamma_t: float,
                     cap: float = LAMBDA_SCAN_CAP, rel_tol: float = 1e-12) -> float:
    """Arrival rate below which splitting the file reduces the population.

    Scans ``lam`` upward geometrically from ``1e-12 * delta`` and bisects the
    first interval on which the improvement predicate turns false.  Returns
    ``inf`` when no such interval exists below ``cap * delta``.
    """
    _positive(beta=beta, delta=delta, beta_t=beta_t, gamma_t=gamma_t)
    if beta_t < beta:
        raise ValueError("requires beta_t >= beta")
    pred = lambda lam: improves(lam, beta, delta, beta_t, gamma_t)
    lo = LAMBDA_SCAN_FLOOR * delta
    if not pred(lo):
        raise ThresholdAnomaly(f"no improvement at lam={lo:.3g}")
    hi = lo
    while True:
        hi = 2 * lo
        if hi > cap * delta:
            return math.inf
        if not pred(hi):
            break
        lo = hi
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            lo = mid
        else:
            hi = mid
    return lo


# --------------------------------------------------------------------------
# Little's law


@dataclass
class LittleReport:
    lhs: float
    rhs: float
    rel_err: float
    lhs_halfwidth: float
    rhs_halfwidth: float
    n_sojourns: int
    n_events: int

    def as_tuple(self) -> tuple[float, float, float]:
        return self.lhs, self.rhs, self.rel_err

    def to_dict(self) -> dict:
        return asdict(self)


def time_average(times: np.ndarray, values: np.ndarray, t0: float, t1: float) -> float:
    """Average over ``[t0, t1]`` of the right-continuous step function that
    takes ``values[i]`` on ``[times[i], times[i+1])``."""
    ends = np.append(times[1:], max(t1, times[-1]))
    lo = np.clip(times, t0, t1)
    hi = np.clip(ends, t0, t1)
    return float(np.sum(values * (hi - lo)) / (t1 - t0))


def _halfwidth(batches: np.ndarray) -> float:
    # 95% normal-approximation half-width of the batch-means estimator
    return float(1.96 * batches.std(ddof=1) / math.sqrt(len(batches)))


def littles_law_check(
    params: ModelParams,
    x0,
    cfg: SimConfig,
    burn_in_fraction: float = 0.5,
    label: int = 0,
    replica: int = 0,
) -> LittleReport:
    """Compare the stationary mean number of peers holding at least ``label``
    with ``alpha^label`` times the mean sojourn of peers arriving as ``label``.

    Only peers that arrived after the burn-in and left before the horizon
    enter the sojourn mean.
    """
    if not 0 <= burn_in_fraction < 1:
        raise ValueError("burn_in_fraction must lie in [0, 1)")
    if not 0 <= label < params.size:
        raise ValueError("label out of range")
    rate = params.alpha[label]
    if rate == 0:
        return LittleReport(0.0, 0.0, 0.0, 0.0, 0.0, 0, 0)
    if not params.is_open:
        raise ValueError("Little's law check needs an open system")
    traj, records = simulate_agents(params, x0, cfg, replica=replica)
    t1 = float(traj.times[-1])
    tb = burn_in_fraction * t1
    holders = [m for m in range(params.size) if m & label == label]
    counts = traj.states[:, holders].sum(axis=1).astype(float)
    lhs = time_average(traj.times, counts, tb, t1)
    edges = np.linspace(tb, t1, N_BATCHES + 1)
    lhs_b = np.array([time_average(traj.times, counts, a, b) for a, b in zip(edges[:-1], edges[1:])])

    soj = [(r.arrival_time, r.sojourn) for r in records
           if not r.initial and r.arrival_label == label and r.arrival_time >= tb and r.sojourn is not None]
    if len(soj) < MIN_SOJOURNS:
        raise InsufficientData(f"only {len(soj)} completed sojourns after burn-in")
    soj.sort()
    w = np.array([s for _, s in soj])
    rhs = rate * float(w.mean())
    rhs_b = rate * np.array([b.mean() for b in np.array_split(w, N_BATCHES)])
    rel = abs(lhs - rhs) / abs(rhs)
    return LittleReport(lhs, rhs, rel, _halfwidth(lhs_b), _halfwidth(rhs_b), len(w), traj.n_events)

"""Acceptance checks, shared by the test suite and ``p2pswarm validate``.

Each check draws its random inputs from a fixed seed, runs the computation,
and returns a :class:`CheckResult` with the measured quantities.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import equilibria as E
from . import incentives as I
from .diffusion import empirical_fluctuations, moment_odes, simulate_diffusion
from .fluid import (
    closed_form_case1,
    closed_form_logistic,
    drift_oracle,
    integrate,
    sir_integral,
    vector_field,
)
from .model import ModelParams, build_jump_set
from .stochastic import SimConfig, largest_remainder_round, run_scaled_sequence

# n = 1 closed conservative benchmark used for the scaling and fluctuation checks
BENCH_BETA = 1.0
BENCH_X0 = (0.5, 0.5)
BENCH_T = 5.0

# open single-chunk swarm used for the equilibrium, settling and Little checks
OPEN_BETA, OPEN_LAMBDA, OPEN_DELTA = 3.0, 5.0, 4.0


def benchmark_params() -> ModelParams:
    return ModelParams.build(1, {}, BENCH_BETA, 0.0, 0.0)


def open_n1_params(lam=OPEN_LAMBDA, beta=OPEN_BETA, delta=OPEN_DELTA) -> ModelParams:
    return ModelParams.build(1, {"{}": lam}, beta, 0.0, delta)


@dataclass
class CheckResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    elapsed: float = 0.0

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        summary = ", ".join(f"{k}={_fmt(v)}" for k, v in self.detail.items())
        return f"[{verdict}] {self.number:2d} {self.name} ({self.elapsed:.2f}s) {summary}"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "passed": self.passed,
                "elapsed": self.elapsed, "detail": _jsonable(self.detail)}


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.3g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.floating, float)):
        # keep reports strict JSON
        return float(v) if math.isfinite(v) else str(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


CHECKS: dict[int, tuple[str, Callable[..., tuple[bool, dict]]]] = {}


def _check(number: int, name: str):
    def deco(fn):
        CHECKS[number] = (name, fn)
        return fn
    return deco


def run_check(number: int, **kw) -> CheckResult:
    name, fn = CHECKS[number]
    t0 = time.perf_counter()
    passed, detail = fn(**kw)
    return CheckResult(number, name, bool(passed), detail, time.perf_counter() - t0)


def run_all(numbers=None, **kw) -> list[CheckResult]:
    return [run_check(k, **kw) for k in sorted(CHECKS) if numbers is None or k in numbers]


def _random_params(rng, n, gamma=True, delta=True, alpha=True) -> ModelParams:
    size = 1 << n
    a = rng.uniform(0, 2, size) if alpha else np.zeros(size)
    return ModelParams(n, tuple(a), float(rng.uniform(0.1, 3)),
                       float(rng.uniform(0.1, 3)) if gamma else 0.0,
                       float(rng.uniform(0.1, 3)) if delta else 0.0)


# --------------------------------------------------------------------------


@_check(1, "drift identity")
def check_drift_identity(seed: int = 1, draws: int = 200, **_):
    rng = np.random.default_rng(seed)
    worst = {}
    for n in (1, 2, 3, 4):
        w = 0.0
        for _ in range(draws):
            p = _random_params(rng, n)
            x = rng.uniform(0, 2, p.size) * (rng.uniform(size=p.size) < 0.8)
            v = vector_field(p, x)
            err = np.abs(drift_oracle(p, build_jump_set(p), x) - v).sum() / (1 + np.abs(v).sum())
            w = max(w, err)
        worst[f"n{n}"] = w
    return max(worst.values()) <= 1e-12, worst


@_check(2, "single-chunk logistic closed form")
def check_logistic(seed: int = 2, **_):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 10, 1001)
    worst = 0.0
    for _ in range(10):
        x0, beta = rng.uniform(0.01, 0.99), rng.uniform(0.2, 5)
        p = ModelParams.build(1, {}, beta)
        traj = integrate(p, [x0, 1 - x0], 10.0, t_eval=t)
        worst = max(worst, np.abs(traj.states[:, 0] - closed_form_logistic(x0, beta, t)).max())
    return worst <= 1e-8, {"max_err": worst}


@_check(3, "SIR orbit conservation")
def check_sir(seed: int = 3, **_):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 20, 2001)
    worst = 0.0
    for _ in range(10):
        x0, y0 = rng.uniform(0.1, 2), rng.uniform(0.05, 2)
        beta, delta = rng.uniform(0.3, 4), rng.uniform(0.3, 4)
        p = ModelParams.build(1, {}, beta, 0.0, delta)
        s = integrate(p, [x0, y0], 20.0, t_eval=t).states
        worst = max(worst, np.abs(s[:, 1] - sir_integral(s[:, 0], x0, y0, beta, delta)).max())
    return worst <= 1e-7, {"max_residual": worst}


@_check(4, "single-chunk open equilibrium")
def check_open_equilibrium(seed: int = 4, **_):
    rng = np.random.default_rng(seed)
    eq = E.equilibrium_n1_open(OPEN_LAMBDA, OPEN_BETA, OPEN_DELTA)
    center = np.array([eq.x, eq.y])
    p = open_n1_params()
    worst = 0.0
    entered = 0
    for _ in range(20):
        x0 = rng.uniform(0.05, 4, 2)
        traj = integrate(p, x0, 50.0)
        worst = max(worst, np.abs(traj.final - center).sum())
        entered += E.first_entry_time(traj, center, 1e-4) is not None
    rep = E.EquilibriumReport.at(p, center)
    ok = entered == 20 and eq.spiral and rep.spiral
    return ok, {"x_star": center.tolist(), "entered": entered, "max_final_dist": worst,
                "spiral": eq.spiral, "eig_spiral": rep.spiral}


@_check(5, "spiral criterion grid")
def check_spiral_grid(**_):
    delta = 2.0
    agree = 0
    total = 0
    for lam in np.linspace(0.5, 20, 20):
        for beta in np.linspace(0.25, 10, 20):
            p = open_n1_params(lam, beta, delta)
            eq = E.equilibrium_n1_open(lam, beta, delta)
            rep = E.EquilibriumReport.at(p, [eq.x, eq.y])
            agree += rep.spiral == eq.spiral
            total += 1
    return agree == total, {"agreement": agree / total, "points": total}


def _case1_params(beta):
    return ModelParams.build(2, {}, beta, 0.0, 0.0)


@_check(6, "two-chunk closed form without swaps")
def check_case1(seed: int = 6, **_):
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_limit = 0.0
    for _ in range(10):
        beta = rng.uniform(0.3, 3)
        x0, u0, w0 = rng.dirichlet([1, 1, 1]) * 0.9 + 0.1 / 3
        p = _case1_params(beta)
        T = 50 / beta
        t = np.linspace(0, T, 2001)
        s = integrate(p, [x0, u0 / 2, u0 / 2, w0], T, t_eval=t).states
        cx, cu, cw = closed_form_case1(x0, u0, w0, beta, t)
        worst = max(worst, np.abs(s[:, 0] - cx).max(), np.abs(s[:, 1] + s[:, 2] - cu).max(),
                    np.abs(s[:, 3] - cw).max())
        worst_limit = max(worst_limit, abs(1 - s[-1, 3]), abs(1 - cw[-1]))
    return worst <= 1e-6 and worst_limit <= 1e-3, {"max_err": worst, "limit_gap": worst_limit}


@_check(7, "settling time transcendental root")
def check_settling_case1(**_):
    eps, w0 = 0.001, 0.1
    worst_res = worst_w = 0.0
    monotone = True
    for x0 in (0.0, 0.2, 0.45, 0.7, 0.89):
        taus = []
        for beta in (1, 2, 3, 4, 5):
            tau = E.settling_time_case1(x0, w0, beta, eps)
            taus.append(tau)
            worst_res = max(worst_res, abs(E.case1_settling_residual(x0, w0, beta, eps, tau)))
            _, _, w = closed_form_case1(x0, 1 - x0 - w0, w0, beta, tau)
            worst_w = max(worst_w, abs(float(w) - (1 - eps)))
        monotone &= all(a > b for a, b in zip(taus, taus[1:]))
    ok = worst_res <= 1e-10 and worst_w <= 1e-8 and monotone
    return ok, {"max_residual": worst_res, "max_w_err": worst_w, "decreasing_in_beta": monotone}


@_check(8, "two-chunk dissipative stability")
def check_case2(seed: int = 8, **_):
    rng = np.random.default_rng(seed)
    eig_err = 0.0
    for _ in range(20):
        u, rho = rng.uniform(0.01, 3, 2)
        eigs = E.spectrum(E.reduced_n2_jacobian([0, u, 0], rho))
        expect = np.sort(np.array([0, -u, u - rho]))
        eig_err = max(eig_err, np.abs(np.sort(eigs.real) - expect).max(), np.abs(eigs.imag).max())
    # time is measured in units of 1/beta, so beta = 1 and delta = rho
    worst_excess = -math.inf
    worst_tail = 0.0
    for _ in range(20):
        rho = rng.uniform(0.2, 2)
        x0 = rng.uniform(0.05, 1, 4)
        p = ModelParams.build(2, {}, 1.0, 0.0, rho)
        xf = integrate(p, x0, 500.0).final
        u_lim = xf[1] + xf[2]
        worst_excess = max(worst_excess, u_lim - rho)
        worst_tail = max(worst_tail, xf[0], xf[3])
    ok = eig_err <= 1e-10 and worst_excess < 1e-3 and worst_tail <= 1e-3
    return ok, {"eig_err": eig_err, "max_u_minus_rho": worst_excess, "max_x_w_final": worst_tail}


@_check(9, "two-chunk seeded equilibrium")
def check_case3(seed: int = 9, **_):
    rng = np.random.default_rng(seed)
    worst_x = worst_e = 0.0
    all_real_neg = True
    for _ in range(20):
        beta, delta, lam = rng.uniform(0.3, 3, 3)
        p = ModelParams.build(2, {"{1,2}": lam}, beta, 0.0, delta)
        rep = E.find_equilibrium_general(p, rng.uniform(0.05, 2, 4))
        rho, lam_s = delta / beta, lam / beta
        worst_x = max(worst_x, np.abs(rep.x_star - [0, 0, 0, lam_s / rho]).max())
        eigs = rep.eigenvalues / beta
        expect = np.array([-lam_s / rho, -rho])
        # every eigenvalue is one of the two, and both occur
        d = np.abs(eigs[:, None] - expect[None, :])
        worst_e = max(worst_e, d.min(axis=1).max(), d.min(axis=0).max())
        all_real_neg &= bool(np.all(eigs.imag == 0) and np.all(eigs.real < 0))
    ok = worst_x <= 1e-8 and worst_e <= 1e-8 and all_real_neg
    return ok, {"max_state_err": worst_x, "max_eig_err": worst_e, "real_negative": all_real_neg}


UPPER_R_FRACTIONS = (0.5, 0.1, 0.01)


def _small_rate_instance(rng, gamma=True):
    beta, gamma = rng.uniform(0.005, 0.05), (rng.uniform(0.005, 0.05) if gamma else 0.0)
    delta = rng.uniform(0.5, 2)
    p = ModelParams.build(2, {}, beta, gamma, delta)
    x0 = rng.uniform(0.1, 1, 4)
    return p, x0


@_check(10, "settling-time bounds")
def check_settling_bounds(seed: int = 10, **_):
    rng = np.random.default_rng(seed)
    p = open_n1_params()
    eq = E.equilibrium_n1_open(OPEN_LAMBDA, OPEN_BETA, OPEN_DELTA)
    center = np.array([eq.x, eq.y])
    r = 0.1
    lower_ok = 0
    min_margin = math.inf
    runs = 0
    while runs < 20:
        x0 = rng.uniform(0.05, 4, 2)
        if np.abs(x0 - center).sum() <= r:
            continue
        runs += 1
        tau = E.first_entry_time(integrate(p, x0, 50.0), center, r)
        lb = E.settling_lower_bound(x0.sum(), p.alpha_norm, center.sum(), r, OPEN_DELTA)
        lower_ok += tau is not None and tau >= lb
        if tau is not None:
            min_margin = min(min_margin, tau - lb)
    # bound as stated: vbar is the maximum of v_+^F over the initial ball
    upper_ok = applicable = 0
    min_upper_margin = math.inf
    for _ in range(20):
        q, x0 = _small_rate_instance(rng)
        vbar = E.v_plus_bar(q, x0.sum())
        if vbar >= q.delta:
            continue
        for frac in UPPER_R_FRACTIONS:
            applicable += 1
            m = _upper_margin(q, x0, vbar, frac * x0[3])
            upper_ok += m >= 0
            min_upper_margin = min(min_upper_margin, m)
    # per-seed variant without swaps: vbar bounds v_+^F / x^F
    seed_ok = seed_cases = 0
    for _ in range(20):
        q, x0 = _small_rate_instance(rng, gamma=False)
        vbar = E.seed_growth_bound(q, x0.sum())
        if vbar >= q.delta:
            continue
        for frac in UPPER_R_FRACTIONS:
            seed_cases += 1
            seed_ok += _upper_margin(q, x0, vbar, frac * x0[3]) >= 0
    ok = lower_ok == 20 and applicable > 0 and upper_ok == applicable
    return ok, {"lower_respected": f"{lower_ok}/20", "min_lower_margin": min_margin,
                "upper_respected": f"{upper_ok}/{applicable}", "min_upper_margin": min_upper_margin,
                "per_seed_upper_respected": f"{seed_ok}/{seed_cases}"}


def _upper_margin(q: ModelParams, x0: np.ndarray, vbar: float, r: float) -> float:
    """Bound minus measured time for x^F to reach r; -inf if it never does
    within three times the bound."""
    ub = E.settling_upper_bound(x0[3], vbar, q.delta, r)
    t_hit = E.first_time_below(integrate(q, x0, 3 * ub), 3, r)
    return -math.inf if t_hit is None else ub - t_hit


@_check(11, "fluid limit scaling")
def check_fluid_limit(seed: int = 11, workers: int = 1, **_):
    rep = run_scaled_sequence(benchmark_params(), BENCH_X0, [100, 1000, 10000],
                              SimConfig(seed=seed, t_max=BENCH_T), n_replicas=20, workers=workers)
    med = rep.medians()
    ratio = med[0] / med[-1]
    ok = med[0] > med[1] > med[2] and 5 <= ratio <= 20
    return ok, {"medians": med, "ratio_100_to_10000": ratio}


def _rel_residual(value, scale):
    return abs(value) / scale


@_check(12, "chunk-splitting criterion")
def check_incentives(seed: int = 12, **_):
    rng = np.random.default_rng(seed)
    agree = fewer = 0
    worst_q = worst_qt = 0.0
    for _ in range(500):
        lam, beta, delta, gamma_t = rng.uniform(0.05, 5, 4)
        beta_t = beta * rng.uniform(1, 4)
        rep = I.compare_systems(lam, beta, delta, beta_t, gamma_t)
        ut = rep.u_tilde
        sign_direct = np.sign(rep.baseline.norm - rep.split.norm)
        sign_crit = -1.0 if ut is None else np.sign(ut - rep.u)
        agree += sign_direct == sign_crit
        fewer += rep.split.x_star[0] < rep.baseline.x_star[0]
        b, c = I.q_coefficients(lam, beta_t, gamma_t, delta)
        u = rep.u
        worst_q = max(worst_q, _rel_residual(u * u + b * u - c, u * u + b * u + c))
        if ut is not None:
            p_, c_ = I.q_tilde_coefficients(lam, beta, beta_t, delta)
            worst_qt = max(worst_qt, _rel_residual(ut * ut - p_ * ut - c_, ut * ut + abs(p_) * ut + abs(c_)))
    bracket_ok = 0
    finite = 0
    for _ in range(20):
        beta, delta, gamma_t = rng.uniform(0.05, 5, 3)
        beta_t = beta * rng.uniform(1, 4)
        lam0 = I.lambda_threshold(beta, delta, beta_t, gamma_t)
        if math.isinf(lam0):
            good = (I.improves(1e-3 * delta, beta, delta, beta_t, gamma_t)
                    and I.improves(0.99 * I.LAMBDA_SCAN_CAP * delta, beta, delta, beta_t, gamma_t))
        else:
            finite += 1
            good = (I.improves(0.5 * lam0, beta, delta, beta_t, gamma_t)
                    and I.improves(0.99 * lam0, beta, delta, beta_t, gamma_t)
                    and not I.improves(1.01 * lam0, beta, delta, beta_t, gamma_t))
        bracket_ok += good
    ok = agree == 500 and fewer == 500 and worst_q <= 1e-12 and worst_qt <= 1e-12 and bracket_ok == 20
    return ok, {"criterion_agreement": agree / 500, "fewer_have_nothing": fewer / 500,
                "q_residual": worst_q, "q_tilde_residual": worst_qt,
                "threshold_bracketing": f"{bracket_ok}/20", "finite_thresholds": finite}


@_check(13, "Little's law")
def check_little(seed: int = 13, **_):
    N = 50
    p = open_n1_params().scaled(N)
    eq = E.equilibrium_n1_open(OPEN_LAMBDA, OPEN_BETA, OPEN_DELTA)
    x0 = largest_remainder_round(N * np.array([eq.x, eq.y]))
    rep = I.littles_law_check(p, x0, SimConfig(seed=seed, t_max=150.0), 0.5, label=0)
    # a population fed by seeds as well, to time the sojourn of arriving seeds
    q = ModelParams.build(1, {"{}": OPEN_LAMBDA * N, "{1}": 100.0}, OPEN_BETA / N, 0.0, OPEN_DELTA)
    x0q = largest_remainder_round([N * eq.x, 80.0])
    rep_f = I.littles_law_check(q, x0q, SimConfig(seed=seed + 1, t_max=200.0), 0.5, label=1)
    mean_f = rep_f.rhs / q.alpha[1]
    f_err = abs(mean_f * OPEN_DELTA - 1)
    ok = rep.n_events >= 100_000 and rep.rel_err <= 0.05 and f_err <= 0.05
    return ok, {"lhs": rep.lhs, "rhs": rep.rhs, "rel_err": rep.rel_err, "events": rep.n_events,
                "seed_sojourn_mean": mean_f, "seed_sojourn_rel_err": f_err,
                "seed_sojourns": rep_f.n_sojourns}


@_check(14, "diffusion approximation")
def check_diffusion(seed: int = 14, workers: int = 1, **_):
    p = benchmark_params()
    jumps = build_jump_set(p)
    grid = np.array([0.2, 0.4, 0.6, 0.8, 1.0])
    exact = moment_odes(p, jumps, BENCH_X0, 1.0, grid)
    em = simulate_diffusion(p, jumps, BENCH_X0, 1.0, 1000, seed=seed, t_grid=grid)
    z = np.abs(em.cov - exact.cov) / em.cov_se
    emp = empirical_fluctuations(p, BENCH_X0, 10_000, 1000, [1.0], seed=seed + 1, workers=workers)
    var_exact = exact.cov[-1, 0, 0]
    var_rel = abs(emp.cov[-1, 0, 0] - var_exact) / var_exact
    ok = z.max() <= 3 and var_rel <= 0.15
    return ok, {"max_cov_z": float(z.max()), "var_exact_t1": float(var_exact),
                "var_empirical_t1": float(emp.cov[-1, 0, 0]), "var_rel_err": var_rel}


def _symmetric_scenario(n: int, rng) -> tuple[ModelParams, np.ndarray]:
    card = np.array([m.bit_count() for m in range(1 << n)])
    a_k = rng.uniform(0, 1, n + 1)
    x_k = rng.uniform(0.05, 0.5, n + 1)
    alpha = tuple(a_k[card])
    p = ModelParams(n, alpha, float(rng.uniform(0.5, 2)), float(rng.uniform(0.2, 1)),
                    float(rng.uniform(0.5, 2)))
    return p, x_k[card]


@_check(15, "cardinality-symmetric reduction")
def check_symmetric_reduction(seed: int = 15, **_):
    rng = np.random.default_rng(seed)
    worst = {}
    for n in (2, 6):
        p, x0 = _symmetric_scenario(n, rng)
        t = np.linspace(0, 10, 51)
        full = integrate(p, x0, 10.0, t_eval=t).states
        red = E.integrate_reduced(p, x0, 10.0, t_eval=t).y
        full_red = np.array([E.reduce_symmetric(p, s).z for s in full])
        lifted = np.array([E.lift_symmetric(n, z) for z in red])
        worst[f"n{n}"] = max(np.abs(full_red - red).max(), np.abs(lifted - full).max())
    return max(worst.values()) <= 1e-7, worst

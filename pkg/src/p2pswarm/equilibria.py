"""Fixed points, stability, settling times and the cardinality-symmetric
reduction of the fluid dynamics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import comb
from typing import NamedTuple, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from . import _rk
from .fluid import (
    RTOL,
    ATOL,
    FluidTrajectory,
    jacobian,
    vector_field,
)
from .incentives import q_root
from .model import ModelParams, Monomial, quadratic_max

EIG_TOL = 1e-9
# couplings below this fraction of the largest Jacobian entry are treated as
# structural zeros when splitting the spectrum into blocks
BLOCK_ZERO_REL = 1e-12
POLISH_STEPS = 3
NEWTON_TOL = 1e-10
NEWTON_MAX_ITER = 60
BRACKET_CAP = 2.0**40


class EquilibriumError(RuntimeError):
    pass


class BoundInapplicable(ValueError):
    """The hypothesis of a settling-time bound does not hold."""


def spectrum(J: np.ndarray, zero: float = 0.0) -> np.ndarray:
    """Eigenvalues of ``J``, computed block by block.

    The strongly connected components of the sparsity graph give a block
    triangular form; its diagonal blocks carry the whole spectrum.  This keeps
    eigenvalues of reducible matrices exact where a dense solver would smear
    defective ones by ~sqrt(eps).
    """
    J = np.asarray(J, dtype=float)
    adj = np.abs(J) > zero
    np.fill_diagonal(adj, False)
    ncomp, labels = connected_components(adj, directed=True, connection="strong")
    eigs = []
    for c in range(ncomp):
        idx = np.flatnonzero(labels == c)
        block = J[np.ix_(idx, idx)]
        eigs.extend(np.linalg.eigvals(block) if len(idx) > 1 else [complex(block[0, 0])])
    eigs = np.array(eigs, dtype=complex)
    return eigs[np.lexsort((eigs.imag, eigs.real))]


def classify(eigs: Sequence[complex], eig_tol: float = EIG_TOL) -> str:
    re = np.real(eigs)
    if np.any(re > eig_tol):
        return "unstable"
    if np.all(re < -eig_tol):
        return "stable"
    return "marginal"


@dataclass
class EquilibriumReport:
    x_star: np.ndarray
    residual: float
    eigenvalues: np.ndarray
    stability: str
    spiral: bool
    iterations: int = 0
    singular: bool = False

    @classmethod
    def at(cls, params: ModelParams, x: np.ndarray, iterations: int = 0) -> "EquilibriumReport":
        x = np.asarray(x, dtype=float)
        J = jacobian(params, x)
        eigs = spectrum(J, zero=BLOCK_ZERO_REL * float(np.abs(J).max(initial=0.0)))
        return cls(
            x_star=x,
            residual=float(np.abs(vector_field(params, x)).sum()),
            eigenvalues=eigs,
            stability=classify(eigs),
            spiral=bool(np.any(np.abs(eigs.imag) > EIG_TOL)),
            iterations=iterations,
            singular=bool(np.min(np.abs(eigs)) <= EIG_TOL) if len(eigs) else False,
        )

    def to_dict(self) -> dict:
        return {
            "x_star": self.x_star.tolist(),
            "residual": self.residual,
            "eigenvalues": [[float(e.real), float(e.imag)] for e in self.eigenvalues],
            "stability": self.stability,
            "spiral": self.spiral,
            "iterations": self.iterations,
        }


# --------------------------------------------------------------------------
# Closed-form equilibria


class N1Equilibrium(NamedTuple):
    x: float
    y: float
    spiral: bool


def equilibrium_n1_open(lam: float, beta: float, delta: float) -> N1Equilibrium:
    """Equilibrium of the single-chunk swarm with have-nothing arrivals at
    rate ``lam``; trajectories spiral in iff ``lam*beta < 4*delta**2``."""
    if not (lam > 0 and beta > 0 and delta > 0):
        raise ValueError("lam, beta and delta must be positive")
    return N1Equilibrium(delta / beta, lam / delta, lam * beta < 4 * delta**2)


def equilibrium_n2_open(lam: float, beta_t: float, gamma_t: float, delta: float) -> np.ndarray:
    """Equilibrium of the two-chunk swarm with only have-nothing arrivals."""
    if not (lam > 0 and beta_t > 0 and gamma_t > 0 and delta > 0):
        raise ValueError("all rates must be positive")
    u = q_root(lam, beta_t, gamma_t, delta)
    x_empty = (delta / beta_t) / (delta * u / lam + 1)
    return np.array([x_empty, u / 2, u / 2, lam / delta])


# --------------------------------------------------------------------------
# Newton search


def find_equilibrium_general(
    params: ModelParams,
    x_guess: Sequence[float],
    tol: float = NEWTON_TOL,
    max_iter: int = NEWTON_MAX_ITER,
) -> EquilibriumReport:
    """Damped Newton iteration on ``v(x) = 0`` kept inside the nonnegative
    orthant.  Singular Jacobians are handled by least-squares steps."""
    x = np.clip(np.asarray(x_guess, dtype=float), 0, None)
    if x.shape != (params.size,):
        raise ValueError(f"guess needs {params.size} entries")
    return _newton(lambda z: vector_field(params, z), lambda z: jacobian(params, z), x, tol,
                   max_iter, lambda z, it: EquilibriumReport.at(params, z, it))


def _newton(f, jac, x, tol, max_iter, report):
    r = f(x)
    res = np.abs(r).sum()
    for it in range(max_iter + 1):
        if res <= tol:
            return report(_polish(f, jac, x, r, res), it)
        if it == max_iter:
            break
        step, *_ = np.linalg.lstsq(jac(x), -r, rcond=None)
        lam = 1.0
        while True:
            x_new = np.clip(x + lam * step, 0, None)
            r_new = f(x_new)
            res_new = np.abs(r_new).sum()
            if res_new < res:
                break
            lam *= 0.5
            if lam < 1e-14:
                raise EquilibriumError(f"line search stalled at residual {res:.3e}")
        x, r, res = x_new, r_new, res_new
    raise EquilibriumError(f"no convergence after {max_iter} iterations (residual {res:.3e})")


def _polish(f, jac, x, r, res):
    """A few undamped Newton steps past the tolerance, kept while they help;
    drives components that vanish at the root to (near) exact zeros."""
    for _ in range(POLISH_STEPS):
        if res == 0:
            break
        step, *_ = np.linalg.lstsq(jac(x), -r, rcond=None)
        x_new = np.clip(x + step, 0, None)
        r_new = f(x_new)
        res_new = np.abs(r_new).sum()
        if not res_new < res:
            break
        x, r, res = x_new, r_new, res_new
    return x


# --------------------------------------------------------------------------
# Two-chunk reduced coordinates (x, u, w) = (x^∅, x^1 + x^2, x^12), γ = 0,
# time rescaled by β; rho = δ/β and lam the rescaled seed arrival rate.


def reduced_n2_field(z: Sequence[float], rho: float, lam: float = 0.0) -> np.ndarray:
    x, u, w = z
    return np.array([-x * (u + w), -u * w + x * (u + w), lam + u * w - rho * w])


def reduced_n2_jacobian(z: Sequence[float], rho: float, lam: float = 0.0) -> np.ndarray:
    x, u, w = z
    return np.array([
        [-(u + w), -x, -x],
        [u + w, x - w, x - u],
        [0.0, w, u - rho],
    ])


# --------------------------------------------------------------------------
# Settling times


def settling_time_case1(x0: float, w0: float, beta: float, epsilon: float) -> float:
    """First time the seed fraction exceeds ``1 - epsilon`` in the two-chunk
    closed conservative swarm without swaps."""
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    if not 0 < w0 <= 1:
        raise ValueError("w0 must lie in (0, 1]")
    if not 0 <= x0 < 1:
        raise ValueError("x0 must lie in [0, 1)")
    if not beta > 0:
        raise ValueError("beta must be positive")
    g = lambda tau: case1_settling_residual(x0, w0, beta, epsilon, tau)
    if g(0.0) >= 0:
        return 0.0
    lo, hi = 0.0, 1.0
    while g(hi) < 0:
        lo, hi = hi, 2 * hi
        if hi > BRACKET_CAP:
            raise ValueError("no sign change below the bracket cap; degenerate parameters")
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if g(mid) < 0:
            lo = mid
        else:
            hi = mid
    return hi if abs(g(hi)) <= abs(g(lo)) else lo


def case1_settling_residual(x0, w0, beta, epsilon, tau) -> float:
    """RHS minus LHS of the settling-time equation; changes sign once at the
    settling time (convex in tau, negative at 0)."""
    e = epsilon / (1 - epsilon)
    return e * (x0 + (1 - x0) * math.exp(beta * tau)) - (1 - w0) / w0 - x0 * beta * tau


def settling_lower_bound(x0_norm, alpha_norm, x_star_norm, r, delta) -> float:
    """Crude lower bound on the time to enter the L1 ``r``-ball around the
    equilibrium, from ``d|x|/dt = |alpha| - delta x^F``."""
    if not (delta > 0 and r > 0):
        raise ValueError("delta and r must be positive")
    arg = (x0_norm + alpha_norm) / (x_star_norm + r)
    return math.log(arg) / delta if arg > 1 else 0.0


def settling_upper_bound(x0_F: float, v_plus_bar: float, delta: float, r: float) -> float:
    """``log(x0_F / r) / (delta - v_plus_bar)``, the time for the seed density
    of a closed swarm to fall to ``r`` if seeds decayed at net rate
    ``delta - v_plus_bar``.

    This is a guaranteed bound when ``v_plus_bar`` bounds ``v_+^F(x) / x^F``
    along the path (see :func:`seed_growth_bound`).  With ``v_plus_bar`` the
    maximum of ``v_+^F`` itself (:func:`v_plus_bar`) it is only a heuristic:
    swaps keep producing seeds while ``x^F`` is small.
    """
    if v_plus_bar >= delta:
        raise BoundInapplicable(f"v_plus_bar={v_plus_bar} is not below delta={delta}")
    if not (r > 0 and x0_F >= r):
        raise ValueError("need x0_F >= r > 0")
    return math.log(x0_F / r) / (delta - v_plus_bar)


def v_plus_terms(params: ModelParams) -> list[Monomial]:
    """Monomials of the seed production rate ``v_+^F`` (downloads completing
    the file plus swaps completing it)."""
    full = params.full
    terms: list[Monomial] = []
    for j in range(params.n):
        terms.append((params.beta, (full, full ^ (1 << j))))
    if params.gamma > 0:
        for b in range(full):
            for i in range(params.n):
                if b >> i & 1:
                    terms.append((params.gamma, (b, full ^ (1 << i))))
    return terms


def v_plus_F(params: ModelParams, x: Sequence[float]) -> float:
    total = 0.0
    for c, (i, j) in v_plus_terms(params):
        total += c * x[i] * x[j]
    return total


def v_plus_bar(params: ModelParams, radius: float) -> float:
    """Maximum of ``v_+^F`` over ``{x >= 0, |x| <= radius}``."""
    return quadratic_max(v_plus_terms(params), radius)


def seed_growth_bound(params: ModelParams, radius: float) -> float:
    """Supremum of ``v_+^F(x) / x^F`` over ``{x >= 0, |x| <= radius}``.

    Finite only when every seed-producing event involves a seed, i.e. without
    swaps (or with a single chunk); then it equals ``beta * radius``.
    """
    if params.gamma > 0 and params.n > 1:
        raise BoundInapplicable("swaps create seeds without a seed present; per-seed rate unbounded")
    return params.beta * radius


def first_entry_time(
    traj: FluidTrajectory,
    center: Sequence[float],
    r: float,
    n_grid: int = 20_001,
) -> float | None:
    """First time the trajectory is within L1 distance ``r`` of ``center``."""
    center = np.asarray(center, dtype=float)
    t0, t1 = traj.dense.t_start, traj.dense.t_end
    grid = np.linspace(t0, t1, n_grid)
    dist = np.abs(traj.at(grid) - center).sum(axis=1) - r
    hit = np.flatnonzero(dist <= 0)
    if len(hit) == 0:
        return None
    k = hit[0]
    if k == 0:
        return float(grid[0])
    lo, hi = grid[k - 1], grid[k]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if np.abs(traj.at(mid) - center).sum() - r <= 0:
            hi = mid
        else:
            lo = mid
    return float(hi)


def first_time_below(traj: FluidTrajectory, component: int, level: float,
                     n_grid: int = 20_001) -> float | None:
    t0, t1 = traj.dense.t_start, traj.dense.t_end
    grid = np.linspace(t0, t1, n_grid)
    vals = traj.at(grid)[:, component] - level
    hit = np.flatnonzero(vals <= 0)
    if len(hit) == 0:
        return None
    k = hit[0]
    if k == 0:
        return float(grid[0])
    lo, hi = grid[k - 1], grid[k]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if traj.at(mid)[component] <= level:
            hi = mid
        else:
            lo = mid
    return float(hi)


# --------------------------------------------------------------------------
# Cardinality-symmetric reduction


class ReducedState(NamedTuple):
    z: np.ndarray


def _cardinalities(n: int) -> np.ndarray:
    return np.array([m.bit_count() for m in range(1 << n)])


def reduce_symmetric(params: ModelParams, x: Sequence[float]) -> ReducedState:
    x = np.asarray(x, dtype=float)
    return ReducedState(np.bincount(_cardinalities(params.n), x, minlength=params.n + 1))


def lift_symmetric(n: int, z: Sequence[float]) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape != (n + 1,):
        raise ValueError(f"reduced state needs {n + 1} entries")
    if np.any(z < 0):
        raise ValueError("reduced state must be nonnegative")
    card = _cardinalities(n)
    binom = np.array([comb(n, k) for k in range(n + 1)], dtype=float)
    return z[card] / binom[card]


def is_symmetric(n: int, vec: Sequence[float], rtol: float = 1e-12) -> bool:
    """True iff ``vec[A]`` depends on ``A`` only through ``|A|``."""
    vec = np.asarray(vec, dtype=float)
    card = _cardinalities(n)
    for k in range(n + 1):
        vals = vec[card == k]
        if np.ptp(vals) > rtol * max(1.0, np.abs(vals).max()):
            return False
    return True


def reduced_vector_field(params: ModelParams, z: Sequence[float]) -> np.ndarray:
    """``V^k(z) = sum_{|A|=k} v^A(lift(z))``."""
    v = vector_field(params, lift_symmetric(params.n, np.clip(z, 0, None)))
    return np.bincount(_cardinalities(params.n), v, minlength=params.n + 1)


def reduced_jacobian(params: ModelParams, z: Sequence[float]) -> np.ndarray:
    n = params.n
    card = _cardinalities(n)
    J = jacobian(params, lift_symmetric(n, np.clip(z, 0, None)))
    R = np.zeros((n + 1, params.size))
    R[card, np.arange(params.size)] = 1.0
    binom = np.array([comb(n, k) for k in range(n + 1)], dtype=float)
    L = R.T / binom[None, :]
    return R @ J @ L


def _require_symmetric(params: ModelParams, x0) -> None:
    if not is_symmetric(params.n, params.alpha):
        raise ValueError("arrival rates must depend on the label only through its size")
    if not is_symmetric(params.n, x0):
        raise ValueError("initial state must depend on the label only through its size")


def integrate_reduced(
    params: ModelParams,
    x0: Sequence[float],
    T: float,
    t_eval: Sequence[float] | None = None,
    rtol: float = RTOL,
    atol: float = ATOL,
) -> _rk.Solution:
    """Integrate the ``(n+1)``-dimensional dynamics of the class totals; the
    full ``x0`` and the arrival rates must be symmetric under relabelling."""
    x0 = np.asarray(x0, dtype=float)
    _require_symmetric(params, x0)
    z0 = reduce_symmetric(params, x0).z
    return _rk.solve(lambda t, z: reduced_vector_field(params, z), z0, 0.0, T, rtol=rtol,
                     atol=atol, t_eval=t_eval, tol_neg=1e-10)


def find_symmetric_equilibria(
    params: ModelParams,
    starts: Sequence[Sequence[float]],
    tol: float = NEWTON_TOL,
) -> list[EquilibriumReport]:
    """Newton on ``V(z) = 0`` from several reduced starting points.

    Returns every distinct root reached (lifted to the full state and
    classified with the full Jacobian); no claim of completeness.
    """
    if not is_symmetric(params.n, params.alpha):
        raise ValueError("arrival rates must depend on the label only through its size")
    found: list[EquilibriumReport] = []
    for z0 in starts:
        try:
            rep = _newton(lambda z: reduced_vector_field(params, z),
                          lambda z: reduced_jacobian(params, z),
                          np.clip(np.asarray(z0, dtype=float), 0, None), tol, NEWTON_MAX_ITER,
                          lambda z, it: EquilibriumReport.at(params, lift_symmetric(params.n, z), it))
        except EquilibriumError:
            continue
        if all(np.abs(rep.x_star - f.x_star).sum() > 1e-6 for f in found):
            found.append(rep)
    return found

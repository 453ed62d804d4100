"""Transition structure of the swarm Markov chain.

The chain lives on nonnegative integer vectors indexed by chunk labels
(masks).  Every transition is a jump vector ``zeta`` whose rate ``Q_zeta(x)``
is a polynomial of degree at most two with nonnegative coefficients.  Rate
polynomials are kept as sparse monomial lists ``(coef, (i, j))``, where the
index tuple has length 0 (constant), 1 (linear) or 2 (product ``x^i x^j``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import networkx as nx
import numpy as np

from .labels import (
    N_MAX,
    LabelError,
    bits,
    format_label,
    mask_covers,
    mask_relates,
    parse_label,
    popcount,
    supersets,
)

Monomial = tuple[float, tuple[int, ...]]

# Swap tuples grow roughly like 4^n * n^2; above this the builder wants an explicit opt-in.
SWAP_N_LIMIT = 10


class ConfigError(ValueError):
    """A model or scenario configuration could not be parsed."""


@dataclass(frozen=True)
class ModelParams:
    """Rates of one swarm: ``n`` chunks, arrivals ``alpha`` per label,
    download rate ``beta``, swap rate ``gamma`` and seed departure rate
    ``delta``."""

    n: int
    alpha: tuple[float, ...]
    beta: float
    gamma: float = 0.0
    delta: float = 0.0

    def __post_init__(self) -> None:
        if not isinstance(self.n, int) or not 1 <= self.n <= N_MAX:
            raise ValueError(f"n must be an integer in [1, {N_MAX}], got {self.n!r}")
        alpha = tuple(float(a) for a in self.alpha)
        if len(alpha) != 1 << self.n:
            raise ValueError(f"alpha needs {1 << self.n} entries, got {len(alpha)}")
        object.__setattr__(self, "alpha", alpha)
        for name in ("beta", "gamma", "delta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.gamma < 0 or self.delta < 0 or min(alpha) < 0:
            raise ValueError("alpha, gamma and delta must be nonnegative")
        if not all(math.isfinite(v) for v in (*alpha, self.beta, self.gamma, self.delta)):
            raise ValueError("rates must be finite")

    @classmethod
    def build(
        cls,
        n: int,
        alpha: Mapping[Any, float] | Sequence[float] | None = None,
        beta: float = 1.0,
        gamma: float = 0.0,
        delta: float = 0.0,
    ) -> "ModelParams":
        """Convenience constructor; ``alpha`` may be a dense sequence or a
        sparse mapping keyed by mask or label string (missing entries are 0)."""
        dense = [0.0] * (1 << n)
        if alpha is None:
            pass
        elif isinstance(alpha, Mapping):
            for key, rate in alpha.items():
                dense[parse_label(key, n) if isinstance(key, str) else int(key)] = float(rate)
        else:
            dense = list(alpha)
        return cls(n, tuple(dense), beta, gamma, delta)

    @property
    def size(self) -> int:
        return 1 << self.n

    @property
    def full(self) -> int:
        return (1 << self.n) - 1

    @property
    def alpha_array(self) -> np.ndarray:
        return np.array(self.alpha)

    @property
    def alpha_norm(self) -> float:
        return float(sum(self.alpha))

    @property
    def is_closed(self) -> bool:
        return all(a == 0 for a in self.alpha)

    @property
    def is_open(self) -> bool:
        return not self.is_closed and self.delta > 0

    @property
    def is_conservative(self) -> bool:
        return self.is_closed and self.delta == 0

    @property
    def is_dissipative(self) -> bool:
        return self.is_closed and self.delta > 0

    @property
    def classification(self) -> str:
        if self.is_conservative:
            return "conservative"
        if self.is_dissipative:
            return "dissipative"
        if self.is_open:
            return "open"
        return "unclassified"  # arrivals without departures

    def scaled(self, N: float) -> "ModelParams":
        """The N-th member of the fluid-scaled family: (N alpha, beta/N, gamma/N, delta)."""
        return ModelParams(
            self.n, tuple(N * a for a in self.alpha), self.beta / N, self.gamma / N, self.delta
        )

    def to_config(self) -> dict:
        return {
            "n": self.n,
            "alpha": {format_label(m, self.n): a for m, a in enumerate(self.alpha) if a != 0},
            "beta": self.beta,
            "gamma": self.gamma,
            "delta": self.delta,
        }

    @classmethod
    def from_config(cls, cfg: Mapping[str, Any]) -> "ModelParams":
        if not isinstance(cfg, Mapping):
            raise ConfigError("model config must be a mapping")
        unknown = set(cfg) - {"n", "alpha", "beta", "gamma", "delta"}
        if unknown:
            raise ConfigError(f"unknown model field(s): {', '.join(sorted(unknown))}")
        if "n" not in cfg:
            raise ConfigError("model.n is required")
        n = cfg["n"]
        if not isinstance(n, int):
            raise ConfigError(f"model.n: expected integer, got {n!r}")
        alpha_cfg = cfg.get("alpha", {}) or {}
        if not isinstance(alpha_cfg, Mapping):
            raise ConfigError("model.alpha: expected a mapping from label string to rate")
        alpha = {}
        for key, rate in alpha_cfg.items():
            try:
                alpha[parse_label(str(key), n)] = float(rate)
            except (LabelError, TypeError, ValueError) as exc:
                raise ConfigError(f"model.alpha[{key!r}]: {exc}") from None
        try:
            return cls.build(
                n,
                alpha,
                beta=float(cfg.get("beta", 1.0)),
                gamma=float(cfg.get("gamma", 0.0)),
                delta=float(cfg.get("delta", 0.0)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"model: {exc}") from None


def load_params(path: str | Path) -> ModelParams:
    text = Path(path).read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return ModelParams.from_config(cfg)


def dump_params(params: ModelParams, path: str | Path) -> None:
    Path(path).write_text(json.dumps(params.to_config(), indent=2) + "\n")


# --------------------------------------------------------------------------
# Individual interaction rates


def download_rate(params: ModelParams, x: Sequence[float], a: int, a_prime: int) -> float:
    """Total rate at which some A-peer becomes an A'-peer by downloading."""
    if not mask_covers(a, a_prime):
        return 0.0
    xa = x[a]
    if xa == 0:
        return 0.0
    s = 0.0
    for c in supersets(a_prime, params.n):
        s += x[c] / popcount(c & ~a)
    return params.beta * xa * s


def swap_rate(params: ModelParams, x: Sequence[float], a: int, b: int) -> float:
    """Rate of one specific swap between an A-peer and a B-peer."""
    if mask_relates(a, b):
        return 0.0
    return params.gamma * x[a] * x[b] / (popcount(a & ~b) * popcount(b & ~a))


# --------------------------------------------------------------------------
# Jump vectors


@dataclass(frozen=True)
class JumpVector:
    """One transition ``x -> x + zeta``.

    ``changes`` is the sparse form of ``zeta`` as sorted ``(mask, delta)``
    pairs; ``rate_terms`` the monomials of ``Q_zeta``.
    """

    changes: tuple[tuple[int, int], ...]
    kind: str
    rate_terms: tuple[Monomial, ...]
    source: tuple[int, ...] = ()

    def vector(self, size: int) -> np.ndarray:
        z = np.zeros(size, dtype=np.int64)
        for m, d in self.changes:
            z[m] += d
        return z

    def rate(self, x: Sequence[float]) -> float:
        return eval_poly(self.rate_terms, x)

    @property
    def net(self) -> int:
        return sum(d for _, d in self.changes)

    def describe(self, n: int) -> str:
        parts = [f"{'+' if d > 0 else '-'}{abs(d) if abs(d) != 1 else ''}e{format_label(m, n)}"
                 for m, d in self.changes]
        return f"{self.kind}: " + " ".join(parts)


def eval_poly(terms: Iterable[Monomial], x: Sequence[float]) -> float:
    total = 0.0
    for coef, idx in terms:
        v = coef
        for i in idx:
            v *= x[i]
        total += v
    return total


def _key(changes: dict[int, int]) -> tuple[tuple[int, int], ...]:
    return tuple(sorted((m, d) for m, d in changes.items() if d != 0))


class JumpSet(Sequence[JumpVector]):
    """Immutable list of jump vectors plus array forms for fast evaluation."""

    def __init__(self, params: ModelParams, jumps: Sequence[JumpVector]):
        self.params = params
        self._jumps = tuple(jumps)
        size = params.size
        zeta = np.zeros((len(self._jumps), size), dtype=np.int64)
        coef, i1, i2, owner = [], [], [], []
        for k, jv in enumerate(self._jumps):
            for m, d in jv.changes:
                zeta[k, m] += d
            for c, idx in jv.rate_terms:
                padded = tuple(idx) + (size,) * (2 - len(idx))
                coef.append(c)
                i1.append(padded[0])
                i2.append(padded[1])
                owner.append(k)
        zeta.setflags(write=False)
        self.zeta = zeta
        # index ``size`` refers to a constant-one slot appended to the state
        self.coef = np.array(coef, dtype=float)
        self.i1 = np.array(i1, dtype=np.int64)
        self.i2 = np.array(i2, dtype=np.int64)
        self.owner = np.array(owner, dtype=np.int64)

    def __getitem__(self, k):
        return self._jumps[k]

    def __len__(self) -> int:
        return len(self._jumps)

    def rates(self, x: np.ndarray) -> np.ndarray:
        """``Q_zeta(x)`` for every jump; ``x`` may be a single state or a stack."""
        x = np.asarray(x, dtype=float)
        xe = np.concatenate([x, np.ones(x.shape[:-1] + (1,))], axis=-1)
        terms = self.coef * xe[..., self.i1] * xe[..., self.i2]
        if x.ndim == 1:
            return np.bincount(self.owner, terms, minlength=len(self))
        out = np.zeros(x.shape[:-1] + (len(self),))
        np.add.at(out, (..., self.owner), terms)
        return out

    def total_rate(self, x: np.ndarray) -> float:
        return float(self.rates(x).sum())

    def drift(self, x: np.ndarray) -> np.ndarray:
        return self.rates(x) @ self.zeta


def build_jump_set(params: ModelParams, allow_large: bool = False) -> JumpSet:
    """Enumerate every possible transition of the chain and its rate polynomial.

    Swaps are generated from ordered tuples ``(A, B, A', B')`` restricted to
    ``A < B`` so each physical swap is counted once; entries sharing the same
    ``zeta`` are merged by adding their monomials.
    """
    n, size, full = params.n, params.size, params.full
    if params.gamma > 0 and n > SWAP_N_LIMIT and not allow_large:
        raise ValueError(
            f"swap jump set for n={n} is too large; pass allow_large=True to build it anyway"
        )
    merged: dict[tuple, list] = {}

    def add(changes: dict[int, int], kind: str, terms: list[Monomial], source: tuple[int, ...]):
        key = _key(changes)
        if key in merged:
            merged[key][1].extend(terms)
        else:
            merged[key] = [kind, list(terms), source]

    for a, rate in enumerate(params.alpha):
        if rate > 0:
            add({a: 1}, "arrival", [(rate, ())], (a,))
    if params.delta > 0:
        add({full: -1}, "departure", [(params.delta, (full,))], (full,))

    beta = params.beta
    for a in range(size):
        for j in bits(full & ~a):
            a2 = a | j
            terms = [(beta / popcount(c & ~a), (a, c)) for c in supersets(a2, n)]
            add({a: -1, a2: 1}, "download", terms, (a, a2))

    if params.gamma > 0:
        g = params.gamma
        for a in range(size):
            for b in range(a + 1, size):
                if mask_relates(a, b):
                    continue
                a_only, b_only = a & ~b, b & ~a
                coef = g / (popcount(a_only) * popcount(b_only))
                for j in bits(b_only):
                    for i in bits(a_only):
                        a2, b2 = a | j, b | i
                        changes: dict[int, int] = {}
                        for m, d in ((a, -1), (b, -1), (a2, 1), (b2, 1)):
                            changes[m] = changes.get(m, 0) + d
                        add(changes, "swap", [(coef, (a, b))], (a, b, a2, b2))

    jumps = [
        JumpVector(key, kind, tuple(_combine(terms)), source)
        for key, (kind, terms, source) in merged.items()
    ]
    return JumpSet(params, jumps)


def _combine(terms: Iterable[Monomial]) -> list[Monomial]:
    acc: dict[tuple[int, ...], float] = {}
    for c, idx in terms:
        idx = tuple(sorted(idx))
        acc[idx] = acc.get(idx, 0.0) + c
    return [(c, idx) for idx, c in acc.items()]


def total_rate(params: ModelParams, jumps: JumpSet, x: Sequence[float]) -> float:
    return jumps.total_rate(np.asarray(x, dtype=float))


def apply_generator(
    params: ModelParams,
    jumps: JumpSet,
    f: Callable[[np.ndarray], float],
    x: Sequence[float],
) -> float:
    """``(Q f)(x) = sum_zeta (f(x + zeta) - f(x)) Q_zeta(x)``."""
    x = np.asarray(x)
    fx = f(x)
    rates = jumps.rates(x)
    out = 0.0
    for k, r in enumerate(rates):
        if r != 0:
            out += (f(x + jumps.zeta[k]) - fx) * r
    return out


# --------------------------------------------------------------------------
# Bounds on rate polynomials over {x >= 0, |x| <= B}


@dataclass(frozen=True)
class RateBound:
    M: float
    L: float


def _split_poly(terms: Iterable[Monomial]):
    const = 0.0
    lin: dict[int, float] = {}
    quad: dict[tuple[int, int], float] = {}
    for c, idx in terms:
        if c < 0:
            raise ValueError("bounds need nonnegative coefficients")
        if len(idx) == 0:
            const += c
        elif len(idx) == 1:
            lin[idx[0]] = lin.get(idx[0], 0.0) + c
        elif len(idx) == 2:
            key = tuple(sorted(idx))
            quad[key] = quad.get(key, 0.0) + c
        else:
            raise ValueError("only polynomials of degree <= 2 are supported")
    return const, lin, quad


def quadratic_max(terms: Iterable[Monomial], B: float) -> float:
    """Exact maximum of a nonnegative-coefficient quadratic over the simplex
    ``{x >= 0, sum(x) <= B}``.

    With nonnegative coefficients the maximum sits on ``sum(x) = B``.  Moving
    mass between two variables that share no product term (and carry no
    square) changes the value linearly, so some maximiser is supported on a
    clique of the product graph; we solve the stationarity system on every
    clique face and keep the best feasible point.
    """
    if B < 0:
        raise ValueError("B must be nonnegative")
    const, lin, quad = _split_poly(terms)
    vars_ = sorted(set(lin) | {i for k in quad for i in k})
    if not vars_ or B == 0:
        return const
    pos = {v: k for k, v in enumerate(vars_)}
    d = len(vars_)
    H = np.zeros((d, d))
    l = np.zeros(d)
    for v, c in lin.items():
        l[pos[v]] += c
    g = nx.Graph()
    g.add_nodes_from(range(d))
    for (i, j), c in quad.items():
        pi, pj = pos[i], pos[j]
        if pi == pj:
            H[pi, pi] += 2 * c
        else:
            H[pi, pj] += c
            H[pj, pi] += c
            g.add_edge(pi, pj)

    def value(xs: np.ndarray) -> float:
        return const + float(l @ xs + 0.5 * xs @ H @ xs)

    best = -math.inf
    for clique in nx.enumerate_all_cliques(g):
        s = list(clique)
        k = len(s)
        if k == 1:
            xs = np.zeros(d)
            xs[s[0]] = B
            best = max(best, value(xs))
            continue
        # [H_SS  -1][x]   [-l_S]
        # [ 1^T   0][mu] = [ B ]
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = H[np.ix_(s, s)]
        kkt[:k, k] = -1.0
        kkt[k, :k] = 1.0
        rhs = np.concatenate([-l[s], [B]])
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        if np.abs(kkt @ sol - rhs).max() > 1e-9 * max(1.0, np.abs(rhs).max()):
            continue
        xs_s = sol[:k]
        if xs_s.min() < -1e-12 * B:
            continue
        xs = np.zeros(d)
        xs[s] = np.clip(xs_s, 0, None)
        best = max(best, value(xs))
    return best


def lipschitz_bound(terms: Iterable[Monomial], B: float) -> float:
    """Upper bound on the L1-Lipschitz constant over ``{x >= 0, |x| <= B}``:
    the largest partial derivative magnitude there."""
    _, lin, quad = _split_poly(terms)
    grad: dict[int, float] = dict(lin)
    for (i, j), c in quad.items():
        if i == j:
            grad[i] = grad.get(i, 0.0) + 2 * c * B
        else:
            grad[i] = grad.get(i, 0.0) + c * B
            grad[j] = grad.get(j, 0.0) + c * B
    return max(grad.values(), default=0.0)


def estimate_rate_bounds(params: ModelParams, jumps: JumpSet, B: float) -> list[RateBound]:
    if not B > 0:
        raise ValueError("B must be positive")
    return [RateBound(quadratic_max(jv.rate_terms, B), lipschitz_bound(jv.rate_terms, B))
            for jv in jumps]

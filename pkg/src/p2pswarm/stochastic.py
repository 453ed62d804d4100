"""Exact stochastic simulation of the swarm chain.

Three simulators share one transition list:

* ``simulate_ssa``: the direct (Gillespie) method,
* ``simulate_time_change``: independent unit Poisson clocks run on the
  integrated-rate time scale of each jump,
* ``simulate_agents``: the direct method with individual peers tracked so
  sojourn and completion times can be read off.

Replica ``r`` of a run seeded with ``seed`` draws from a Philox stream keyed
by ``(seed, r)``, so results never depend on how replicas are scheduled.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _kernels
from .fluid import integrate
from .labels import format_label
from .model import JumpSet, ModelParams, build_jump_set

_STATUS = {
    _kernels.HORIZON: "horizon",
    _kernels.ABSORBED: "absorbed",
    _kernels.EVENT_CAP: "event-cap",
}
_CHUNK = 1 << 16
_RANDOM_BLOCK = 1 << 15


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    t_max: float = 1.0
    max_events: int = 10_000_000
    record: str = "events"
    dt: float | None = None

    def __post_init__(self):
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")
        if self.record not in ("events", "grid"):
            raise ValueError("record must be 'events' or 'grid'")
        if self.record == "grid" and not (self.dt is not None and self.dt > 0):
            raise ValueError("grid recording needs dt > 0")
        if self.max_events < 0:
            raise ValueError("max_events must be nonnegative")

    def grid(self) -> np.ndarray:
        k = int(np.floor(self.t_max / self.dt + 1e-9))
        g = np.arange(k + 1) * self.dt
        if g[-1] < self.t_max - 1e-12 * self.t_max:
            g = np.append(g, self.t_max)
        return g


@dataclass
class TrajectorySample:
    times: np.ndarray
    states: np.ndarray
    stop_reason: str
    n_events: int

    def to_csv(self, path, n: int) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [format_label(m, n) for m in range(1 << n)])
            for t, s in zip(self.times, self.states):
                w.writerow([repr(float(t))] + [str(v) for v in s])


def replica_rng(seed: int, replica: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(replica,))))


def _check_state(params: ModelParams, x0) -> np.ndarray:
    x0 = np.asarray(x0)
    if x0.shape != (params.size,):
        raise ValueError(f"state needs {params.size} entries")
    if np.any(x0 < 0):
        raise ValueError("state entries must be nonnegative")
    if np.any(x0 != np.round(x0)):
        raise ValueError("population counts must be integers")
    return x0.astype(np.int64)


class _Recorder:
    """Collects kernel output either as every event or sampled on a grid."""

    def __init__(self, x0: np.ndarray, jumps: JumpSet, cfg: SimConfig):
        self.zeta = jumps.zeta
        self.cfg = cfg
        self.current = x0.copy()
        if cfg.record == "events":
            self.times = [np.zeros(1)]
            self.states = [x0[None, :].copy()]
        else:
            self.grid = cfg.grid()
            self.gpos = 1
            self.grid_states = np.empty((len(self.grid), x0.size), dtype=np.int64)
            self.grid_states[0] = x0

    def add(self, t: np.ndarray, j: np.ndarray) -> None:
        if len(t) == 0:
            return
        cum = self.current + np.cumsum(self.zeta[j], axis=0)
        if self.cfg.record == "events":
            self.times.append(t.copy())
            self.states.append(cum)
        else:
            g = self.grid
            hi = np.searchsorted(g, t[-1], side="left")  # grid points strictly before the last event
            while self.gpos < hi:
                k = np.searchsorted(t, g[self.gpos], side="right")
                self.grid_states[self.gpos] = cum[k - 1] if k else self.current
                self.gpos += 1
        self.current = cum[-1]

    def finish(self, t_end: float, stop: str, n_events: int) -> TrajectorySample:
        if self.cfg.record == "events":
            times = np.concatenate(self.times)
            states = np.concatenate(self.states)
            if stop == "horizon" and times[-1] < t_end:
                times = np.append(times, t_end)
                states = np.vstack([states, self.current])
            return TrajectorySample(times, states, stop, n_events)
        # the state is frozen after absorption, so the rest of the grid is known;
        # after an event cap the grid is cut at the cap time
        if stop == "event-cap":
            end = self.gpos + int(np.sum(self.grid[self.gpos:] <= t_end))
        else:
            end = len(self.grid)
        self.grid_states[self.gpos:end] = self.current
        return TrajectorySample(self.grid[:end].copy(), self.grid_states[:end].copy(), stop, n_events)


def _extended(x0: np.ndarray) -> np.ndarray:
    return np.append(x0.astype(float), 1.0)


def simulate_ssa(
    params: ModelParams,
    jumps: JumpSet,
    x0,
    cfg: SimConfig,
    replica: int = 0,
) -> TrajectorySample:
    """Exact realisation: exponential holding times at the total rate, next
    jump chosen proportionally to its rate."""
    x0 = _check_state(params, x0)
    rng = replica_rng(cfg.seed, replica)
    xe = _extended(x0)
    rec = _Recorder(x0, jumps, cfg)
    out_t = np.empty(_CHUNK)
    out_j = np.empty(_CHUNK, dtype=np.int64)
    t, done = 0.0, 0
    uniforms = 1.0 - rng.random(_RANDOM_BLOCK)
    while True:
        t, n_out, done, status = _kernels.ssa_run(
            xe, t, cfg.t_max, done, cfg.max_events, uniforms, jumps.coef, jumps.i1, jumps.i2,
            jumps.owner, jumps.zeta, out_t, out_j,
        )
        rec.add(out_t[:n_out], out_j[:n_out])
        if status == _kernels.NEED_RANDOMS:
            uniforms = 1.0 - rng.random(_RANDOM_BLOCK)
        elif status != _kernels.OUT_FULL:
            return rec.finish(t, _STATUS[status], done)


def simulate_time_change(
    params: ModelParams,
    jumps: JumpSet,
    x0,
    cfg: SimConfig,
    replica: int = 0,
) -> TrajectorySample:
    """Simulate ``X_t = X_0 + sum_zeta zeta * Phi_zeta(int_0^t Q_zeta(X_s) ds)``
    with independent unit-rate Poisson processes ``Phi_zeta``."""
    x0 = _check_state(params, x0)
    rng = replica_rng(cfg.seed, replica)
    xe = _extended(x0)
    rec = _Recorder(x0, jumps, cfg)
    out_t = np.empty(_CHUNK)
    out_j = np.empty(_CHUNK, dtype=np.int64)
    internal = np.zeros(len(jumps))
    next_fire = rng.standard_exponential(len(jumps))
    exps = rng.standard_exponential(_RANDOM_BLOCK)
    t, done = 0.0, 0
    while True:
        t, n_out, done, used, status = _kernels.time_change_run(
            xe, t, cfg.t_max, done, cfg.max_events, internal, next_fire, exps, jumps.coef,
            jumps.i1, jumps.i2, jumps.owner, jumps.zeta, out_t, out_j,
        )
        rec.add(out_t[:n_out], out_j[:n_out])
        exps = exps[used:]
        if status == _kernels.NEED_RANDOMS:
            exps = rng.standard_exponential(_RANDOM_BLOCK)
        elif status != _kernels.OUT_FULL:
            return rec.finish(t, _STATUS[status], done)


# --------------------------------------------------------------------------
# Peer-level simulation


@dataclass
class PeerRecord:
    peer_id: int
    arrival_time: float
    label_history: list[tuple[float, int]]
    completion_time: float | None = None
    departure_time: float | None = None
    initial: bool = False

    @property
    def arrival_label(self) -> int:
        return self.label_history[0][1]

    @property
    def sojourn(self) -> float | None:
        if self.departure_time is None:
            return None
        return self.departure_time - self.arrival_time

    def to_json(self, n: int) -> dict:
        return {
            "id": self.peer_id,
            "arrival": self.arrival_time,
            "completion": self.completion_time,
            "departure": self.departure_time,
            "history": [[t, format_label(m, n)] for t, m in self.label_history],
        }


def write_peer_records(path, records: Sequence[PeerRecord], n: int) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_json(n)) + "\n")


class _Pools:
    """Peers currently holding each label; O(1) uniform pick and removal."""

    def __init__(self, size: int):
        self.members: list[list[int]] = [[] for _ in range(size)]
        self.where: dict[int, int] = {}

    def add(self, label: int, pid: int) -> None:
        self.where[pid] = len(self.members[label])
        self.members[label].append(pid)

    def pop_random(self, label: int, u: float) -> int:
        pool = self.members[label]
        k = min(int(u * len(pool)), len(pool) - 1)
        pid = pool[k]
        last = pool.pop()
        if last != pid:
            pool[k] = last
            self.where[last] = k
        del self.where[pid]
        return pid


def simulate_agents(
    params: ModelParams,
    x0,
    cfg: SimConfig,
    replica: int = 0,
    jumps: JumpSet | None = None,
) -> tuple[TrajectorySample, list[PeerRecord]]:
    """Direct-method simulation that also moves individual peers: each event
    picks its participants uniformly among peers holding the affected labels."""
    x0 = _check_state(params, x0)
    if jumps is None:
        jumps = build_jump_set(params)
    rng = replica_rng(cfg.seed, replica)
    full = params.full
    x = x0.astype(float)
    counts = x0.copy()
    pools = _Pools(params.size)
    records: list[PeerRecord] = []

    def new_peer(t: float, label: int, initial: bool) -> None:
        pid = len(records)
        rec = PeerRecord(pid, t, [(t, label)], initial=initial)
        if label == full:
            rec.completion_time = t
        records.append(rec)
        pools.add(label, pid)

    def move(pid: int, t: float, label: int) -> None:
        rec = records[pid]
        rec.label_history.append((t, label))
        if label == full and rec.completion_time is None:
            rec.completion_time = t
        pools.add(label, pid)

    for label in range(params.size):
        for _ in range(int(x0[label])):
            new_peer(0.0, label, True)

    rec_times = [0.0]
    rec_states = [x0.copy()]
    grid = cfg.grid() if cfg.record == "grid" else None
    gpos = 1
    grid_states = [x0.copy()]

    t = 0.0
    n_events = 0
    stop = "horizon"
    block = rng.random((4096, 4))
    bpos = 0
    while True:
        rates = jumps.rates(x)
        total = rates.sum()
        if total <= 0:
            stop = "absorbed"
            break
        if n_events >= cfg.max_events:
            stop = "event-cap"
            break
        if bpos == len(block):
            block = rng.random((4096, 4))
            bpos = 0
        u = block[bpos]
        bpos += 1
        t_next = t - np.log(1.0 - u[0]) / total
        if t_next > cfg.t_max:
            break
        if grid is not None:
            while gpos < len(grid) and grid[gpos] < t_next:
                grid_states.append(counts.copy())
                gpos += 1
        t = t_next
        cum = np.cumsum(rates)
        k = int(np.searchsorted(cum, u[1] * total, side="right"))
        k = min(k, len(rates) - 1)
        while rates[k] == 0:
            k -= 1
        jv = jumps[k]
        src = jv.source
        if jv.kind == "arrival":
            new_peer(t, src[0], False)
        elif jv.kind == "departure":
            pid = pools.pop_random(full, u[2])
            records[pid].departure_time = t
        elif jv.kind == "download":
            pid = pools.pop_random(src[0], u[2])
            move(pid, t, src[1])
        else:
            a, b, a2, b2 = src
            pa = pools.pop_random(a, u[2])
            pb = pools.pop_random(b, u[3])
            move(pa, t, a2)
            move(pb, t, b2)
        for m, d in jv.changes:
            counts[m] += d
            x[m] += d
        n_events += 1
        if grid is None:
            rec_times.append(t)
            rec_states.append(counts.copy())

    t_end = t if stop == "event-cap" else cfg.t_max
    if grid is None:
        if stop == "horizon" and rec_times[-1] < cfg.t_max:
            rec_times.append(cfg.t_max)
            rec_states.append(counts.copy())
        traj = TrajectorySample(np.array(rec_times), np.array(rec_states), stop, n_events)
    else:
        while gpos < len(grid) and (stop != "event-cap" or grid[gpos] <= t_end):
            grid_states.append(counts.copy())
            gpos += 1
        traj = TrajectorySample(grid[:gpos].copy(), np.array(grid_states), stop, n_events)
    return traj, records


# --------------------------------------------------------------------------
# Replicas and the fluid-scaled sequence


def run_replicas(fn: Callable[[int], object], n_replicas: int, workers: int = 1) -> list:
    """Evaluate ``fn(r)`` for ``r = 0..n_replicas-1`` and return results in replica order."""
    if workers <= 1:
        return [fn(r) for r in range(n_replicas)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_replicas)))


def largest_remainder_round(values) -> np.ndarray:
    """Round nonnegative reals to integers whose sum is ``round(sum(values))``."""
    v = np.asarray(values, dtype=float)
    base = np.floor(v)
    short = int(round(v.sum())) - int(base.sum())
    if short > 0:
        order = np.argsort(-(v - base), kind="stable")
        base[order[:short]] += 1
    return base.astype(np.int64)


def sup_error(traj: TrajectorySample, fluid_at: Callable[[np.ndarray], np.ndarray], N: float) -> float:
    """``sup_t |X_t/N - x_t|_1`` for an every-event trajectory; the fluid
    path is compared with the states on both sides of every jump."""
    t = traj.times
    x = fluid_at(t)
    scaled = traj.states / N
    err = np.abs(scaled - x).sum(axis=1).max()
    if len(t) > 1:
        before = np.abs(scaled[:-1] - x[1:]).sum(axis=1).max()
        err = max(err, before)
    return float(err)


@dataclass
class ScaledRow:
    N: int
    errors: np.ndarray

    @property
    def median(self) -> float:
        return float(np.median(self.errors))


@dataclass
class ScaledSequenceReport:
    T: float
    rows: list[ScaledRow] = field(default_factory=list)

    def medians(self) -> list[float]:
        return [r.median for r in self.rows]

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "rows": [{"N": r.N, "median": r.median, "errors": r.errors.tolist()} for r in self.rows],
        }


def run_scaled_sequence(
    params: ModelParams,
    x0_density,
    N_list: Sequence[int],
    cfg: SimConfig,
    n_replicas: int = 20,
    workers: int = 1,
) -> ScaledSequenceReport:
    """For each N simulate the system (N alpha, beta/N, gamma/N, delta) from
    ``round(N * x0_density)`` and measure the sup distance to the fluid path
    on ``[0, cfg.t_max]``."""
    x0_density = np.asarray(x0_density, dtype=float)
    fluid = integrate(params, x0_density, cfg.t_max)
    ev_cfg = SimConfig(cfg.seed, cfg.t_max, cfg.max_events, "events")
    report = ScaledSequenceReport(cfg.t_max)
    for idx, N in enumerate(N_list):
        pN = params.scaled(N)
        jumps = build_jump_set(pN)
        x0 = largest_remainder_round(N * x0_density)
        base = idx * 1_000_000

        def one(r: int, pN=pN, jumps=jumps, x0=x0, N=N) -> float:
            traj = simulate_ssa(pN, jumps, x0, ev_cfg, replica=base + r)
            return sup_error(traj, fluid.at, N)

        errs = run_replicas(one, n_replicas, workers)
        report.rows.append(ScaledRow(int(N), np.array(errs)))
    return report

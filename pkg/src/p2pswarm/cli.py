"""Command-line entry point.

Every task can be driven by flags alone, by a JSON scenario file
(``--config``), or by a named preset; flags override config fields, which
override preset values.  Reports go to stdout as JSON, tables and
trajectories to files in the output directory (``--out``, else the
``P2PSWARM_OUT`` environment variable, else the working directory).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from . import checks
from . import equilibria as E
from . import incentives as I
from .diffusion import empirical_fluctuations, moment_odes, simulate_diffusion
from .fluid import (
    closed_form_case1,
    closed_form_logistic,
    integrate,
    sir_final_size,
    sir_integral,
    vector_field,
)
from .labels import LabelError, format_label, parse_label
from .model import ConfigError, ModelParams, build_jump_set
from .stochastic import (
    SimConfig,
    run_scaled_sequence,
    simulate_agents,
    simulate_ssa,
    simulate_time_change,
    write_peer_records,
)

OUTPUT_ENV = "P2PSWARM_OUT"

TASKS = ("simulate", "integrate", "scale-check", "equilibrium", "settle", "compare", "little",
         "diffusion", "validate", "conjecture-scan", "closed-form")

PRESETS: dict[str, dict[str, Any]] = {
    "sir-n1-open": {
        "task": "equilibrium",
        "model": {"n": 1, "alpha": {"{}": 5.0}, "beta": 3.0, "delta": 4.0},
        "initial": [0.5, 2.0],
        "options": {"T": 20.0, "vector_field_grid": 21, "grid_max": 4.0},
        "seed": 0,
    },
    "case1-settle": {
        "task": "settle",
        "options": {"mode": "case1", "betas": [1, 2, 3, 4, 5], "epsilon": 0.001, "w0": 0.1,
                    "x0_points": 46, "x0_max": 0.9},
        "seed": 0,
    },
}


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# Scenario assembly


def _load_json(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(data) - {"task", "model", "initial", "options", "seed", "output", "threads"}
    if unknown:
        raise ConfigError(f"{path}: unknown field(s) {', '.join(sorted(unknown))}")
    return data


def _merge(base: dict, over: Mapping) -> dict:
    out = dict(base)
    for k, v in over.items():
        if isinstance(v, Mapping) and isinstance(out.get(k), Mapping):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def _flag_overrides(args: argparse.Namespace) -> dict:
    over: dict[str, Any] = {}
    model = {k: getattr(args, k) for k in ("n", "beta", "gamma", "delta") if getattr(args, k, None) is not None}
    if getattr(args, "alpha", None) is not None:
        try:
            model["alpha"] = json.loads(args.alpha)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--alpha: {exc.msg}") from None
    if model:
        over["model"] = model
    if getattr(args, "x0", None) is not None:
        over["initial"] = args.x0
    for k in ("seed", "out", "threads"):
        v = getattr(args, k, None)
        if v is not None:
            over["output" if k == "out" else k] = v
    opts = {}
    for k, v in vars(args).items():
        if k.startswith("opt_") and v is not None:
            opts[k[4:]] = v
    if opts:
        over["options"] = opts
    return over


def build_scenario(args: argparse.Namespace) -> dict:
    sc: dict[str, Any] = {}
    if getattr(args, "preset", None):
        sc = json.loads(json.dumps(PRESETS[args.preset]))
    if getattr(args, "config", None):
        sc = _merge(sc, _load_json(args.config))
    sc = _merge(sc, _flag_overrides(args))
    task = args.task if args.task != "run" else sc.get("task")
    if not task:
        raise UsageError("no task given (set 'task' in the config or use a subcommand)")
    if task not in TASKS:
        raise UsageError(f"unknown task {task!r}; choose from {', '.join(TASKS)}")
    sc["task"] = task  # a subcommand wins over the task field of a config or preset
    sc.setdefault("options", {})
    sc.setdefault("seed", 0)
    return sc


def _params(sc: dict) -> ModelParams:
    if "model" not in sc:
        raise ConfigError("model: required for this task")
    return ModelParams.from_config(sc["model"])


def _initial(sc: dict, params: ModelParams, required: bool = True):
    init = sc.get("initial")
    if init is None:
        if required:
            raise ConfigError("initial: required for this task")
        return None
    if isinstance(init, str):
        try:
            init = [float(v) for v in init.split(",")]
        except ValueError:
            raise ConfigError(f"initial: cannot parse {init!r}") from None
    if isinstance(init, Mapping):
        vec = np.zeros(params.size)
        for key, val in init.items():
            try:
                vec[parse_label(str(key), params.n)] = float(val)
            except (LabelError, ValueError) as exc:
                raise ConfigError(f"initial[{key!r}]: {exc}") from None
        return vec
    vec = np.asarray(init, dtype=float)
    if vec.shape != (params.size,):
        raise ConfigError(f"initial: expected {params.size} entries, got {vec.size}")
    if np.any(vec < 0):
        raise ConfigError("initial: entries must be nonnegative")
    return vec


def _opt(sc: dict, key: str, default=None, kind=float):
    v = sc["options"].get(key, default)
    if v is None:
        return None
    try:
        if kind is list:
            if isinstance(v, str):
                return [float(s) for s in v.split(",")]
            return [float(s) for s in v]
        return kind(v)
    except (TypeError, ValueError):
        raise ConfigError(f"options.{key}: cannot interpret {v!r}") from None


def _outdir(sc: dict) -> Path:
    d = Path(sc.get("output") or os.environ.get(OUTPUT_ENV) or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _threads(sc: dict) -> int:
    return max(1, int(sc.get("threads") or 1))


def _emit(report: Any, sc: dict, name: str) -> None:
    text = json.dumps(checks._jsonable(report), indent=2)
    print(text)
    (_outdir(sc) / f"{name}.json").write_text(text + "\n")


def _write_traj(path: Path, times, states, n: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [format_label(m, n) for m in range(1 << n)])
        for t, s in zip(times, states):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in s])


# --------------------------------------------------------------------------
# Tasks


def task_simulate(sc: dict) -> int:
    p = _params(sc)
    x0 = _initial(sc, p)
    method = _opt(sc, "method", "ssa", str)
    record = _opt(sc, "record", "events", str)
    cfg = SimConfig(seed=int(sc["seed"]), t_max=_opt(sc, "T", 1.0), record=record,
                    dt=_opt(sc, "dt", None), max_events=int(_opt(sc, "max_events", 10_000_000)))
    replica = int(_opt(sc, "replica", 0))
    out = _outdir(sc)
    if method == "agents":
        traj, records = simulate_agents(p, x0, cfg, replica)
        write_peer_records(out / "peers.jsonl", records, p.n)
    elif method in ("ssa", "time-change"):
        jumps = build_jump_set(p, allow_large=bool(sc["options"].get("allow_large", False)))
        fn = simulate_ssa if method == "ssa" else simulate_time_change
        traj = fn(p, jumps, x0, cfg, replica)
    else:
        raise ConfigError(f"options.method: expected ssa, time-change or agents, got {method!r}")
    traj.to_csv(out / "trajectory.csv", p.n)
    _emit({"stop_reason": traj.stop_reason, "events": traj.n_events,
           "final_time": float(traj.times[-1]), "final_state": traj.states[-1].tolist()}, sc, "simulate")
    return 0


def task_integrate(sc: dict) -> int:
    p = _params(sc)
    x0 = _initial(sc, p)
    T = _opt(sc, "T", 10.0)
    t = np.linspace(0, T, int(_opt(sc, "points", 201)))
    traj = integrate(p, x0, T, t_eval=t)
    _write_traj(_outdir(sc) / "fluid.csv", traj.times, traj.states, p.n)
    s = traj.stats
    _emit({"T": T, "final_state": traj.final.tolist(), "steps": s.steps, "rejected": s.rejected,
           "nfev": s.nfev, "clamped": s.clamped}, sc, "integrate")
    return 0


def task_scale_check(sc: dict) -> int:
    p = _params(sc)
    x0 = _initial(sc, p)
    Ns = [int(v) for v in _opt(sc, "N", [100, 1000, 10000], list)]
    rep = run_scaled_sequence(p, x0, Ns, SimConfig(seed=int(sc["seed"]), t_max=_opt(sc, "T", 5.0)),
                              n_replicas=int(_opt(sc, "replicas", 20)), workers=_threads(sc))
    _emit(rep.to_dict(), sc, "scale_check")
    return 0


def task_equilibrium(sc: dict) -> int:
    p = _params(sc)
    x0 = _initial(sc, p, required=False)
    guess = x0 if x0 is not None else np.ones(p.size)
    T = _opt(sc, "T", 0.0)
    if T and T > 0:
        # relax toward the attractor first so Newton starts in its basin
        guess = integrate(p, guess, T).final
    rep = E.find_equilibrium_general(p, guess)
    out = rep.to_dict()
    single_open = p.n == 1 and p.alpha[1] == 0 and p.alpha[0] > 0 and p.delta > 0
    if single_open:
        eq = E.equilibrium_n1_open(p.alpha[0], p.beta, p.delta)
        out["closed_form"] = {"x_star": [eq.x, eq.y], "spiral": eq.spiral,
                              "criterion": f"lam*beta = {p.alpha[0] * p.beta:g} vs 4*delta^2 = {4 * p.delta ** 2:g}"}
    k = int(_opt(sc, "vector_field_grid", 0))
    if k and p.n == 1:
        top = _opt(sc, "grid_max", 2 * float(np.max(rep.x_star)) + 1)
        _write_vector_field(_outdir(sc) / "vector_field.csv", p, np.linspace(0, top, k))
        if x0 is not None and T:
            t = np.linspace(0, T, 401)
            traj = integrate(p, x0, T, t_eval=t)
            _write_traj(_outdir(sc) / "fluid.csv", traj.times, traj.states, p.n)
    _emit(out, sc, "equilibrium")
    return 0


def _write_vector_field(path: Path, p: ModelParams, axis) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "vx", "vy"])
        for a in axis:
            for b in axis:
                v = vector_field(p, [a, b])
                w.writerow([repr(float(a)), repr(float(b)), repr(float(v[0])), repr(float(v[1]))])


def task_settle(sc: dict) -> int:
    mode = _opt(sc, "mode", "case1", str)
    if mode == "case1":
        betas = _opt(sc, "betas", [1, 2, 3, 4, 5], list)
        eps, w0 = _opt(sc, "epsilon", 0.001), _opt(sc, "w0", 0.1)
        xs = np.linspace(0, _opt(sc, "x0_max", 0.9), int(_opt(sc, "x0_points", 46)))
        xs = xs[xs < 1 - w0 + 1e-15]
        path = _outdir(sc) / "settling_case1.csv"
        rows = []
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x0"] + [f"tau_beta_{b:g}" for b in betas])
            for x0 in xs:
                taus = [E.settling_time_case1(float(x0), w0, b, eps) for b in betas]
                rows.append(taus)
                w.writerow([repr(float(x0))] + [repr(t) for t in taus])
        _emit({"epsilon": eps, "w0": w0, "betas": betas, "x0": xs.tolist(), "tau": rows,
               "table": str(path)}, sc, "settle")
        return 0
    if mode != "bounds":
        raise ConfigError(f"options.mode: expected case1 or bounds, got {mode!r}")
    p = _params(sc)
    x0 = _initial(sc, p)
    r = _opt(sc, "r", 0.1)
    T = _opt(sc, "T", 50.0)
    out: dict[str, Any] = {"r": r}
    traj = integrate(p, x0, T)
    if p.is_open:
        rep = E.find_equilibrium_general(p, traj.final)
        out["x_star"] = rep.x_star.tolist()
        out["measured"] = E.first_entry_time(traj, rep.x_star, r)
        out["lower_bound"] = E.settling_lower_bound(x0.sum(), p.alpha_norm, rep.x_star.sum(), r, p.delta)
    else:
        vbar = _opt(sc, "v_plus_bar", None)
        if vbar is None:
            vbar = E.v_plus_bar(p, x0.sum())
        out["v_plus_bar"] = vbar
        out["measured_seed_time"] = E.first_time_below(traj, p.full, r)
        try:
            out["upper_bound"] = E.settling_upper_bound(x0[p.full], vbar, p.delta, r)
        except E.BoundInapplicable as exc:
            out["upper_bound"] = None
            out["upper_bound_status"] = str(exc)
    _emit(out, sc, "settle")
    return 0


def task_compare(sc: dict) -> int:
    o = sc["options"]
    try:
        vals = [float(o[k]) for k in ("lam", "beta", "delta", "beta_t", "gamma_t")]
    except KeyError as exc:
        raise ConfigError(f"options.{exc.args[0]}: required") from None
    rep = I.compare_systems(*vals)
    out = rep.to_dict()
    if vals[3] >= vals[1]:
        out["lambda_threshold"] = I.lambda_threshold(vals[1], vals[2], vals[3], vals[4])
    _emit(out, sc, "compare")
    verdict = "splitting improves" if rep.improved else "splitting does not improve"
    print(f"verdict: {verdict} (|x*| = {rep.baseline.norm:.6g}, split |x*| = {rep.split.norm:.6g})")
    return 0


def task_little(sc: dict) -> int:
    p = _params(sc)
    x0 = _initial(sc, p)
    label = parse_label(str(_opt(sc, "label", "{}", str)), p.n)
    rep = I.littles_law_check(p, x0, SimConfig(seed=int(sc["seed"]), t_max=_opt(sc, "T", 100.0)),
                              _opt(sc, "burn_in", 0.5), label)
    _emit(rep.to_dict(), sc, "little")
    return 0


def task_diffusion(sc: dict) -> int:
    p = _params(sc)
    x0 = _initial(sc, p)
    T = _opt(sc, "T", 1.0)
    grid = np.linspace(0, T, int(_opt(sc, "points", 11)))
    jumps = build_jump_set(p)
    exact = moment_odes(p, jumps, x0, T, grid)
    em = simulate_diffusion(p, jumps, x0, T, int(_opt(sc, "paths", 1000)), _opt(sc, "dt", None),
                            seed=int(sc["seed"]), t_grid=grid)
    out_dir = _outdir(sc)
    exact.to_csv(out_dir / "covariance_moment_ode.csv", p.n)
    em.to_csv(out_dir / "covariance_euler_maruyama.csv", p.n)
    report: dict[str, Any] = {"t": grid.tolist(), "cov_moment_ode_final": exact.cov[-1].tolist(),
                              "cov_em_final": em.cov[-1].tolist()}
    N = _opt(sc, "N", None, int)
    if N:
        emp = empirical_fluctuations(p, x0, N, int(_opt(sc, "replicas", 1000)), grid,
                                     seed=int(sc["seed"]) + 1, workers=_threads(sc))
        emp.to_csv(out_dir / "covariance_empirical.csv", p.n)
        report["cov_empirical_final"] = emp.cov[-1].tolist()
    _emit(report, sc, "diffusion")
    return 0


def task_validate(sc: dict) -> int:
    only = sc["options"].get("only")
    numbers = None
    if only:
        numbers = {int(v) for v in (only.split(",") if isinstance(only, str) else only)}
    results = checks.run_all(numbers, workers=_threads(sc))
    for r in results:
        print(r.line(), flush=True)
    (_outdir(sc) / "validate.json").write_text(json.dumps([r.to_dict() for r in results], indent=2) + "\n")
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def task_conjecture_scan(sc: dict) -> int:
    """Compare the equilibrium population of the one-chunk swarm with that of
    n-chunk swarms (n = 3, 4) over a range of arrival rates."""
    o = sc["options"]
    beta, delta = float(o.get("beta", 1.0)), float(o.get("delta", 1.0))
    beta_t, gamma_t = float(o.get("beta_t", 2.0)), float(o.get("gamma_t", 1.0))
    lams = _opt(sc, "lams", [0.1, 0.3, 1.0, 3.0], list)
    ns = [int(v) for v in _opt(sc, "ns", [3, 4], list)]
    rows = []
    for n in ns:
        for lam in lams:
            p = ModelParams.build(n, {"{}": lam}, beta_t, gamma_t, delta)
            guess = integrate(p, np.full(p.size, lam / (delta * p.size)), _opt(sc, "T", 200.0)).final
            try:
                rep = E.find_equilibrium_general(p, guess)
                norm = float(rep.x_star.sum())
                stability = rep.stability
            except E.EquilibriumError as exc:
                norm, stability = math.nan, f"failed: {exc}"
            base = delta / beta + lam / delta
            rows.append({"n": n, "lam": lam, "baseline_norm": base, "split_norm": norm,
                         "improved": bool(norm < base), "stability": stability})
    _emit({"beta": beta, "delta": delta, "beta_t": beta_t, "gamma_t": gamma_t, "rows": rows},
          sc, "conjecture_scan")
    return 0


def task_closed_form(sc: dict) -> int:
    """Tables of the closed-form solutions: the single-chunk logistic, the
    two-chunk swarm without swaps, and the SIR orbit with its final size."""
    kind = _opt(sc, "kind", "logistic", str)
    beta = _opt(sc, "beta_rate", 1.0)
    T = _opt(sc, "T", 10.0)
    t = np.linspace(0, T, int(_opt(sc, "points", 101)))
    path = _outdir(sc) / f"closed_form_{kind}.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if kind == "logistic":
            x0 = _opt(sc, "x0_value", 0.5)
            w.writerow(["t", "x"])
            w.writerows([repr(float(a)), repr(float(b))] for a, b in zip(t, closed_form_logistic(x0, beta, t)))
            extra: dict[str, Any] = {}
        elif kind == "case1":
            x0, w0 = _opt(sc, "x0_value", 0.3), _opt(sc, "w0", 0.1)
            x, u, ww = closed_form_case1(x0, 1 - x0 - w0, w0, beta, t)
            w.writerow(["t", "x", "u", "w"])
            w.writerows([repr(float(v)) for v in row] for row in zip(t, x, u, ww))
            extra = {}
        elif kind == "sir":
            x0, y0 = _opt(sc, "x0_value", 1.0), _opt(sc, "y0", 0.1)
            delta = _opt(sc, "delta_rate", 1.0)
            xs = np.linspace(x0, sir_final_size(x0, y0, beta, delta), int(_opt(sc, "points", 101)))
            w.writerow(["x", "y"])
            w.writerows([repr(float(a)), repr(float(b))] for a, b in zip(xs, sir_integral(xs, x0, y0, beta, delta)))
            extra = {"final_size": float(xs[-1])}
        else:
            raise ConfigError(f"options.kind: expected logistic, case1 or sir, got {kind!r}")
    _emit({"kind": kind, "table": str(path), **extra}, sc, "closed_form")
    return 0


RUNNERS = {
    "simulate": task_simulate,
    "integrate": task_integrate,
    "scale-check": task_scale_check,
    "equilibrium": task_equilibrium,
    "settle": task_settle,
    "compare": task_compare,
    "little": task_little,
    "diffusion": task_diffusion,
    "validate": task_validate,
    "conjecture-scan": task_conjecture_scan,
    "closed-form": task_closed_form,
}


def run_scenario(sc: dict) -> int:
    return RUNNERS[sc["task"]](sc)


# --------------------------------------------------------------------------
# Argument parsing

_TASK_OPTIONS: dict[str, list[tuple[str, type, str]]] = {
    "simulate": [("T", float, "horizon"), ("method", str, "ssa, time-change or agents"),
                 ("record", str, "events or grid"), ("dt", float, "grid spacing"),
                 ("max_events", int, "event cap"), ("replica", int, "replica index")],
    "integrate": [("T", float, "horizon"), ("points", int, "output grid size")],
    "scale-check": [("T", float, "horizon"), ("N", str, "comma-separated N values"),
                    ("replicas", int, "replicas per N")],
    "equilibrium": [("T", float, "relaxation time before Newton"),
                    ("vector_field_grid", int, "points per axis of the n=1 vector-field table")],
    "settle": [("mode", str, "case1 or bounds"), ("epsilon", float, "case1 tolerance"),
               ("w0", float, "case1 initial seed fraction"), ("betas", str, "comma-separated"),
               ("r", float, "ball radius"), ("T", float, "horizon"), ("v_plus_bar", float, "seed production bound")],
    "compare": [("lam", float, "arrival rate"), ("beta", float, "one-chunk download rate"),
                ("delta", float, "seed departure rate"), ("beta_t", float, "two-chunk download rate"),
                ("gamma_t", float, "two-chunk swap rate")],
    "little": [("T", float, "horizon"), ("label", str, "arrival label, e.g. {} or {1}"),
               ("burn_in", float, "burn-in fraction")],
    "diffusion": [("T", float, "horizon"), ("paths", int, "Euler-Maruyama paths"), ("dt", float, "step"),
                  ("points", int, "report grid size"), ("N", int, "also sample the N-scaled chain"),
                  ("replicas", int, "chain replicas")],
    "validate": [("only", str, "comma-separated check numbers")],
    "conjecture-scan": [("lams", str, "comma-separated arrival rates"), ("ns", str, "chunk counts"),
                        ("beta", float, "one-chunk download rate"), ("delta", float, "departure rate"),
                        ("beta_t", float, "split download rate"), ("gamma_t", float, "split swap rate")],
    "closed-form": [("kind", str, "logistic, case1 or sir"), ("beta_rate", float, "download rate"),
                    ("delta_rate", float, "departure rate (sir)"), ("x0_value", float, "initial have-nothing density"),
                    ("y0", float, "initial seed density (sir)"), ("w0", float, "initial seed fraction (case1)"),
                    ("T", float, "horizon"), ("points", int, "table rows")],
}

_MODEL_FLAGS_SKIP = {"compare", "conjecture-scan", "validate", "closed-form"}


def _add_common(sp: argparse.ArgumentParser, task: str) -> None:
    sp.add_argument("--config", help="JSON scenario file")
    sp.add_argument("--preset", choices=sorted(PRESETS), help="named scenario")
    sp.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or .)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int, help="cap on worker threads")
    if task not in _MODEL_FLAGS_SKIP:
        sp.add_argument("--n", type=int, help="number of chunks")
        sp.add_argument("--alpha", help='arrival rates as JSON, e.g. \'{"{}": 5}\'')
        sp.add_argument("--beta", type=float)
        sp.add_argument("--gamma", type=float)
        sp.add_argument("--delta", type=float)
        sp.add_argument("--x0", help="initial state, comma-separated in label order")
    for name, kind, help_ in _TASK_OPTIONS.get(task, []):
        sp.add_argument(f"--{name.replace('_', '-')}", dest=f"opt_{name}", type=kind, help=help_)


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="p2pswarm", description="Chunked file-swarm models: "
                                 "exact simulation, fluid limit, equilibria and fluctuations.")
    sub = ap.add_subparsers(dest="task", metavar="TASK")
    run = sub.add_parser("run", help="run the task named in a scenario file or preset")
    _add_common(run, "run")
    for task in TASKS:
        sp = sub.add_parser(task)
        _add_common(sp, task)
    return ap


def main(argv=None) -> int:
    ap = make_parser()
    args = ap.parse_args(argv)
    if not args.task:
        ap.print_usage(sys.stderr)
        print("p2pswarm: error: a task is required", file=sys.stderr)
        return 2
    sc: dict = {}
    try:
        sc = build_scenario(args)
        return run_scenario(sc)
    except UsageError as exc:
        ap.print_usage(sys.stderr)
        print(f"p2pswarm: error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"p2pswarm: config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError) as exc:
        print(f"p2pswarm: {sc.get('task', '?')} failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

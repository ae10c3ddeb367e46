"""Benchmark harness: build a problem, run a method, emit CSV traces.

Trace CSV columns are ``k,grad_calls,alpha,fallback,f_gap,x_err,time_ns``;
row ``k`` describes iterate ``x_k`` and ``grad_calls`` is the cumulative
number of gradient evaluations spent to produce it. Empty cells mean "not
applicable" (no alpha for the restarted scheme, no reference point).
"""

import csv
import io
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import problems
from .cubic import CubicParams, eta
from .errors import ConfigError
from .reference import cgls, reference_solution
from .solvers import (SolverConfig, TraceRecord, nesterov_adaptive,
                      nesterov_const_step, nesterov_L_restart)
from .vecops import norm2

logger = logging.getLogger(__name__)

PROBLEMS = ("ridge", "bowl", "bpdn", "quadratic")
METHODS = ("nl", "nmul", "adaptive1", "adaptive2", "adaptive3", "adaptive4", "cgls")
F_THRESHOLDS = (1e-6, 1e-9, 1e-12)
X_THRESHOLDS = (1e-8,)
NL_RESTARTS = (10, 100, 1000, None)
TRACE_HEADER = ["k", "grad_calls", "alpha", "fallback", "f_gap", "x_err", "time_ns"]

# problem parameter name -> (spec class field, type)
_PARAMS = {
    "ridge": {"m": ("m", int), "n": ("n", int), "lambda": ("lam", float),
              "sigma_max": ("sigma_max", float), "sigma_min": ("sigma_min", float)},
    "bowl": {"n": ("n", int), "tau": ("tau_ball", float)},
    "bpdn": {"m": ("m", int), "n": ("n", int), "lambda": ("lam", float),
             "tau": ("tau_huber", float), "sigma": ("sigma_scvx", float),
             "nnz": ("nnz", int), "noise": ("noise_level", float)},
    "quadratic": {"n": ("n", int), "kappa": ("kappa", float)},
}


@dataclass
class ExperimentConfig:
    problem: str = "bowl"
    method: str = "nmul"
    restart_period: Optional[int] = None
    seed: int = 0
    tol_grad: float = 1e-10
    max_grad_calls: int = 20_000
    out: Optional[str] = None
    traj: Optional[str] = None
    traj_coords: Optional[Tuple[int, int]] = None
    timing: bool = True
    params: Dict[str, str] = field(default_factory=dict)
    cache_dir: Optional[str] = None
    stop_at_thresholds: bool = True

    def validate(self):
        if self.problem not in PROBLEMS:
            raise ConfigError(f"unknown problem {self.problem!r}; choose from {PROBLEMS}")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.method == "cgls" and self.problem not in ("ridge", "quadratic"):
            raise ConfigError("cgls only applies to ridge and quadratic problems")
        if self.restart_period is not None and self.restart_period < 1:
            raise ConfigError("restart period must be >= 1")
        if not self.tol_grad > 0 or self.max_grad_calls < 1:
            raise ConfigError("need tol_grad > 0 and max_grad_calls >= 1")
        unknown = set(self.params) - set(_PARAMS[self.problem])
        if unknown:
            raise ConfigError(f"unknown parameters for {self.problem}: {sorted(unknown)}")
        return self


def problem_spec(cfg):
    kw = {}
    for key, raw in cfg.params.items():
        name, typ = _PARAMS[cfg.problem][key]
        try:
            kw[name] = typ(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    try:
        if cfg.problem == "ridge":
            return problems.RidgeSpec(seed=cfg.seed, **kw)
        if cfg.problem == "bowl":
            return problems.BowlSpec(**kw)
        if cfg.problem == "bpdn":
            return problems.BpdnSpec(seed=cfg.seed, **kw)
        return problems.QuadSpec(seed=cfg.seed, **kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def start_point(problem):
    if problem.kind == "bowl":
        return problems.bowl_start(problem.spec)
    return np.zeros(problem.objective.dim)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    trace: List[TraceRecord]
    summary: dict
    trajectory: List[np.ndarray] = field(default_factory=list)
    fallback_rate: float = 0.0


def calls_to_threshold(trace, column, threshold):
    """``(grad_calls, time_ns)`` at the first row below `threshold`, else None.

    ``f_gap`` must be strictly below, ``x_err`` at or below the threshold.
    """
    for r in trace:
        val = getattr(r, column)
        if val is None:
            continue
        if (val < threshold) if column == "f_gap" else (val <= threshold):
            return r.grad_calls, r.elapsed_ns
    return None


def rate_bound_violations(trace, problem, ref, x0):
    """Count rows violating ``f(x_k) - f* <= (1 - sqrt(rho))^k (f(x0) - f* + mu/2 ||x0 - x*||^2)``."""
    obj = problem.objective
    s = math.sqrt(obj.rho)
    c0 = float(obj.value(x0)) - ref.f_ref + 0.5 * obj.mu * norm2(x0 - ref.x_ref) ** 2
    bad = 0
    for r in trace:
        if r.f_gap is not None and r.f_gap > (1.0 - s) ** r.k * c0:
            bad += 1
    return bad


def _solve(cfg, problem, ref, x0, restart):
    obj = problem.objective
    f_stop, x_stop = _stops(cfg, problem)
    scfg = SolverConfig(
        tol_grad=cfg.tol_grad, max_grad_calls=cfg.max_grad_calls,
        heuristic=int(cfg.method[-1]) if cfg.method.startswith("adaptive") else None,
        restart_period=restart, record_trajectory=bool(cfg.traj), timing=cfg.timing,
        stop_f_gap=f_stop, stop_x_err=x_stop,
    )
    if cfg.method == "nmul":
        return nesterov_const_step(obj, x0, scfg, ref)
    if cfg.method == "nl":
        return nesterov_L_restart(obj, x0, scfg, ref)
    return nesterov_adaptive(obj, x0, scfg, ref)


def _stops(cfg, problem):
    """Early-stop targets: the tightest reported thresholds."""
    if not cfg.stop_at_thresholds:
        return None, None
    # the bowl's x-error is not reported, so only f_gap gates its runs
    x_stop = None if problem.kind == "bowl" else min(X_THRESHOLDS)
    return min(F_THRESHOLDS), x_stop


def _run_cgls(cfg, problem, ref):
    """CGLS on the least-squares form; one iteration counts as one gradient call."""
    obj = problem.objective
    if problem.kind == "ridge":
        A, b, lam = problem.data["A"], problem.data["b"], problem.spec.lam
    else:
        # 0.5 x'Qx - c'x  ==  0.5 ||R x - R^-T c||^2 + const with Q = R'R
        R = np.linalg.cholesky(problem.data["Q"]).T
        A, b, lam = R, np.linalg.solve(R.T, problem.data["c"]), 0.0
    trace = [_cgls_row(0, np.zeros(obj.dim), obj, ref, 0)]
    traj = [np.zeros(obj.dim)] if cfg.traj else []
    state = {"elapsed": 0, "t": time.perf_counter_ns()}
    f_stop, x_stop = _stops(cfg, problem)

    def cb(k, x):
        now = time.perf_counter_ns()
        state["elapsed"] += now - state["t"]
        row = _cgls_row(k, x, obj, ref, state["elapsed"] if cfg.timing else 0)
        trace.append(row)
        if cfg.traj:
            traj.append(x.copy())
        state["t"] = time.perf_counter_ns()
        return (f_stop is not None and row.f_gap < f_stop
                and (x_stop is None or row.x_err <= x_stop))

    tol = cfg.tol_grad / max(norm2(A.T @ b), 1e-300)
    cgls(A, b, lam, tol=tol, max_iters=cfg.max_grad_calls, callback=cb)
    return trace, traj


def _cgls_row(k, x, obj, ref, elapsed):
    f_gap = float(obj.value(x)) - ref.f_ref
    return TraceRecord(k, k, None, False, f_gap, norm2(x - ref.x_ref), elapsed)


def _summarize(cfg, problem, trace, extra=None):
    summary = {"problem": cfg.problem, "method": cfg.method,
               "restart": "" if cfg.restart_period is None else cfg.restart_period,
               "seed": cfg.seed,
               "grad_calls": trace[-1].grad_calls if trace else 0,
               "iterations": trace[-1].k if trace else 0}
    for thr in F_THRESHOLDS:
        hit = calls_to_threshold(trace, "f_gap", thr)
        summary[f"calls_f{thr:.0e}"] = "" if hit is None else hit[0]
        summary[f"time_ns_f{thr:.0e}"] = "" if hit is None else hit[1]
    if problem.kind != "bowl":
        for thr in X_THRESHOLDS:
            hit = calls_to_threshold(trace, "x_err", thr)
            summary[f"calls_x{thr:.0e}"] = "" if hit is None else hit[0]
    if extra:
        summary.update(extra)
    return summary


def format_summary(summary):
    return " ".join(f"{k}={v}" for k, v in summary.items())


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def trace_csv(trace):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for r in trace:
        w.writerow([r.k, r.grad_calls, _fmt(r.alpha), _fmt(r.fallback), _fmt(r.f_gap),
                    _fmt(r.x_err), r.elapsed_ns])
    return buf.getvalue()


def trajectory_projection(trajectory, i, j):
    """Rows ``(k, x_(i), x_(j))`` with 1-based coordinate indices."""
    if not trajectory:
        raise ConfigError("no trajectory recorded")
    n = len(trajectory[0])
    for c in (i, j):
        if not 1 <= c <= n:
            raise ConfigError(f"coordinate {c} out of range 1..{n}")
    return [(k, float(x[i - 1]), float(x[j - 1])) for k, x in enumerate(trajectory)]


def trajectory_csv(rows, i, j):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", f"x{i}", f"x{j}"])
    for k, a, b in rows:
        w.writerow([k, repr(a), repr(b)])
    return buf.getvalue()


def prepare(cfg):
    """Build the problem and its reference for a validated config."""
    cfg.validate()
    problem = problems.build(problem_spec(cfg), cache_dir=cfg.cache_dir)
    ref = reference_solution(problem, cache_dir=cfg.cache_dir)
    return problem, ref


def run_experiment(cfg, prepared=None):
    """Run one method on one problem; write the trace/trajectory files if configured."""
    cfg.validate()
    problem, ref = prepared if prepared is not None else prepare(cfg)
    x0 = start_point(problem)
    extra = {}
    if cfg.method == "cgls":
        trace, traj = _run_cgls(cfg, problem, ref)
        rate = 0.0
    else:
        res = _solve(cfg, problem, ref, x0, cfg.restart_period)
        trace, traj = res.trace, res.trajectory
        iters = max(len(trace) - 1, 1)
        rate = res.fallbacks / iters
        extra["fallbacks"] = res.fallbacks
        extra["converged"] = int(res.converged)
        if cfg.method == "nmul" and problem.kind == "quadratic":
            extra["bound_violations"] = rate_bound_violations(trace, problem, ref, x0)
    summary = _summarize(cfg, problem, trace, extra)
    result = ExperimentResult(cfg, trace, summary, traj, rate)
    if cfg.out:
        with open(cfg.out, "w", newline="") as fh:
            fh.write(trace_csv(trace))
    if cfg.traj:
        i, j = cfg.traj_coords or (1, problem.objective.dim)
        with open(cfg.traj, "w", newline="") as fh:
            fh.write(trajectory_csv(trajectory_projection(traj, i, j), i, j))
    return result


def _rank_key(result, metric):
    thresholds = F_THRESHOLDS if metric == "f_gap" else X_THRESHOLDS
    key = []
    for thr in sorted(thresholds):
        hit = calls_to_threshold(result.trace, metric, thr)
        key.append(math.inf if hit is None else hit[0])
    return tuple(key)


def _best_restart(cfg, prepared, metric):
    """Best of the ``NL_RESTARTS`` schedules, ties going to the earlier schedule.

    A schedule that has not reached the tightest threshold by the best count
    seen so far cannot win, so later runs get that count as their budget.
    Longer periods are tried first since they usually win on these problems.
    """
    runs = {}
    budget = cfg.max_grad_calls
    for p in sorted(NL_RESTARTS, key=lambda p: math.inf if p is None else -p):
        r = run_experiment(replace(cfg, restart_period=p, out=None, traj=None,
                                   max_grad_calls=budget), prepared)
        runs[p] = r
        first = _rank_key(r, metric)[0]
        if first < budget:
            budget = max(int(first), 1)
    best = min(NL_RESTARTS, key=lambda p: _rank_key(runs[p], metric))
    return runs[best]


COMPARE_HEADER = ["method", "restart", "calls_f1e-06", "calls_f1e-09", "calls_f1e-12",
                  "calls_x1e-08", "fallback_rate", "grad_calls"]


def compare(cfgs, metric="f_gap"):
    """Run several methods on one problem instance.

    ``nl`` configs without a restart period are run for every period in
    ``{10, 100, 1000, none}`` and only the best run (fewest gradient calls to
    the tightest threshold of `metric`) is kept.

    Returns ``(rows, results)``; each row is a dict keyed by ``COMPARE_HEADER``.
    """
    if len(cfgs) < 2:
        raise ConfigError("compare needs at least two configs")
    first = cfgs[0]
    for c in cfgs[1:]:
        if (c.problem, c.seed, c.params) != (first.problem, first.seed, first.params):
            raise ConfigError("compared configs must share problem, parameters and seed")
    prepared = prepare(first)
    rows, results = [], []
    for c in cfgs:
        if c.method == "nl" and c.restart_period is None:
            best = _best_restart(c, prepared, metric)
        else:
            best = run_experiment(c, prepared)
        results.append(best)
        s = best.summary
        rows.append({
            "method": c.method,
            "restart": s["restart"],
            "calls_f1e-06": s["calls_f1e-06"],
            "calls_f1e-09": s["calls_f1e-09"],
            "calls_f1e-12": s["calls_f1e-12"],
            "calls_x1e-08": s.get("calls_x1e-08", ""),
            "fallback_rate": repr(best.fallback_rate),
            "grad_calls": s["grad_calls"],
        })
    return rows, results


def compare_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, COMPARE_HEADER, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def eta_samples_csv(rho, d, count=201):
    """Samples of the feasibility cubic on [0, 1] for plotting."""
    p = CubicParams(rho, d)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["alpha", "eta"])
    for a in np.linspace(0.0, 1.0, count):
        w.writerow([repr(float(a)), repr(eta(p, float(a)))])
    return buf.getvalue()

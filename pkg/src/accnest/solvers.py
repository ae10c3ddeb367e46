"""Accelerated gradient methods for mu-strongly convex, L-smooth objectives.

Three methods are provided:

* :func:`nesterov_const_step` -- constant momentum ``(1 - sqrt(rho)) / (1 + sqrt(rho))``.
* :func:`nesterov_L_restart` -- the ``t_k`` momentum scheme for L-smooth
  functions, optionally restarted every ``restart_period`` iterations.
* :func:`nesterov_adaptive` -- constant-step scheme where each iteration tries
  a larger ``alpha_k`` proposed from the feasibility cubic, validates it with
  the trial gradient and falls back to ``sqrt(rho)`` when validation fails.

Cost is counted in gradient calls. Function values are only evaluated for
telemetry and for the optional estimate-sequence tracker; they are never
charged to the gradient budget and never feed back into the iterates.
"""

import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .cubic import CubicParams, Heuristic, propose_alpha
from .errors import ConfigError, DivergenceError
from .vecops import norm2, project_ball

__all__ = [
    "SolverConfig", "IterState", "TraceRecord", "EstimateTracker",
    "EstimateRecord", "SolveResult", "estimate_tracker_update",
    "adaptive_iteration", "nesterov_const_step", "nesterov_L_restart",
    "nesterov_adaptive", "ALPHA_CAP",
]

# validation's right side vanishes at alpha = 1, so a trial there always fails
ALPHA_CAP = 1.0 - 1e-12


@dataclass
class SolverConfig:
    tol_grad: float = 1e-10
    max_grad_calls: int = 100_000
    heuristic: Optional[Heuristic] = None
    restart_period: Optional[int] = None
    track_estimate_sequence: bool = False
    record_trajectory: bool = False
    timing: bool = True
    # optional early stop once the trace reaches these targets (needs a reference)
    stop_f_gap: Optional[float] = None
    stop_x_err: Optional[float] = None

    def __post_init__(self):
        if not self.tol_grad > 0:
            raise ConfigError("tol_grad must be positive")
        if self.max_grad_calls < 1:
            raise ConfigError("max_grad_calls must be >= 1")
        if self.restart_period is not None and self.restart_period < 1:
            raise ConfigError("restart_period must be >= 1")
        if self.heuristic is not None:
            self.heuristic = Heuristic.parse(self.heuristic)


@dataclass
class IterState:
    """Iterate ``x`` together with the step that produced it.

    ``y`` is the point where the gradient ``grad_y`` was taken, ``alpha`` the
    parameter used to form ``y`` and ``v`` the estimate-sequence center at
    that time, so that ``x = y - grad_y / L`` (projected when constrained).
    """

    x: np.ndarray
    v: np.ndarray
    y: np.ndarray
    alpha: float
    grad_y: np.ndarray
    grad_y_norm: float


@dataclass
class TraceRecord:
    k: int
    grad_calls: int
    alpha: Optional[float]
    fallback: bool
    f_gap: Optional[float]
    x_err: Optional[float]
    elapsed_ns: int


@dataclass(frozen=True)
class EstimateTracker:
    """Running ``lambda_k``, ``phi*_k`` and center ``v_k`` of the estimate sequence."""

    lambda_k: float
    phi_star: float
    v: np.ndarray

    @classmethod
    def start(cls, f_x0, x0):
        return cls(1.0, float(f_x0), np.array(x0, dtype=float))


@dataclass
class EstimateRecord:
    k: int
    lambda_k: float
    phi_star: float
    f_x: float
    v_err: Optional[float] = None


@dataclass
class SolveResult:
    state: IterState
    trace: List[TraceRecord]
    grad_calls: int
    iterations: int
    converged: bool
    estimates: List[EstimateRecord] = field(default_factory=list)
    trajectory: List[np.ndarray] = field(default_factory=list)

    @property
    def x(self):
        return self.state.x

    @property
    def fallbacks(self):
        return sum(1 for r in self.trace if r.fallback)


def estimate_tracker_update(t, alpha, y, grad_y, f_y, mu):
    """Advance the estimate sequence by one step.

    ``t.v`` must be the center before the update: ``phi*_{k+1}`` is formed with
    ``v_k`` and only then does the center move to ``v_{k+1}``.
    """
    a = float(alpha)
    v = t.v
    yv = y - v
    phi = ((1.0 - a) * t.phi_star + a * f_y - a * a / (2.0 * mu) * float(grad_y @ grad_y)
           + a * (1.0 - a) * (0.5 * mu * float(yv @ yv) - float(grad_y @ yv)))
    v_new = (1.0 - a) * v + a * y - (a / mu) * grad_y
    return EstimateTracker((1.0 - a) * t.lambda_k, phi, v_new)


class _BudgetExhausted(Exception):
    pass


class _Run:
    """Gradient accounting, timing and telemetry shared by the drivers."""

    def __init__(self, obj, cfg, ref):
        self.obj = obj
        self.cfg = cfg
        self.ref = ref
        self.calls = 0
        self.trace = []
        self.estimates = []
        self.trajectory = []
        self.tracker = None
        self.reached = False
        self._elapsed = 0
        self._resume = time.perf_counter_ns()

    def grad(self, y):
        if self.calls >= self.cfg.max_grad_calls:
            raise _BudgetExhausted
        g = self.obj.grad(y)
        self.calls += 1
        if not np.all(np.isfinite(g)):
            self._pause()
            raise DivergenceError(f"non-finite gradient after {self.calls} calls", self.trace)
        return g

    def step(self, y, g):
        x = y - g / self.obj.lip
        if self.obj.feasible_radius is not None:
            x = project_ball(x, self.obj.feasible_radius)
        return x

    def _pause(self):
        if self.cfg.timing:
            self._elapsed += time.perf_counter_ns() - self._resume

    def _unpause(self):
        self._resume = time.perf_counter_ns()

    def track(self, alpha, y, g):
        """Advance the tracker with the accepted step; costs one value call."""
        if self.cfg.track_estimate_sequence:
            self._pause()
            f_y = float(self.obj.value(y))
            self.tracker = estimate_tracker_update(self.tracker, alpha, y, g, f_y, self.obj.mu)
            self._unpause()

    def record(self, k, x, alpha, fallback=False):
        self._pause()
        cfg, ref = self.cfg, self.ref
        f_x = None
        if ref is not None or cfg.track_estimate_sequence:
            f_x = float(self.obj.value(x))
            if not math.isfinite(f_x):
                raise DivergenceError(f"non-finite objective at iteration {k}", self.trace)
        f_gap = x_err = None
        if ref is not None:
            f_gap = f_x - ref.f_ref
            if ref.x_ref is not None:
                x_err = norm2(x - ref.x_ref)
        self.trace.append(TraceRecord(k, self.calls, alpha, bool(fallback), f_gap, x_err,
                                      self._elapsed if cfg.timing else 0))
        if cfg.stop_f_gap is not None or cfg.stop_x_err is not None:
            self.reached = (
                (cfg.stop_f_gap is None or (f_gap is not None and f_gap < cfg.stop_f_gap))
                and (cfg.stop_x_err is None or (x_err is not None and x_err <= cfg.stop_x_err)))
        if cfg.record_trajectory:
            self.trajectory.append(np.array(x, dtype=float))
        if cfg.track_estimate_sequence:
            if self.tracker is None:
                self.tracker = EstimateTracker.start(f_x, x)
            v_err = None
            if ref is not None and ref.x_ref is not None:
                v_err = norm2(self.tracker.v - ref.x_ref)
            self.estimates.append(EstimateRecord(k, self.tracker.lambda_k,
                                                 self.tracker.phi_star, f_x, v_err))
        self._unpause()

    def finish(self, state, k, converged):
        return SolveResult(state, self.trace, self.calls, k, converged,
                           self.estimates, self.trajectory)


def _check_x0(obj, x0):
    x0 = np.array(x0, dtype=float)
    if x0.shape != (obj.dim,):
        raise ConfigError(f"x0 has shape {x0.shape}, expected ({obj.dim},)")
    return x0


def nesterov_const_step(obj, x0, cfg, ref=None):
    """Constant-step accelerated gradient method.

    Iterates ``x_{k+1} = y_k - f'(y_k)/L`` and
    ``y_{k+1} = x_{k+1} + q (x_{k+1} - x_k)`` with ``q = (1-s)/(1+s)``,
    ``s = sqrt(mu/L)``, one gradient call per iteration, until
    ``||f'(y_k)|| <= tol_grad`` or the gradient budget runs out.

    `ref`, if given, is any object with ``x_ref`` and ``f_ref`` attributes and
    fills the ``f_gap`` and ``x_err`` trace columns.
    """
    x0 = _check_x0(obj, x0)
    run = _Run(obj, cfg, ref)
    s = math.sqrt(obj.rho)
    q = (1.0 - s) / (1.0 + s)
    x = y = x0
    state = IterState(x0, x0, x0, s, np.zeros_like(x0), math.inf)
    run.record(0, x0, None)
    k = 0
    converged = False
    while not run.reached:
        try:
            g = run.grad(y)
        except _BudgetExhausted:
            break
        gn = norm2(g)
        if gn <= cfg.tol_grad:
            state = IterState(x, state.v, y, s, g, gn)
            converged = True
            break
        x_new = run.step(y, g)
        v = x + (y - x) * ((1.0 + s) / s)
        run.track(s, y, g)
        state = IterState(x_new, v, y, s, g, gn)
        y = x_new + q * (x_new - x)
        x = x_new
        k += 1
        run.record(k, x, s)
    run._pause()
    return run.finish(state, k, converged)


def nesterov_L_restart(obj, x0, cfg, ref=None):
    """Momentum scheme for L-smooth functions with optional periodic restart.

    ``t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2`` with ``t_0 = 1``; every
    ``restart_period`` iterations the momentum is dropped (``t <- 1``,
    ``y <- x``). Uses ``L`` only, never ``mu``.
    """
    x0 = _check_x0(obj, x0)
    run = _Run(obj, cfg, ref)
    period = cfg.restart_period
    x = y = x0
    t = 1.0
    state = IterState(x0, x0, x0, math.nan, np.zeros_like(x0), math.inf)
    run.record(0, x0, None)
    k = 0
    converged = False
    while not run.reached:
        try:
            g = run.grad(y)
        except _BudgetExhausted:
            break
        gn = norm2(g)
        if gn <= cfg.tol_grad:
            state = IterState(x, x, y, math.nan, g, gn)
            converged = True
            break
        x_new = run.step(y, g)
        state = IterState(x_new, x_new, y, math.nan, g, gn)
        k += 1
        if period is not None and k % period == 0:
            t = 1.0
            y = x_new
        else:
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            y = x_new + ((t - 1.0) / t_new) * (x_new - x)
            t = t_new
        x = x_new
        run.record(k, x, None)
    run._pause()
    return run.finish(state, k, converged)


def adaptive_iteration(obj, state, heuristic, grad=None):
    """One iteration of the adaptive-alpha method.

    Parameters
    ----------
    obj : Objective
    state : IterState
        ``x_k`` plus the previous step (``v_{k-1}``, ``y_{k-1}``,
        ``alpha_{k-1}``, ``f'(y_{k-1})``).
    heuristic : Heuristic
        Rule for the trial parameter.
    grad : callable, optional
        Gradient to use instead of ``obj.grad`` (lets a driver count calls).

    Returns
    -------
    new_state : IterState
        ``x_{k+1}`` with ``v_k``, the accepted ``y_k``, ``alpha_k`` and
        ``f'(y_k)``.
    fallback : bool
        Whether the trial parameter was rejected.
    grad_calls : int
        1, or 2 after a fallback.
    """
    if not state.grad_y_norm > 0:
        raise ValueError("previous gradient norm must be positive; the run has converged")
    grad = obj.grad if grad is None else grad
    mu, lip = obj.mu, obj.lip
    rho = obj.rho
    s = math.sqrt(rho)
    a = state.alpha
    x = state.x
    v = (1.0 - a) * state.v + a * state.y - (a / mu) * state.grad_y
    xv = x - v
    xv2 = float(xv @ xv)
    d = mu * mu * xv2 / (state.grad_y_norm ** 2)
    if not math.isfinite(d):
        raise DivergenceError("non-finite cubic ratio")
    trial = propose_alpha(CubicParams(min(rho, 1.0), d), heuristic)
    trial = max(s, min(trial, ALPHA_CAP))
    y = (x + trial * v) / (1.0 + trial)
    g = grad(y)
    g2 = float(g @ g)
    lhs = (trial * trial - rho) * g2
    rhs = mu * mu * xv2 * trial * (1.0 - trial) / (1.0 + trial)
    if lhs <= rhs:
        alpha, fallback, used = trial, False, 1
    else:
        alpha, fallback, used = s, True, 2
        y = (x + s * v) / (1.0 + s)
        g = grad(y)
        g2 = float(g @ g)
    x_new = y - g / lip
    if obj.feasible_radius is not None:
        x_new = project_ball(x_new, obj.feasible_radius)
    return IterState(x_new, v, y, alpha, g, math.sqrt(g2)), fallback, used


def nesterov_adaptive(obj, x0, cfg, ref=None):
    """Constant-step method with an adaptive ``alpha_k``.

    Starts with ``v_0 = y_0 = x_0``, ``alpha_0 = sqrt(rho)`` and one plain
    gradient step, then repeats :func:`adaptive_iteration` until
    ``||f'(y_k)|| <= tol_grad`` or the gradient budget runs out. Each
    iteration costs one or two gradient calls.
    """
    if cfg.heuristic is None:
        raise ConfigError("adaptive method needs a heuristic")
    x0 = _check_x0(obj, x0)
    run = _Run(obj, cfg, ref)
    s = math.sqrt(obj.rho)
    run.record(0, x0, None)
    state = IterState(x0, x0, x0, s, np.zeros_like(x0), math.inf)
    try:
        g = run.grad(x0)
    except _BudgetExhausted:
        run._pause()
        return run.finish(state, 0, False)
    gn = norm2(g)
    if gn <= cfg.tol_grad:
        run._pause()
        return run.finish(IterState(x0, x0, x0, s, g, gn), 0, True)
    state = IterState(run.step(x0, g), x0, x0, s, g, gn)
    run.track(s, x0, g)
    k = 1
    run.record(k, state.x, s)
    converged = False
    while not run.reached:
        try:
            new, fallback, _ = adaptive_iteration(obj, state, cfg.heuristic, grad=run.grad)
        except _BudgetExhausted:
            break
        if new.grad_y_norm <= cfg.tol_grad:
            # keep x_k; the small gradient was found at y_k
            state = IterState(state.x, new.v, new.y, new.alpha, new.grad_y, new.grad_y_norm)
            converged = True
            break
        run.track(new.alpha, new.y, new.grad_y)
        state = new
        k += 1
        run.record(k, state.x, state.alpha, fallback)
    run._pause()
    return run.finish(state, k, converged)

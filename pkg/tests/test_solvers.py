import math

import numpy as np
import pytest

from accnest import solvers
from accnest.cubic import Heuristic
from accnest.errors import ConfigError, DivergenceError
from accnest.problems import Objective
from accnest.solvers import (EstimateTracker, IterState, SolverConfig, adaptive_iteration,
                             estimate_tracker_update, nesterov_adaptive,
                             nesterov_const_step, nesterov_L_restart)

ALL_HEURISTICS = list(Heuristic)


def diag_quadratic(q, lip=None, mu=None):
    """f(x) = 1/2 sum q_i x_i^2, with mu/L taken from the spectrum unless given."""
    q = np.asarray(q, dtype=float)

    def value(x):
        return 0.5 * np.sum(q.reshape((-1,) + (1,) * (x.ndim - 1)) * x * x, axis=0)

    def grad(x):
        return q.reshape((-1,) + (1,) * (x.ndim - 1)) * x

    return Objective(value, grad, mu=mu if mu is not None else q.min(),
                     lip=lip if lip is not None else q.max(), dim=q.size)


def test_config_validation():
    with pytest.raises(ConfigError):
        SolverConfig(tol_grad=0.0)
    with pytest.raises(ConfigError):
        SolverConfig(max_grad_calls=0)
    with pytest.raises(ConfigError):
        SolverConfig(restart_period=0)
    assert SolverConfig(heuristic="h2").heuristic is Heuristic.H2
    with pytest.raises(ConfigError):
        nesterov_adaptive(diag_quadratic([1.0]), [1.0], SolverConfig())


def test_const_step_one_step_on_isotropic():
    obj = diag_quadratic(np.ones(5))
    res = nesterov_const_step(obj, np.arange(5.0), SolverConfig(tol_grad=1e-12))
    assert res.converged
    assert res.iterations == 1
    assert not res.x.any()
    assert res.grad_calls == 2


def test_immediate_return_at_stationary_point():
    obj = diag_quadratic([1.0, 3.0])
    for fn, cfg in [(nesterov_const_step, SolverConfig()),
                    (nesterov_L_restart, SolverConfig()),
                    (nesterov_adaptive, SolverConfig(heuristic=1))]:
        res = fn(obj, np.zeros(2), cfg)
        assert res.converged and res.iterations == 0 and res.grad_calls == 1


def test_wrong_start_shape():
    with pytest.raises(ConfigError):
        nesterov_const_step(diag_quadratic([1.0, 2.0]), np.zeros(3), SolverConfig())


def test_const_step_matches_scalar_recurrence():
    q, lip = 0.3, 2.0
    obj = diag_quadratic([q], lip=lip, mu=q)
    s = math.sqrt(q / lip)
    mom = (1 - s) / (1 + s)
    x, y, xs = 1.0, 1.0, []
    for _ in range(25):
        x_new = y - q * y / lip
        y = x_new + mom * (x_new - x)
        x = x_new
        xs.append(x)
    res = nesterov_const_step(obj, [1.0], SolverConfig(max_grad_calls=25, record_trajectory=True))
    got = [float(p[0]) for p in res.trajectory[1:]]
    np.testing.assert_allclose(got, xs, rtol=1e-14, atol=1e-300)


def test_t_sequence_prefix():
    # independent recurrence values
    t = [1.0]
    for _ in range(3):
        t.append((1 + math.sqrt(1 + 4 * t[-1] ** 2)) / 2)
    assert t[1] == pytest.approx((1 + math.sqrt(5)) / 2, rel=1e-15)
    assert t[2] == pytest.approx(2.19353, abs=5e-6)
    assert t[3] == pytest.approx(2.74979, abs=5e-6)

    # the solver's momentum on a scalar quadratic reproduces the same sequence
    q, lip = 0.2, 1.0
    obj = diag_quadratic([q], lip=lip, mu=q)
    x, y, xs = 1.0, 1.0, []
    for k in range(3):
        x_new = y - q * y / lip
        y = x_new + ((t[k] - 1) / t[k + 1]) * (x_new - x)
        x = x_new
        xs.append(x)
    res = nesterov_L_restart(obj, [1.0], SolverConfig(max_grad_calls=3, record_trajectory=True))
    np.testing.assert_allclose([p[0] for p in res.trajectory[1:]], xs, rtol=1e-15)


def test_restart_every_step_is_gradient_descent():
    gen = np.random.default_rng(0)
    q = gen.uniform(0.1, 4.0, size=12)
    obj = diag_quadratic(q)
    x0 = gen.normal(size=12)
    res = nesterov_L_restart(obj, x0, SolverConfig(restart_period=1, max_grad_calls=40,
                                                   record_trajectory=True))
    x = x0.copy()
    for k in range(1, 40):
        x = x - q * x / obj.lip
        np.testing.assert_allclose(res.trajectory[k], x, rtol=1e-14)


def test_nl_isotropic_converges_fast():
    obj = diag_quadratic(np.ones(10))
    res = nesterov_L_restart(obj, np.ones(10), SolverConfig(tol_grad=1e-12))
    assert res.converged and res.grad_calls <= 60


def test_adaptive_isotropic_one_step():
    obj = diag_quadratic(np.ones(4))
    res = nesterov_adaptive(obj, np.ones(4), SolverConfig(tol_grad=1e-12, heuristic=4))
    assert res.converged and res.iterations == 1
    assert not res.x.any()


def _state_with_x_equal_v(obj, x0):
    s = math.sqrt(obj.rho)
    g = obj.grad(x0)
    x = x0 - (s / obj.mu) * g
    return IterState(x, x0, x0, s, g, float(np.linalg.norm(g)))


@pytest.mark.parametrize("h", ALL_HEURISTICS)
def test_adaptive_iteration_zero_ratio_uses_sqrt_rho(h):
    obj = diag_quadratic([0.5, 1.0, 8.0])
    state = _state_with_x_equal_v(obj, np.array([1.0, -2.0, 0.5]))
    new, fallback, used = adaptive_iteration(obj, state, h)
    assert new.alpha == pytest.approx(math.sqrt(obj.rho), rel=1e-15)
    assert not fallback and used == 1
    np.testing.assert_allclose(new.v, state.x, atol=1e-15)


def _mid_run_state(obj, x0, steps=5):
    res = nesterov_const_step(obj, x0, SolverConfig(max_grad_calls=steps, timing=False))
    return res.state


def test_adaptive_iteration_trial_at_cap_falls_back(monkeypatch):
    obj = diag_quadratic([0.05, 1.0, 3.0])
    state = _mid_run_state(obj, np.array([1.0, 1.0, 1.0]))
    monkeypatch.setattr(solvers, "propose_alpha", lambda params, h: 1.0)
    calls = []

    def counted(y):
        calls.append(y.copy())
        return obj.grad(y)

    new, fallback, used = adaptive_iteration(obj, state, Heuristic.H4, grad=counted)
    s = math.sqrt(obj.rho)
    assert fallback and used == 2 and len(calls) == 2
    assert new.alpha == s
    np.testing.assert_allclose(new.y, (state.x + s * new.v) / (1 + s), rtol=1e-14)
    # first call was at the capped trial
    cap = solvers.ALPHA_CAP
    np.testing.assert_allclose(calls[0], (state.x + cap * new.v) / (1 + cap), rtol=1e-12)


def test_adaptive_iteration_trial_below_floor_is_clamped(monkeypatch):
    obj = diag_quadratic([0.05, 1.0, 3.0])
    state = _mid_run_state(obj, np.array([1.0, -1.0, 2.0]))
    monkeypatch.setattr(solvers, "propose_alpha", lambda params, h: 0.0)
    new, fallback, used = adaptive_iteration(obj, state, Heuristic.H1)
    assert new.alpha == math.sqrt(obj.rho) and not fallback and used == 1


def test_adaptive_iteration_requires_positive_gradient():
    obj = diag_quadratic([1.0, 2.0])
    st = IterState(np.ones(2), np.ones(2), np.ones(2), 0.5, np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        adaptive_iteration(obj, st, Heuristic.H1)


def test_tracker_degenerate_and_geometric():
    t0 = EstimateTracker.start(3.0, np.array([1.0, 2.0]))
    y, g = np.array([0.5, 0.1]), np.array([0.3, -0.2])
    t1 = estimate_tracker_update(t0, 0.0, y, g, 7.0, 0.4)
    assert t1.phi_star == t0.phi_star and t1.lambda_k == 1.0
    np.testing.assert_array_equal(t1.v, t0.v)
    a, t = 0.3, t0
    for _ in range(6):
        t = estimate_tracker_update(t, a, y, g, 1.0, 0.4)
    assert t.lambda_k == pytest.approx(0.7 ** 6, rel=1e-14)


def test_tracker_matches_minimized_combination():
    """phi*_{k+1} is the minimum of (1-a) phi_k + a (linear model + mu/2 ||.-y||^2)."""
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    mu = float(np.linalg.eigvalsh(Q)[0])
    f = lambda x: 0.5 * x @ Q @ x
    t = EstimateTracker.start(f(np.array([1.0, -1.0])), np.array([1.0, -1.0]))
    phi_star, v = t.phi_star, t.v.copy()
    for y, a in [(np.array([0.7, -0.4]), 0.35), (np.array([0.2, 0.1]), 0.5)]:
        g = Q @ y

        def combo(x, phi_star=phi_star, v=v):
            return ((1 - a) * (phi_star + 0.5 * mu * (x - v) @ (x - v))
                    + a * (f(y) + g @ (x - y) + 0.5 * mu * (x - y) @ (x - y)))

        # the combination has Hessian mu*I; one Newton step from 0 finds its minimizer
        grad0 = (1 - a) * mu * (0 - v) + a * (g + mu * (0 - y))
        xmin = -grad0 / mu
        t = estimate_tracker_update(t, a, y, g, f(y), mu)
        assert t.phi_star == pytest.approx(combo(xmin), rel=1e-13)
        np.testing.assert_allclose(t.v, xmin, rtol=1e-13)
        phi_star, v = t.phi_star, t.v.copy()


def _estimate_checks(res, obj, ref, x0):
    f0 = float(obj.value(x0))
    slack = 1e-9 * max(1.0, abs(f0))
    phi0_star = f0 + 0.5 * obj.mu * np.linalg.norm(x0 - ref.x_ref) ** 2 - ref.f_ref
    assert len(res.estimates) == res.iterations + 1
    for e in res.estimates:
        assert e.f_x <= e.phi_star + slack
        assert e.f_x - ref.f_ref <= e.lambda_k * phi0_star + slack
        assert e.v_err ** 2 <= 2.0 / obj.mu * e.lambda_k * phi0_star + slack
        assert 0 < e.lambda_k <= 1


@pytest.mark.parametrize("h", [None] + ALL_HEURISTICS)
def test_estimate_invariants_ridge(small_ridge, h):
    prob, ref = small_ridge
    obj = prob.objective
    x0 = np.zeros(obj.dim)
    cfg = SolverConfig(max_grad_calls=300, heuristic=h, track_estimate_sequence=True)
    fn = nesterov_const_step if h is None else nesterov_adaptive
    _estimate_checks(fn(obj, x0, cfg, ref), obj, ref, x0)


def test_rate_bound_small(quad50):
    prob, ref = quad50
    obj = prob.objective
    x0 = np.zeros(obj.dim)
    res = nesterov_const_step(obj, x0, SolverConfig(max_grad_calls=400), ref)
    s = math.sqrt(obj.rho)
    c0 = obj.value(x0) - ref.f_ref + 0.5 * obj.mu * np.linalg.norm(x0 - ref.x_ref) ** 2
    for r in res.trace:
        assert r.f_gap <= (1 - s) ** r.k * c0


@pytest.mark.parametrize("method,h", [("const", None), ("nl", None)] +
                         [("adaptive", h) for h in ALL_HEURISTICS])
def test_gradient_accounting(small_ridge, method, h):
    prob, ref = small_ridge
    obj = prob.objective
    cfg = SolverConfig(max_grad_calls=400, heuristic=h, restart_period=50)
    fn = {"const": nesterov_const_step, "nl": nesterov_L_restart,
          "adaptive": nesterov_adaptive}[method]
    res = fn(obj, np.zeros(obj.dim), cfg, ref)
    steps = np.diff([r.grad_calls for r in res.trace])
    if method == "adaptive":
        assert set(steps) <= {1, 2}
        assert all(r.alpha >= math.sqrt(obj.rho) for r in res.trace[1:])
        fb = [r.fallback for r in res.trace[1:]]
        assert all((d == 2) == f for d, f in zip(steps[1:], fb[1:]))
    else:
        assert set(steps) == {1}
        assert not any(r.fallback for r in res.trace)
    assert res.grad_calls <= 400


def test_telemetry_does_not_change_iterates(small_ridge):
    prob, ref = small_ridge
    obj = prob.objective
    x0 = np.zeros(obj.dim)
    plain = nesterov_adaptive(obj, x0, SolverConfig(max_grad_calls=200, heuristic=3, timing=False))
    loud = nesterov_adaptive(obj, x0, SolverConfig(max_grad_calls=200, heuristic=3,
                                                   track_estimate_sequence=True,
                                                   record_trajectory=True), ref)
    assert plain.x.tobytes() == loud.x.tobytes()
    assert [r.alpha for r in plain.trace] == [r.alpha for r in loud.trace]


def test_budget_exhaustion_is_not_convergence():
    obj = diag_quadratic(np.linspace(0.01, 1.0, 20))
    res = nesterov_adaptive(obj, np.ones(20), SolverConfig(max_grad_calls=7, heuristic=2))
    assert not res.converged and res.grad_calls <= 7


def test_divergence_carries_trace():
    calls = {"n": 0}

    def grad(x):
        calls["n"] += 1
        return x if calls["n"] < 4 else np.full_like(x, np.nan)

    obj = Objective(lambda x: 0.5 * np.sum(x * x, axis=0), grad, mu=0.5, lip=2.0, dim=3)
    with pytest.raises(DivergenceError) as info:
        nesterov_const_step(obj, np.ones(3), SolverConfig(), ref=None)
    assert len(info.value.trace) == 4


def test_projection_keeps_iterates_in_ball():
    obj = diag_quadratic([1.0, 2.0])
    shifted = Objective(lambda x: obj.value(x - 5.0), lambda x: obj.grad(x - 5.0),
                        mu=1.0, lip=2.0, dim=2, feasible_radius=1.0)
    res = nesterov_adaptive(shifted, np.zeros(2), SolverConfig(max_grad_calls=200, heuristic=1,
                                                                record_trajectory=True))
    assert all(np.linalg.norm(x) <= 1.0 + 1e-12 for x in res.trajectory)

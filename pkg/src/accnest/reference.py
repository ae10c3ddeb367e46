"""Reference solutions and the CGLS least-squares baseline."""

import logging
import math
import os
from dataclasses import dataclass

import numpy as np

from . import storage
from .errors import NumericalError
from .problems import spec_key
from .solvers import SolverConfig, nesterov_const_step
from .vecops import norm2

logger = logging.getLogger(__name__)

__all__ = ["CglsResult", "cgls", "ReferenceSolution", "reference_solution"]


@dataclass
class CglsResult:
    x: np.ndarray
    iterations: int
    converged: bool


def cgls(A, b, lam=0.0, tol=1e-12, max_iters=None, callback=None):
    """Conjugate gradients on ``(A^T A + lam I) x = A^T b`` without forming ``A^T A``.

    Each iteration applies ``A`` once and ``A^T`` once, the cost of one
    gradient of ``0.5 ||Ax - b||^2 + lam/2 ||x||^2``. Stops when the
    gradient norm drops to ``tol * ||A^T b||``.

    `callback(k, x)` is called after every iteration; a truthy return value
    stops the iteration early (reported as not converged).
    """
    if lam < 0:
        raise ValueError("lam must be non-negative")
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    n = A.shape[1]
    if max_iters is None:
        max_iters = 10 * n
    x = np.zeros(n)
    r = b.copy()
    s = A.T @ r
    stop = tol * norm2(s)
    p = s.copy()
    gam = float(s @ s)
    if math.sqrt(gam) <= stop:
        return CglsResult(x, 0, True)
    for k in range(1, max_iters + 1):
        q = A @ p
        delta = float(q @ q) + lam * float(p @ p)
        if not delta > 0:
            raise NumericalError("CGLS breakdown: non-positive curvature")
        step = gam / delta
        x += step * p
        r -= step * q
        s = A.T @ r - lam * x
        gam_new = float(s @ s)
        if callback is not None and callback(k, x):
            return CglsResult(x, k, False)
        if math.sqrt(gam_new) <= stop:
            # the recursive residual drifts; confirm with the true one and
            # restart from it if the confirmation fails
            r = b - A @ x
            s = A.T @ r - lam * x
            gam_new = float(s @ s)
            if math.sqrt(gam_new) <= stop:
                return CglsResult(x, k, True)
            p = s.copy()
            gam = gam_new
            continue
        p = s + (gam_new / gam) * p
        gam = gam_new
    return CglsResult(x, max_iters, False)


@dataclass
class ReferenceSolution:
    x_ref: np.ndarray
    f_ref: float
    method: str  # "analytic" | "cgls" | "tight_nesterov"
    tol_used: float


def _certify(obj, x, tol, scale):
    gn = norm2(obj.grad(x))
    return gn <= tol * scale, gn


def _compute(problem, tol):
    kind = problem.kind
    obj = problem.objective
    if kind == "bowl":
        x = np.zeros(obj.dim)
        return ReferenceSolution(x, 0.0, "analytic", 0.0)
    if kind == "quadratic":
        Q, c = problem.data["Q"], problem.data["c"]
        x = np.linalg.solve(Q, c)
        return ReferenceSolution(x, float(obj.value(x)), "analytic", 0.0)
    if kind == "ridge":
        tol = 1e-12 if tol is None else tol
        res = cgls(problem.data["A"], problem.data["b"], problem.spec.lam, tol=tol)
        if not res.converged:
            raise NumericalError("CGLS reference did not converge")
        return ReferenceSolution(res.x, float(obj.value(res.x)), "cgls", tol)
    if kind == "bpdn":
        tol = 1e-10 if tol is None else tol
        x0 = np.zeros(obj.dim)
        g0 = norm2(obj.grad(x0))
        cfg = SolverConfig(tol_grad=tol * g0, max_grad_calls=500_000, timing=False)
        res = nesterov_const_step(obj, x0, cfg)
        if not res.converged:
            raise NumericalError("tight Nesterov reference did not converge")
        # the certified point is the last y, where the stopping test was taken
        x = res.state.y
        return ReferenceSolution(x, float(obj.value(x)), "tight_nesterov", tol)
    raise ValueError(f"no reference for problem kind {kind!r}")


def _scale(problem):
    obj = problem.objective
    if problem.kind == "ridge":
        A, b = problem.data["A"], problem.data["b"]
        return norm2(A.T @ b)
    return norm2(obj.grad(np.zeros(obj.dim)))


def reference_solution(problem, cache_dir=None, tol=None):
    """Reference minimizer for a built problem.

    Ridge uses CGLS (tol 1e-12), the bowl its analytic minimizer 0, the
    quadratic a direct solve, and BPDN the constant-step method run to
    ``||f'|| <= 1e-10 ||f'(0)||``. With `cache_dir`, iterative references
    are stored on disk and re-certified by a gradient evaluation when loaded.
    """
    if problem.kind in ("bowl", "quadratic") or cache_dir is None:
        return _compute(problem, tol)
    tol_eff = tol if tol is not None else (1e-12 if problem.kind == "ridge" else 1e-10)
    path = os.path.join(cache_dir, f"ref-{problem.kind}-{spec_key(problem.spec)}-{tol_eff:.3e}.bin")
    obj = problem.objective
    if os.path.exists(path):
        x = storage.read_vector(path)
        if x.shape == (obj.dim,):
            ok, gn = _certify(obj, x, tol_eff, _scale(problem))
            if ok:
                method = "cgls" if problem.kind == "ridge" else "tight_nesterov"
                return ReferenceSolution(x, float(obj.value(x)), method, tol_eff)
            logger.warning("stale reference cache %s (gradient norm %.3e); recomputing", path, gn)
    ref = _compute(problem, tol_eff)
    storage.write_matrix(path, ref.x_ref)
    return ref

"""Objective interface and the benchmark problems.

All value/gradient functions accept either a single point of shape ``(n,)``
or a batch of points stored as columns of an ``(n, B)`` array; batch mode is
used by the certifier.
"""

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import rng, storage
from .vecops import POWER_INFLATION, power_method_sq_norm, project_ball

__all__ = [
    "Objective", "Problem", "RidgeSpec", "BowlSpec", "BpdnSpec", "QuadSpec",
    "ridge_build", "ridge_value_grad", "bowl_value_grad", "bowl_objective",
    "huber_value_grad", "bpdn_build", "bpdn_value_grad", "quadratic_build",
    "build", "spec_key", "CertReport", "scvx_lipschitz_certify",
]


@dataclass
class Objective:
    """A function in the class of mu-strongly convex, L-smooth functions."""

    value: Callable
    grad: Callable
    mu: float
    lip: float
    dim: int
    feasible_radius: Optional[float] = None
    name: str = ""

    def __post_init__(self):
        if not (0.0 < self.mu <= self.lip):
            raise ValueError(f"need 0 < mu <= lip, got mu={self.mu}, lip={self.lip}")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.feasible_radius is not None and not self.feasible_radius > 0:
            raise ValueError("feasible_radius must be positive")

    @property
    def rho(self):
        return self.mu / self.lip


@dataclass
class Problem:
    """A built benchmark: the objective plus the data it was made from."""

    kind: str
    spec: object
    objective: Objective
    data: dict = field(default_factory=dict)


@dataclass(frozen=True)
class RidgeSpec:
    m: int = 1200
    n: int = 2000
    lam: float = 1.0
    sigma_max: float = 100.0
    sigma_min: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be positive")


@dataclass(frozen=True)
class BowlSpec:
    n: int = 500
    tau_ball: float = 4.0

    def __post_init__(self):
        if self.n < 1 or not self.tau_ball > 0:
            raise ValueError("need n >= 1 and tau_ball > 0")


@dataclass(frozen=True)
class BpdnSpec:
    m: int = 800
    n: int = 2000
    lam: float = 0.05
    tau_huber: float = 1e-4
    sigma_scvx: float = 0.05
    nnz: int = 40
    noise_level: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if min(self.lam, self.tau_huber, self.sigma_scvx) <= 0:
            raise ValueError("lam, tau_huber and sigma_scvx must be positive")
        if not 0 <= self.nnz <= self.n:
            raise ValueError("need 0 <= nnz <= n")


@dataclass(frozen=True)
class QuadSpec:
    """Random SPD quadratic ``0.5 x'Qx - c'x`` with eigenvalues in [1, kappa]."""

    n: int = 50
    kappa: float = 1e4
    seed: int = 0


def spec_key(spec):
    """Stable short hash of a spec, used for cache file names."""
    payload = json.dumps([type(spec).__name__, asdict(spec)], sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _colwise(b, x):
    return b[:, None] if x.ndim == 2 else b


def _sumsq(x):
    return np.sum(x * x, axis=0)


def _orthonormal(gen, rows, cols):
    g = rng.standard_normal(gen, (rows, cols))
    q, r = np.linalg.qr(g)
    diag = np.abs(np.diag(r))
    if diag.min() <= 1e-10 * diag.max():
        return None
    return q * np.sign(np.diag(r))


# -- ridge regression ---------------------------------------------------------

def ridge_value_grad(A, b, lam, x):
    x = np.asarray(x, dtype=float)
    r = A @ x - _colwise(b, x)
    value = 0.5 * _sumsq(r) + 0.5 * lam * _sumsq(x)
    grad = A.T @ r + lam * x
    return value, grad


def _ridge_objective(A, b, lam, lip, name="ridge"):
    def value(x):
        x = np.asarray(x, dtype=float)
        r = A @ x - _colwise(b, x)
        return 0.5 * _sumsq(r) + 0.5 * lam * _sumsq(x)

    def grad(x):
        x = np.asarray(x, dtype=float)
        return A.T @ (A @ x - _colwise(b, x)) + lam * x

    return Objective(value, grad, mu=lam, lip=lip, dim=A.shape[1], name=name)


def ridge_build(spec):
    """Ridge regression with prescribed singular values.

    ``A = U diag(s) V^T`` with ``s`` linearly spaced from `sigma_max` down to
    `sigma_min`; ``L`` comes from an inflated power-method estimate.
    """
    r = min(spec.m, spec.n)
    for attempt in range(4):
        seed = spec.seed + attempt
        U = _orthonormal(rng.stream(seed, rng.STREAM_U), spec.m, r)
        V = _orthonormal(rng.stream(seed, rng.STREAM_V), spec.n, r)
        if U is not None and V is not None:
            break
    else:
        raise np.linalg.LinAlgError("rank-deficient orthonormal factors after 3 retries")
    s = np.linspace(spec.sigma_max, spec.sigma_min, r)
    A = (U * s) @ V.T
    b = rng.standard_normal(rng.stream(seed, rng.STREAM_B), (spec.m,))
    return _ridge_problem(spec, A, b)


def _ridge_problem(spec, A, b):
    est = power_method_sq_norm(lambda v: A @ (A.T @ v), A.shape[0], seed=spec.seed)
    lip = POWER_INFLATION * est + spec.lam
    obj = _ridge_objective(A, b, spec.lam, lip)
    return Problem("ridge", spec, obj, {"A": A, "b": b, "norm_sq_est": est})


# -- anisotropic bowl ---------------------------------------------------------

def bowl_value_grad(n, x):
    x = np.asarray(x, dtype=float)
    if x.shape[0] != n:
        raise ValueError(f"expected length {n}, got {x.shape[0]}")
    w = np.arange(1, n + 1, dtype=float)
    if x.ndim == 2:
        w = w[:, None]
    x2 = x * x
    value = np.sum(w * x2 * x2, axis=0) + 0.5 * np.sum(x2, axis=0)
    grad = 4.0 * w * x2 * x + x
    return value, grad


def bowl_objective(spec):
    """``sum_i i x_i^4 + ||x||^2 / 2`` on the ball of radius `tau_ball`."""
    n = spec.n
    lip = 12.0 * n * spec.tau_ball ** 2 + 1.0
    return Objective(
        value=lambda x: bowl_value_grad(n, x)[0],
        grad=lambda x: bowl_value_grad(n, x)[1],
        mu=1.0, lip=lip, dim=n, feasible_radius=spec.tau_ball, name="bowl",
    )


def bowl_start(spec):
    return np.full(spec.n, spec.tau_ball / math.sqrt(spec.n))


# -- smoothed basis pursuit denoising -------------------------------------------

def huber_value_grad(tau_huber, x):
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    outer = ax >= tau_huber
    h = np.where(outer, ax - 0.5 * tau_huber, x * x / (2.0 * tau_huber))
    g = np.where(outer, np.sign(x), x / tau_huber)
    return np.sum(h, axis=0), g


def bpdn_value_grad(A, b, lam, tau_huber, sigma_scvx, x):
    x = np.asarray(x, dtype=float)
    r = A @ x - _colwise(b, x)
    hv, hg = huber_value_grad(tau_huber, x)
    value = 0.5 * _sumsq(r) + lam * hv + 0.5 * sigma_scvx * _sumsq(x)
    grad = A.T @ r + lam * hg + sigma_scvx * x
    return value, grad


def bpdn_build(spec):
    """Smoothed BPDN with a Gaussian sensing matrix scaled by ``1/sqrt(n)``.

    The noise is scaled by ``||A x_true|| / sqrt(m)``.
    """
    m, n = spec.m, spec.n
    A = rng.standard_normal(rng.stream(spec.seed, rng.STREAM_A), (m, n)) / math.sqrt(n)
    support = rng.stream(spec.seed, rng.STREAM_SUPPORT).permutation(n)[:spec.nnz]
    signs = rng.stream(spec.seed, rng.STREAM_SIGNS).integers(0, 2, spec.nnz) * 2.0 - 1.0
    x_true = np.zeros(n)
    x_true[support] = signs
    clean = A @ x_true
    e = rng.standard_normal(rng.stream(spec.seed, rng.STREAM_NOISE), (m,))
    e *= spec.noise_level * np.linalg.norm(clean) / math.sqrt(m)
    b = clean + e
    return _bpdn_problem(spec, A, b, x_true)


def _bpdn_problem(spec, A, b, x_true):
    est = power_method_sq_norm(lambda v: A @ (A.T @ v), A.shape[0], seed=spec.seed)
    lam, tau, sig = spec.lam, spec.tau_huber, spec.sigma_scvx
    lip = POWER_INFLATION * est + lam / tau + sig
    obj = Objective(
        value=lambda x: bpdn_value_grad(A, b, lam, tau, sig, x)[0],
        grad=lambda x: bpdn_value_grad(A, b, lam, tau, sig, x)[1],
        mu=sig, lip=lip, dim=spec.n, name="bpdn",
    )
    return Problem("bpdn", spec, obj, {"A": A, "b": b, "x_true": x_true, "norm_sq_est": est})


# -- random SPD quadratic -----------------------------------------------------

def quadratic_build(spec):
    n = spec.n
    gen = rng.stream(spec.seed, rng.STREAM_QUAD)
    W, _ = np.linalg.qr(rng.standard_normal(gen, (n, n)))
    eig = np.linspace(1.0, spec.kappa, n)
    Q = (W * eig) @ W.T
    Q = 0.5 * (Q + Q.T)
    c = rng.standard_normal(gen, (n,))

    def value(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.sum(x * (Q @ x), axis=0) - np.sum(_colwise(c, x) * x, axis=0)

    def grad(x):
        x = np.asarray(x, dtype=float)
        return Q @ x - _colwise(c, x)

    obj = Objective(value, grad, mu=float(eig[0]), lip=float(eig[-1]), dim=n, name="quadratic")
    return Problem("quadratic", spec, obj, {"Q": Q, "c": c})


# -- dispatch and caching -----------------------------------------------------

_BUILDERS = {
    RidgeSpec: "ridge",
    BowlSpec: "bowl",
    BpdnSpec: "bpdn",
    QuadSpec: "quadratic",
}


def build(spec, cache_dir=None):
    """Build the problem for `spec`, reusing cached matrices when available."""
    if isinstance(spec, BowlSpec):
        return Problem("bowl", spec, bowl_objective(spec), {})
    if isinstance(spec, QuadSpec):
        return quadratic_build(spec)
    if not isinstance(spec, (RidgeSpec, BpdnSpec)):
        raise TypeError(f"unknown problem spec {spec!r}")
    if cache_dir is None:
        return ridge_build(spec) if isinstance(spec, RidgeSpec) else bpdn_build(spec)

    base = os.path.join(cache_dir, f"{_BUILDERS[type(spec)]}-{spec_key(spec)}")
    names = ["A", "b"] if isinstance(spec, RidgeSpec) else ["A", "b", "x_true"]
    paths = {k: f"{base}-{k}.bin" for k in names}
    if all(os.path.exists(p) for p in paths.values()):
        arrs = {k: storage.read_matrix(p) for k, p in paths.items()}
        if isinstance(spec, RidgeSpec):
            return _ridge_problem(spec, arrs["A"], arrs["b"].reshape(-1))
        return _bpdn_problem(spec, arrs["A"], arrs["b"].reshape(-1), arrs["x_true"].reshape(-1))
    prob = ridge_build(spec) if isinstance(spec, RidgeSpec) else bpdn_build(spec)
    for k, p in paths.items():
        storage.write_matrix(p, prob.data[k])
    return prob


# -- membership certificate ---------------------------------------------------

@dataclass
class CertReport:
    samples: int
    lip_violations: int
    scvx_violations: int
    worst_lip_margin: float
    worst_scvx_margin: float

    @property
    def passed(self):
        return self.lip_violations == 0 and self.scvx_violations == 0


def _sample_points(gen, obj, count, box):
    n = obj.dim
    if obj.feasible_radius is None:
        return gen.uniform(-box, box, size=(n, count))
    # uniform in the ball
    d = rng.standard_normal(gen, (n, count))
    d /= np.linalg.norm(d, axis=0)
    radius = obj.feasible_radius * gen.random(count) ** (1.0 / n)
    return d * radius


def _project_cols(obj, X):
    if obj.feasible_radius is None:
        return X
    nrm = np.linalg.norm(X, axis=0)
    scale = np.minimum(1.0, obj.feasible_radius / np.maximum(nrm, 1e-300))
    return X * scale


def scvx_lipschitz_certify(obj, samples=10_000, seed=0, slack=1e-9, box=10.0,
                           batch=500, steepen=3):
    """Check the Lipschitz-gradient and strong-convexity inequalities on samples.

    Pairs ``(x, y)`` are drawn from the feasible ball, or from the box
    ``[-box, box]^n`` when unconstrained. In every other pair the difference
    direction is first pushed towards high curvature with `steepen`
    gradient-difference power steps, so that an understated ``L`` is
    actually exposed rather than hidden by random directions.

    Margins are relative; a pair violates an inequality when its margin is
    below ``-slack``. The worst margin over all pairs is reported.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    gen = rng.stream(seed, rng.STREAM_SAMPLES)
    lip_bad = scvx_bad = 0
    worst_lip = worst_scvx = math.inf
    done = 0
    while done < samples:
        cnt = min(batch, samples - done)
        X = _sample_points(gen, obj, cnt, box)
        Y = _sample_points(gen, obj, cnt, box)
        D = Y - X
        gx = obj.grad(X)
        half = cnt // 2
        if steepen and half:
            Dh = D[:, :half]
            length = np.linalg.norm(Dh, axis=0)
            for _ in range(steepen):
                u = Dh / np.maximum(np.linalg.norm(Dh, axis=0), 1e-300)
                Dh = obj.grad(X[:, :half] + 1e-3 * u) - gx[:, :half]
            u = Dh / np.maximum(np.linalg.norm(Dh, axis=0), 1e-300)
            Y[:, :half] = _project_cols(obj, X[:, :half] + u * length)
            D = Y - X
        gy = obj.grad(Y)
        fx = obj.value(X)
        fy = obj.value(Y)
        dn = np.linalg.norm(D, axis=0)
        keep = dn > 0
        dg = np.linalg.norm(gy - gx, axis=0)
        bound = obj.lip * dn
        lip_margin = np.where(keep, (bound - dg) / np.where(keep, bound, 1.0), 0.0)
        quad = 0.5 * obj.mu * dn * dn
        gap = fy - fx - np.sum(gx * D, axis=0) - quad
        scale = np.maximum.reduce([np.abs(fx), np.abs(fy), quad, np.full(cnt, 1e-300)])
        scvx_margin = gap / scale
        lip_bad += int(np.sum(lip_margin < -slack))
        scvx_bad += int(np.sum(scvx_margin < -slack))
        worst_lip = min(worst_lip, float(lip_margin.min()))
        worst_scvx = min(worst_scvx, float(scvx_margin.min()))
        done += cnt
    return CertReport(samples, lip_bad, scvx_bad, worst_lip, worst_scvx)

"""Dense vector kernels, spectral norm estimation and ball projection.

Vectors are 1-D float64 numpy arrays. The kernels are thin wrappers that add
the length checks numpy broadcasting would otherwise skip.
"""

import numpy as np

from . import rng
from .errors import DimensionError, NumericalError

__all__ = ["dot", "norm2", "axpby", "power_method_sq_norm", "project_ball",
           "POWER_ITERS", "POWER_TOL", "POWER_INFLATION"]

POWER_ITERS = 200
POWER_TOL = 1e-8
# power iteration approaches the top eigenvalue from below; solvers need an
# upper bound on L
POWER_INFLATION = 1.02


def _check_same(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")


def dot(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    _check_same(a, b)
    return float(a @ b)


def norm2(x):
    x = np.asarray(x, dtype=float)
    return float(np.sqrt(x @ x))


def axpby(a, x, b, y):
    """Return ``a * x + b * y`` as a new array."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_same(x, y)
    return a * x + b * y


def power_method_sq_norm(apply_gram, m, iters=POWER_ITERS, tol=POWER_TOL, seed=0):
    """Estimate ``||A||_2**2`` by power iteration on ``A A^T``.

    Parameters
    ----------
    apply_gram : callable
        ``v -> A @ (A.T @ v)`` on vectors of length `m`.
    m : int
        Dimension of the Gram operator.
    iters : int
        Maximum number of Gram applications.
    tol : float
        Stop once successive Rayleigh quotients differ by less than
        ``tol`` relative.
    seed : int
        Seed of the starting vector.

    Returns
    -------
    float
        Rayleigh quotient at the final iterate. This is a lower bound on the
        largest eigenvalue; callers inflate it before using it as ``L``.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    v = rng.standard_normal(rng.stream(seed, rng.STREAM_POWER), (m,))
    v /= norm2(v)
    est = None
    for _ in range(iters):
        w = np.asarray(apply_gram(v), dtype=float)
        if not np.all(np.isfinite(w)):
            raise NumericalError("non-finite Gram operator output")
        new = float(v @ w)
        nw = norm2(w)
        if nw == 0.0:
            raise NumericalError("Gram operator annihilated the iterate")
        v = w / nw
        if est is not None and abs(new - est) <= tol * abs(new):
            return new
        est = new
    return est


def project_ball(x, radius):
    """Euclidean projection of `x` onto ``{z : ||z|| <= radius}``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    x = np.asarray(x, dtype=float)
    nx = norm2(x)
    if nx <= radius:
        return x.copy()
    return x * (radius / nx)

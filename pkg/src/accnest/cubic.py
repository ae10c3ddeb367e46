"""Feasibility cubic for the adaptive momentum parameter.

For a reciprocal condition number ``rho = mu / L`` and the ratio
``d = mu**2 ||x_k - v_k||**2 / ||f'(y_{k-1})||**2`` the cubic

    eta(a) = a**3 + (1 + d) a**2 - (rho + d) a - rho

is non-positive exactly on the values of ``a`` that satisfy the surrogate
descent condition built from the previous gradient norm. ``beta`` is its
positive critical point (a local minimum) and ``gamma`` its positive root.
"""

import enum
import math
from dataclasses import dataclass

from .errors import NumericalError

__all__ = ["CubicParams", "Heuristic", "eta", "eta_prime", "beta", "gamma",
           "propose_alpha"]

MAX_ITERS = 200
_EPS = 2.220446049250313e-16


@dataclass(frozen=True)
class CubicParams:
    rho: float
    d: float

    def __post_init__(self):
        if not (math.isfinite(self.rho) and math.isfinite(self.d)):
            raise NumericalError(f"non-finite cubic parameters rho={self.rho}, d={self.d}")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if self.d < 0.0:
            raise ValueError(f"d must be non-negative, got {self.d}")


class Heuristic(enum.Enum):
    """Trial-alpha rules, ordered from conservative to aggressive."""

    H1 = 1  # max(sqrt(rho), beta)
    H2 = 2  # (sqrt(rho) + gamma) / 2
    H3 = 3  # (max(sqrt(rho), beta) + gamma) / 2
    H4 = 4  # gamma

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        s = str(value).strip().upper()
        if s.isdigit():
            return cls(int(s))
        return cls[s]


def eta(p, alpha):
    a = alpha
    return ((a + (1.0 + p.d)) * a - (p.rho + p.d)) * a - p.rho


def eta_prime(p, alpha):
    return (3.0 * alpha + 2.0 * (1.0 + p.d)) * alpha - (p.rho + p.d)


def beta(p):
    """Positive root of ``eta'``, the local minimum of ``eta`` on a > 0."""
    b = 1.0 + p.d
    c = p.rho + p.d
    # c / (b + sqrt(b^2 + 3c)) is the positive root of 3a^2 + 2ba - c without
    # the cancellation of (-b + sqrt(.)) / 3
    return c / (b + math.sqrt(b * b + 3.0 * c))


def gamma(p):
    """Unique positive root of ``eta``.

    ``eta`` is convex and increasing on ``[max(beta, sqrt(rho)), 1]``, so
    Newton's method started at the right end of that bracket descends
    monotonically onto the root. A step that would leave the bracket is
    replaced by a bisection step.
    """
    s = math.sqrt(p.rho)
    if p.d == 0.0:
        # eta = (a + 1)(a^2 - rho)
        return s
    lo = max(beta(p), s)
    hi = 1.0
    f_lo = eta(p, lo)
    f_hi = eta(p, hi)
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)):
        raise NumericalError("non-finite cubic values at bracket ends")
    if f_hi <= 0.0:
        return hi
    if f_lo >= 0.0:
        return lo
    a, f_a = hi, f_hi
    for _ in range(MAX_ITERS):
        step = f_a / eta_prime(p, a)
        nxt = a - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        f_nxt = eta(p, nxt)
        if f_nxt > 0.0:
            hi = nxt
        elif f_nxt < 0.0:
            lo = nxt
        else:
            return nxt
        done = abs(nxt - a) <= 4.0 * _EPS * nxt
        a, f_a = nxt, f_nxt
        if done or hi - lo <= 4.0 * _EPS * hi:
            break
    return a


def propose_alpha(p, h):
    """Trial momentum parameter for heuristic `h`; always ``>= sqrt(rho)``."""
    h = Heuristic.parse(h)
    s = math.sqrt(p.rho)
    if h is Heuristic.H1:
        return max(s, beta(p))
    g = gamma(p)
    if h is Heuristic.H2:
        return 0.5 * (s + g)
    if h is Heuristic.H3:
        return 0.5 * (max(s, beta(p)) + g)
    return g

"""Accelerated gradient methods with an adaptive momentum parameter."""

from .cubic import CubicParams, Heuristic, beta, eta, gamma, propose_alpha
from .errors import ConfigError, DimensionError, DivergenceError, NumericalError
from .problems import BowlSpec, BpdnSpec, Objective, QuadSpec, RidgeSpec
from .reference import ReferenceSolution, cgls, reference_solution
from .solvers import (SolverConfig, nesterov_adaptive, nesterov_const_step,
                      nesterov_L_restart)

__version__ = "0.1.0"

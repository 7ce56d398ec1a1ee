"""DC programming with Bregman-controlled extrapolation (DCAe), DCA and
inertial DCA, with a nonnegative matrix-completion instance."""

from dcae.bregman import (
    BregmanKernel,
    DCProblem,
    SubproblemOracle,
    bregman_distance,
    check_relative_convexity,
    quadratic_kernel,
)
from dcae.data import SparseRatings, parse_ratings, split, synthesize
from dcae.diagnostics import aggregate, rmse, validate_trace
from dcae.matcomp import FactorPair, MatcompInstance, build_dc_problem, initial_factors
from dcae.solvers import DCA, DCAE, IDCA, SolverConfig, run_solver

__version__ = "0.1.0"

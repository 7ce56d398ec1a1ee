"""DCA, inertial DCA and DCA with Bregman-controlled extrapolation (DCAe).

All three variants share one subproblem oracle::

    x+ = argmin_x  L*phi(x) + g(x) - <v, x>

and differ only in the linear term ``v``:

* DCA:   ``v = L grad phi(x) - grad f(x) + xi``
* iDCA:  DCA's ``v`` plus ``gamma * (x - x_prev)``
* DCAe:  ``v = L grad phi(y) - grad f(y) + xi`` with
  ``y = x + beta * (x - x_prev)``, where ``beta`` is backtracked from the
  Nesterov value ``(mu - 1) / mu`` until
  ``(L + l) D(x, y) <= delta * L * D(x_prev, x)``.

In every case ``xi`` is a subgradient of ``h`` at the current iterate.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

__all__ = [
    "DCA",
    "IDCA",
    "DCAE",
    "VARIANTS",
    "DivergedError",
    "SolverConfig",
    "IterateState",
    "IterationRecord",
    "SolverResult",
    "nesterov_mu_next",
    "find_beta",
    "initial_state",
    "dcae_step",
    "dca_step",
    "idca_step",
    "run_solver",
    "criticality_residual",
    "TRACE_HEADER",
    "write_trace_csv",
    "read_trace_csv",
]

DCA = "dca"
IDCA = "idca"
DCAE = "dcae"
VARIANTS = (DCA, IDCA, DCAE)

TRACE_HEADER = ("k", "F", "beta", "ls_trials", "step_norm", "bregman_step", "phi_lyapunov", "time_s")


class DivergedError(FloatingPointError):
    """Objective became non-finite; the instance is misconfigured."""


@dataclass(frozen=True)
class SolverConfig:
    """Run parameters shared by all variants.

    ``inertial_gamma=None`` means ``0.1 * L * rho`` for iDCA.
    ``restart_on_increase`` resets the Nesterov sequence whenever the
    objective goes up; off by default. ``extrapolate=False`` pins DCAe's
    ``beta`` to zero.
    """

    delta: float = 0.9999
    eta: float = 0.9
    max_linesearch_trials: int = 50
    max_iterations: int = 1000
    time_budget: Optional[float] = None
    tol: float = 1e-6
    inertial_gamma: Optional[float] = None
    restart_on_increase: bool = False
    extrapolate: bool = True
    record_time: bool = True

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if self.tol < 0:
            raise ValueError(f"tol must be >= 0, got {self.tol}")
        if self.max_linesearch_trials < 0:
            raise ValueError("max_linesearch_trials must be >= 0")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.inertial_gamma is not None and self.inertial_gamma < 0:
            raise ValueError("inertial_gamma must be >= 0")
        if self.time_budget is not None and self.time_budget <= 0:
            raise ValueError("time_budget must be positive")

    def gamma_for(self, problem):
        if self.inertial_gamma is not None:
            return self.inertial_gamma
        return 0.1 * problem.L * problem.kernel.rho


@dataclass(frozen=True)
class IterateState:
    x_curr: np.ndarray
    x_prev: np.ndarray
    y: np.ndarray
    beta: float
    mu: float
    k: int
    F_curr: float
    bregman_step: float  # D(x_prev, x_curr)


@dataclass(frozen=True)
class IterationRecord:
    """Diagnostics for iterate ``x^k``; record ``k=0`` is the start point.

    ``beta`` and ``ls_trials`` describe the extrapolation that produced
    ``x^k``. ``extrapolation_gap`` is
    ``(L+l) D(x^{k-1}, y^{k-1}) - delta L D(x^{k-2}, x^{k-1})`` (not part
    of the CSV export).
    """

    k: int
    F: float
    beta: float
    ls_trials: int
    step_norm: float
    bregman_step: float
    phi_lyapunov: float
    time_s: float
    extrapolation_gap: float = 0.0

    def row(self):
        return (
            self.k,
            repr(float(self.F)),
            repr(float(self.beta)),
            self.ls_trials,
            repr(float(self.step_norm)),
            repr(float(self.bregman_step)),
            repr(float(self.phi_lyapunov)),
            repr(float(self.time_s)),
        )


@dataclass
class SolverResult:
    x: np.ndarray
    trace: List[IterationRecord]
    stop_reason: str
    variant: str
    gamma: float = 0.0

    @property
    def iterations(self):
        return self.trace[-1].k

    @property
    def final_objective(self):
        return self.trace[-1].F


def nesterov_mu_next(mu_prev):
    """``(1 + sqrt(1 + 4 mu^2)) / 2``; requires ``mu_prev >= 1``."""
    if not mu_prev >= 1.0:
        raise ValueError(f"mu must be >= 1, got {mu_prev}")
    return 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * mu_prev * mu_prev))


def find_beta(problem, x_curr, x_prev, beta_init, config):
    """Backtrack ``beta`` until the Bregman extrapolation test holds.

    Tries ``beta_init * eta**j`` for ``j = 0 .. max_linesearch_trials`` and
    falls back to ``beta = 0``, which always passes. Returns
    ``(beta, y, trials)`` where ``trials`` counts the shrinks performed.
    """
    if not 0.0 <= beta_init < 1.0:
        raise ValueError(f"beta_init must lie in [0, 1), got {beta_init}")
    d = x_curr - x_prev
    if beta_init == 0.0 or not np.any(d):
        return 0.0, x_curr + 0.0 * d, 0
    budget = config.delta * problem.L * problem.distance(x_prev, x_curr)
    scale = problem.L + problem.l
    beta = beta_init
    for j in range(config.max_linesearch_trials + 1):
        y = x_curr + beta * d
        if scale * problem.distance(x_curr, y) <= budget:
            return beta, y, j
        beta *= config.eta
    return 0.0, x_curr + 0.0 * d, config.max_linesearch_trials + 1


def _objective(problem, x):
    F = problem.objective(x)
    if not math.isfinite(F):
        raise DivergedError(f"objective is {F}")
    return F


def _solve(oracle, v):
    x = np.asarray(oracle.solve(v), dtype=float)
    if not np.all(np.isfinite(x)):
        raise DivergedError("subproblem oracle returned non-finite entries")
    return x


def _smooth_linear_term(problem, point):
    return problem.L * problem.kernel.gradient(point) - problem.f_gradient(point)


def initial_state(problem, x0):
    x0 = np.array(x0, dtype=float)
    return IterateState(
        x_curr=x0,
        x_prev=x0.copy(),
        y=x0.copy(),
        beta=0.0,
        mu=1.0,
        k=0,
        F_curr=_objective(problem, x0),
        bregman_step=0.0,
    )


def dcae_step(problem, oracle, state, config=None):
    """One DCAe update from a state whose ``beta``/``y`` are already accepted."""
    xi = problem.h_subgradient(state.x_curr)
    v = _smooth_linear_term(problem, state.y) + xi
    x_next = _solve(oracle, v)
    return IterateState(
        x_curr=x_next,
        x_prev=state.x_curr,
        y=x_next,
        beta=0.0,
        mu=state.mu,
        k=state.k + 1,
        F_curr=_objective(problem, x_next),
        bregman_step=problem.distance(state.x_curr, x_next),
    )


def dca_step(problem, oracle, x_curr):
    v = _smooth_linear_term(problem, x_curr) + problem.h_subgradient(x_curr)
    return _solve(oracle, v)


def idca_step(problem, oracle, x_curr, x_prev, gamma):
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    v = _smooth_linear_term(problem, x_curr) + problem.h_subgradient(x_curr)
    v = v + gamma * (x_curr - x_prev)
    return _solve(oracle, v)


def criticality_residual(problem, x, x_next_from_dca):
    """Fixed-point residual ``||x - T(x)||`` of the DCA map ``T``."""
    if not math.isfinite(problem.g_value(x)):
        raise ValueError("x is outside dom g")
    return float(np.linalg.norm(np.asarray(x) - np.asarray(x_next_from_dca)))


def run_solver(problem, oracle, x0, config, variant=DCAE, callback=None):
    """Run a variant until the relative step, iteration or time cap trips.

    Stops when ``||x^k - x^{k-1}|| <= tol * (1 + ||x^k||)``. ``callback``
    (DCAe only) receives each :class:`IterateState` right after its
    extrapolation has been accepted.

    Returns a :class:`SolverResult` whose trace starts with the record for
    ``x^0``; ``stop_reason`` is one of ``"tolerance"``,
    ``"max_iterations"``, ``"time_budget"``.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    L, delta = problem.L, config.delta
    lyap = 0.5 * (1.0 + delta) * L
    gamma = config.gamma_for(problem) if variant == IDCA else 0.0

    if not math.isfinite(problem.g_value(np.asarray(x0, dtype=float))):
        raise ValueError("x0 is outside dom g")
    state = initial_state(problem, x0)
    t_start = time.perf_counter()
    trace = [IterationRecord(0, state.F_curr, 0.0, 0, 0.0, 0.0, state.F_curr, 0.0)]
    stop_reason = "max_iterations"

    while state.k < config.max_iterations:
        beta, trials, gap = 0.0, 0, 0.0
        if variant == DCAE:
            mu = nesterov_mu_next(state.mu) if state.k > 0 else 1.0
            beta_init = (mu - 1.0) / mu if config.extrapolate else 0.0
            beta, y, trials = find_beta(problem, state.x_curr, state.x_prev, beta_init, config)
            gap = (problem.L + problem.l) * problem.distance(state.x_curr, y) - (
                delta * L * state.bregman_step
            )
            state = replace(state, y=y, beta=beta, mu=mu)
            if callback is not None:
                callback(state)
            new = dcae_step(problem, oracle, state, config)
            if config.restart_on_increase and new.F_curr > state.F_curr:
                new = replace(new, mu=1.0)
        else:
            if variant == DCA:
                x_next = dca_step(problem, oracle, state.x_curr)
            else:
                x_next = idca_step(problem, oracle, state.x_curr, state.x_prev, gamma)
            new = IterateState(
                x_curr=x_next,
                x_prev=state.x_curr,
                y=x_next,
                beta=0.0,
                mu=1.0,
                k=state.k + 1,
                F_curr=_objective(problem, x_next),
                bregman_step=problem.distance(state.x_curr, x_next),
            )
        step = float(np.linalg.norm(new.x_curr - new.x_prev))
        elapsed = time.perf_counter() - t_start if config.record_time else 0.0
        trace.append(
            IterationRecord(
                k=new.k,
                F=new.F_curr,
                beta=beta,
                ls_trials=trials,
                step_norm=step,
                bregman_step=new.bregman_step,
                phi_lyapunov=new.F_curr + lyap * new.bregman_step,
                time_s=elapsed,
                extrapolation_gap=gap,
            )
        )
        state = new
        if step <= config.tol * (1.0 + float(np.linalg.norm(state.x_curr))):
            stop_reason = "tolerance"
            break
        if config.time_budget is not None and time.perf_counter() - t_start >= config.time_budget:
            stop_reason = "time_budget"
            break

    return SolverResult(state.x_curr, trace, stop_reason, variant, gamma)


def write_trace_csv(path, trace):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for rec in trace:
            writer.writerow(rec.row())


def read_trace_csv(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_HEADER:
            raise ValueError(f"unexpected trace header {reader.fieldnames}")
        return [
            IterationRecord(
                k=int(row["k"]),
                F=float(row["F"]),
                beta=float(row["beta"]),
                ls_trials=int(row["ls_trials"]),
                step_norm=float(row["step_norm"]),
                bregman_step=float(row["bregman_step"]),
                phi_lyapunov=float(row["phi_lyapunov"]),
                time_s=float(row["time_s"]),
            )
            for row in reader
        ]

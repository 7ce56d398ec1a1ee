"""Bregman kernels, DC problem containers and sampled convexity audits.

A DC problem here is ``F = f + g - h`` where ``f`` is smooth and relatively
smooth with respect to a kernel ``phi`` (``L*phi - f`` and ``l*phi + f``
convex), ``g`` is proper lsc convex and ``h`` is convex. Points are flat
``float64`` vectors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = [
    "BregmanKernel",
    "DCProblem",
    "SubproblemOracle",
    "ConvexityReport",
    "InvalidInputError",
    "quadratic_kernel",
    "bregman_distance",
    "midpoint_convexity",
    "check_relative_convexity",
    "check_subproblem_optimality",
]

ABS_TOL = 1e-9
REL_TOL = 1e-12


class InvalidInputError(ValueError):
    """Raised on non-finite or malformed points."""


@dataclass(frozen=True)
class BregmanKernel:
    """Strongly convex reference function ``phi``.

    ``distance`` is an optional cancellation-free evaluation of
    ``D_phi(x, y)``; it must agree with the defining formula.
    """

    value: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    rho: float
    distance: Optional[Callable[[np.ndarray, np.ndarray], float]] = None

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError(f"strong convexity modulus must be > 0, got {self.rho}")


def quadratic_kernel(scale=1.0):
    """``phi(x) = scale/2 * ||x||^2`` with modulus ``scale``."""
    scale = float(scale)

    def value(x):
        return 0.5 * scale * float(x @ x)

    def gradient(x):
        return scale * x

    def distance(x, y):
        d = x - y
        return 0.5 * scale * float(d @ d)

    return BregmanKernel(value, gradient, scale, distance)


def _as_point(x, name):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} contains non-finite entries")
    return x


def bregman_distance(kernel, x, y):
    """``phi(x) - phi(y) - <grad phi(y), x - y>``, clipped at zero."""
    x = _as_point(x, "x")
    y = _as_point(y, "y")
    if x.shape != y.shape:
        raise InvalidInputError(f"shape mismatch {x.shape} vs {y.shape}")
    if kernel.distance is not None:
        d = kernel.distance(x, y)
    else:
        d = kernel.value(x) - kernel.value(y) - float(kernel.gradient(y) @ (x - y))
    # roundoff in the generic formula can dip just below zero
    return max(float(d), 0.0)


@dataclass(frozen=True)
class DCProblem:
    """The triple ``(f, g, h)`` together with the kernel and constants.

    ``g_value`` returns ``inf`` outside ``dom g``. For nondifferentiable
    ``h`` the caller supplies a deterministic subgradient selection.
    Boundedness of ``F`` from below is declared by the instance, never
    checked.
    """

    f_value: Callable[[np.ndarray], float]
    f_gradient: Callable[[np.ndarray], np.ndarray]
    g_value: Callable[[np.ndarray], float]
    h_value: Callable[[np.ndarray], float]
    h_subgradient: Callable[[np.ndarray], np.ndarray]
    kernel: BregmanKernel
    L: float
    l: float = 0.0

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError(f"L must be > 0, got {self.L}")
        if not self.l >= 0:
            raise ValueError(f"l must be >= 0, got {self.l}")

    def objective(self, x):
        return self.f_value(x) + self.g_value(x) - self.h_value(x)

    def distance(self, x, y):
        return bregman_distance(self.kernel, x, y)


@dataclass(frozen=True)
class SubproblemOracle:
    """Exact solver of ``argmin_x L*phi(x) + g(x) - <v, x>``."""

    solve: Callable[[np.ndarray], np.ndarray]

    def __call__(self, linear_term):
        return self.solve(linear_term)


@dataclass
class ConvexityReport:
    trials: int
    violations: int
    worst_violation: float
    worst_index: int = -1

    @property
    def passed(self):
        return self.violations == 0

    def __add__(self, other):
        if other.worst_violation > self.worst_violation:
            worst, index = other.worst_violation, other.worst_index
        else:
            worst, index = self.worst_violation, self.worst_index
        return ConvexityReport(
            self.trials + other.trials, self.violations + other.violations, worst, index
        )


def midpoint_convexity(func, sampler, trials, rng=None, atol=ABS_TOL, rtol=REL_TOL):
    """Audit ``func`` for convexity along random segments.

    ``sampler(rng)`` returns a pair ``(a, b)``; a mixing weight ``t`` is
    drawn uniformly from (0, 1). A trial fails when
    ``func(t a + (1-t) b)`` exceeds the chord by more than
    ``atol + rtol * scale``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(rng)
    violations = 0
    worst = -np.inf
    worst_index = -1
    for i in range(trials):
        a, b = sampler(rng)
        t = rng.uniform(0.0, 1.0)
        fa, fb = func(a), func(b)
        fm = func(t * a + (1.0 - t) * b)
        chord = t * fa + (1.0 - t) * fb
        excess = fm - chord
        scale = max(abs(fa), abs(fb), abs(fm))
        if excess > atol + rtol * scale:
            violations += 1
        if excess > worst:
            worst, worst_index = excess, i
    return ConvexityReport(trials, violations, float(worst), worst_index)


def check_relative_convexity(problem, sampler, trials, rng=None):
    """Sampled audit of ``L*phi - f`` and ``l*phi + f``.

    Returns a dict with one :class:`ConvexityReport` per function under
    keys ``"upper"`` (``L*phi - f``) and ``"lower"`` (``l*phi + f``).
    Violations are reported, never raised.
    """
    rng = np.random.default_rng(rng)
    phi, f = problem.kernel.value, problem.f_value
    L, l = problem.L, problem.l
    upper = midpoint_convexity(lambda x: L * phi(x) - f(x), sampler, trials, rng)
    lower = midpoint_convexity(lambda x: l * phi(x) + f(x), sampler, trials, rng)
    return {"upper": upper, "lower": lower}


def check_subproblem_optimality(problem, linear_term, x_plus, probes, tol=1e-8):
    """Check the subgradient inequality certifying ``x_plus`` is optimal.

    For each probe ``z`` in ``dom g`` requires
    ``g(z) >= g(x+) + <v - L grad phi(x+), z - x+> - tol``.
    Returns the most negative slack (``>= -tol`` means pass).
    """
    w = linear_term - problem.L * problem.kernel.gradient(x_plus)
    gx = problem.g_value(x_plus)
    if not np.isfinite(gx):
        return -np.inf
    worst = np.inf
    for z in probes:
        slack = problem.g_value(z) - gx - float(w @ (z - x_plus))
        worst = min(worst, slack)
    return worst

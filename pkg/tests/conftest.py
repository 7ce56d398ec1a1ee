import os

import numpy as np
import pytest
from scipy.optimize import brentq

from dcae.bregman import BregmanKernel, DCProblem, SubproblemOracle
from dcae.data import synthesize
from dcae.matcomp import MatcompInstance, build_dc_problem, initial_factors

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
ML_FIXTURE = os.path.join(DATA_DIR, "ratings_1000.dat")

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def central_difference(func, x, rel_step=1e-5):
    """Central finite-difference gradient with steps scaled by |x_i|."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for i in range(x.size):
        h = rel_step * max(1.0, abs(x[i]))
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (func(x + e) - func(x - e)) / (2 * h)
    return g


def rel_err(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300)


def quartic_1d_problem():
    """F(x) = x^4/4 - 2x on the real line, unique critical point 2**(1/3).

    Kernel phi = x^4/4 + x^2/2 so that phi - f = x^2/2 is convex (L=1) and
    f itself is convex (l=0). The subproblem argmin phi(x) - v x solves
    x^3 + x = v.
    """
    kernel = BregmanKernel(
        value=lambda x: float(np.sum(x**4 / 4 + x**2 / 2)),
        gradient=lambda x: x**3 + x,
        rho=1.0,
    )
    problem = DCProblem(
        f_value=lambda x: float(np.sum(x**4) / 4),
        f_gradient=lambda x: x**3,
        g_value=lambda x: 0.0,
        h_value=lambda x: float(2 * np.sum(x)),
        h_subgradient=lambda x: np.full_like(x, 2.0),
        kernel=kernel,
        L=1.0,
        l=0.0,
    )

    def solve(v):
        return np.array([brentq(lambda s: s**3 + s - vi, -abs(vi) - 1, abs(vi) + 1, xtol=1e-15) for vi in v])

    return problem, SubproblemOracle(solve)


@pytest.fixture
def problem_1d():
    return quartic_1d_problem()


def make_instance(m=20, n=15, t=3, density=0.5, noise=0.1, seed=0, rank=None):
    ratings = synthesize(m, n, t, density, noise, seed=seed)
    return MatcompInstance(ratings, rank or t)


@pytest.fixture
def small_inst():
    return make_instance()


@pytest.fixture
def small_problem(small_inst):
    problem, oracle = build_dc_problem(small_inst)
    return small_inst, problem, oracle, initial_factors(small_inst, seed=1)


def bisect_root(a, b, iters=200):
    lo, hi = 0.0, 1.0 / b if b > 0 else a ** (-1 / 3)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if a * mid**3 + b * mid - 1 > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def projected_gradient(P, Q, thr, c1, c2, iters=20000):
    """Independent solver of the thresholded quartic subproblem on x >= 0."""
    p = np.concatenate([P.ravel(), Q.ravel()]) + thr

    def obj(x):
        w = 0.5 * x @ x
        return c1 * w * w + c2 * w + p @ x

    def grad(x):
        return (c1 * (x @ x) + c2) * x + p

    x = np.zeros_like(p)
    step = 1.0
    fx = obj(x)
    for _ in range(iters):
        g = grad(x)
        while True:
            xn = np.maximum(x - step * g, 0.0)
            fn = obj(xn)
            if fn <= fx + g @ (xn - x) + (xn - x) @ (xn - x) / (2 * step):
                break
            step *= 0.5
        if np.allclose(xn, x, atol=1e-15, rtol=0):
            break
        x, fx = xn, fn
        step *= 1.5
    return x, obj(x), obj

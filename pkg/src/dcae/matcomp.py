"""Nonnegative matrix completion with the exponential concave penalty.

The objective over ``U >= 0`` (m x t) and ``V >= 0`` (t x n) is::

    F(U, V) = 1/2 ||P(A - UV)||_F^2 + lam * sum(1 - exp(-theta |z|))

with the penalty split as ``lam*theta*||.||_1 - h``. The smooth part is
relatively smooth with respect to the quartic kernel::

    phi(U, V) = c1 * w**2 + c2 * w,   w = (||U||_F^2 + ||V||_F^2) / 2

and the convex subproblem has a closed form: soft-threshold to the
nonnegative orthant, then rescale by the positive root of a cubic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from dcae.bregman import BregmanKernel, DCProblem, SubproblemOracle

__all__ = [
    "FactorPair",
    "MatcompInstance",
    "InvalidKernelError",
    "positive_cubic_root",
    "solve_subproblem",
    "build_dc_problem",
    "initial_factors",
]


class InvalidKernelError(ValueError):
    pass


@dataclass(frozen=True)
class FactorPair:
    U: np.ndarray
    V: np.ndarray

    @property
    def rank(self):
        return self.U.shape[1]

    def flatten(self):
        return np.concatenate([self.U.ravel(), self.V.ravel()])

    @classmethod
    def from_flat(cls, x, m, n, t):
        x = np.asarray(x, dtype=float)
        if x.shape != (m * t + t * n,):
            raise ValueError(f"expected flat length {m * t + t * n}, got {x.shape}")
        return cls(x[: m * t].reshape(m, t), x[m * t :].reshape(t, n))


def positive_cubic_root(a, b, tol=1e-15, max_iter=100):
    """Unique positive root of ``a tau^3 + b tau - 1`` for ``a, b >= 0``.

    The polynomial is increasing on ``tau >= 0`` and starts at -1, so the
    root is bracketed by ``(0, min(1/b, a**(-1/3))]``. Newton steps are
    taken from the bracket's right end and any step leaving the bracket is
    replaced by bisection.
    """
    if a < 0 or b < 0 or (a == 0 and b == 0):
        raise InvalidKernelError(f"need a, b >= 0 not both zero, got a={a}, b={b}")
    if a == 0:
        return 1.0 / b
    hi = a ** (-1.0 / 3.0)
    if b > 0:
        hi = min(hi, 1.0 / b)
    lo = 0.0
    tau = hi
    for _ in range(max_iter):
        p = (a * tau * tau + b) * tau - 1.0
        if p == 0.0:
            return tau
        if p > 0:
            hi = tau
        else:
            lo = tau
        dp = 3.0 * a * tau * tau + b
        step = p / dp
        nxt = tau - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - tau) <= tol * max(nxt, 1e-300) or hi - lo <= tol * hi:
            tau = nxt
            break
        tau = nxt
    # one polishing step picks the closer of the float neighbours
    candidates = (tau, np.nextafter(tau, 0.0), np.nextafter(tau, np.inf))
    return float(min(candidates, key=lambda s: abs((a * s * s + b) * s - 1.0)))


def solve_subproblem(P, Q, threshold, c1, c2):
    """Minimise ``phi(U,V) + <P,U> + <Q,V> + threshold*(|U|_1 + |V|_1)``
    over ``U, V >= 0``.

    Returns ``(U, V, tau)`` with ``U = tau [-P - threshold]_+`` and the
    same for ``V``.
    """
    if c1 < 0 or c2 < 0 or (c1 == 0 and c2 == 0):
        raise InvalidKernelError(f"need c1, c2 >= 0 not both zero, got {c1}, {c2}")
    SU = np.maximum(-P - threshold, 0.0)
    SV = np.maximum(-Q - threshold, 0.0)
    s = float(np.sum(SU * SU) + np.sum(SV * SV))
    if s == 0.0:
        return SU, SV, 0.0
    tau = positive_cubic_root(c1 * s, c2)
    return tau * SU, tau * SV, tau


class MatcompInstance:
    """Observed ratings plus model constants.

    ``c2=None`` uses the Frobenius norm of the observed entries.
    ``L >= 1`` is required for relative smoothness of the loss.
    """

    def __init__(self, ratings, rank, lam=0.1, theta=5.0, c1=3.0, c2=None, L=1.0, l=1.0):
        if rank < 1:
            raise ValueError("rank must be >= 1")
        if lam <= 0 or theta <= 0:
            raise ValueError("lam and theta must be positive")
        if c1 <= 0:
            raise ValueError("c1 must be positive")
        if L < 1:
            raise ValueError(f"L must be >= 1 for this loss/kernel pair, got {L}")
        if l < 0:
            raise ValueError("l must be >= 0")
        self.ratings = ratings
        self.m, self.n, self.t = ratings.n_rows, ratings.n_cols, int(rank)
        self.lam, self.theta = float(lam), float(theta)
        self.c1 = float(c1)
        self.c2 = float(np.linalg.norm(ratings.values)) if c2 is None else float(c2)
        if self.c2 <= 0:
            raise ValueError("c2 must be positive")
        self.L, self.l = float(L), float(l)

        self.rows = ratings.rows
        self.cols = ratings.cols
        self.values = ratings.values
        # entries are sorted by (row, col) so CSR data order == entry order
        indptr = np.zeros(self.m + 1, dtype=np.int64)
        np.cumsum(np.bincount(self.rows, minlength=self.m), out=indptr[1:])
        self._indptr = indptr

    @property
    def size(self):
        return self.m * self.t + self.t * self.n

    def unflatten(self, x):
        return FactorPair.from_flat(x, self.m, self.n, self.t)

    def _split(self, Z):
        if isinstance(Z, FactorPair):
            U, V = Z.U, Z.V
        else:
            Z = np.asarray(Z, dtype=float)
            if Z.shape != (self.size,):
                raise ValueError(f"expected flat length {self.size}, got {Z.shape}")
            mt = self.m * self.t
            U, V = Z[:mt].reshape(self.m, self.t), Z[mt:].reshape(self.t, self.n)
        if U.shape != (self.m, self.t) or V.shape != (self.t, self.n):
            raise ValueError(f"factor shapes {U.shape}, {V.shape} do not match instance")
        return U, V

    def predict(self, U, V, rows, cols):
        return np.einsum("ij,ji->i", U[rows], V[:, cols])

    def residual(self, Z):
        """``A - UV`` on the observed entries, aligned with the ratings."""
        U, V = self._split(Z)
        return self.values - self.predict(U, V, self.rows, self.cols)

    def loss_value(self, Z):
        r = self.residual(Z)
        return 0.5 * float(r @ r)

    def loss_gradient(self, Z):
        U, V = self._split(Z)
        r = self.values - self.predict(U, V, self.rows, self.cols)
        R = sp.csr_matrix((r, self.cols, self._indptr), shape=(self.m, self.n))
        gU = -(R @ V.T)
        gV = -(R.T @ U).T
        return np.concatenate([gU.ravel(), gV.ravel()])

    # quartic kernel

    def _half_sq(self, Z):
        x = Z.flatten() if isinstance(Z, FactorPair) else np.asarray(Z, dtype=float)
        return x, 0.5 * float(x @ x)

    def kernel_value(self, Z):
        _, w = self._half_sq(Z)
        return self.c1 * w * w + self.c2 * w

    def kernel_gradient(self, Z):
        x, w = self._half_sq(Z)
        return (2.0 * self.c1 * w + self.c2) * x

    def kernel_distance(self, x, y):
        # D = c2*b + c1*(2*w_y*b + (a + b)^2), a = <y, x-y>, b = ||x-y||^2/2;
        # every term is nonnegative so no cancellation
        d = x - y
        a = float(y @ d)
        b = 0.5 * float(d @ d)
        w_y = 0.5 * float(y @ y)
        return self.c2 * b + self.c1 * (2.0 * w_y * b + (a + b) ** 2)

    def kernel(self):
        return BregmanKernel(self.kernel_value, self.kernel_gradient, self.c2, self.kernel_distance)

    # exponential penalty and its DC split

    def _flat(self, Z):
        return Z.flatten() if isinstance(Z, FactorPair) else np.asarray(Z, dtype=float)

    def penalty_value(self, Z):
        z = self._flat(Z)
        return self.lam * float(np.sum(-np.expm1(-self.theta * np.abs(z))))

    def l1_weight(self):
        return self.lam * self.theta

    def penalty_h_value(self, Z):
        z = self._flat(Z)
        a = np.abs(z)
        # lam*theta*|z| - lam*(1 - exp(-theta|z|)), summed
        return self.lam * float(np.sum(self.theta * a + np.expm1(-self.theta * a)))

    def penalty_h_gradient(self, Z):
        z = self._flat(Z)
        return self.l1_weight() * (-np.expm1(-self.theta * np.abs(z))) * np.sign(z)

    def g_value(self, Z):
        z = self._flat(Z)
        if np.any(z < 0):
            return math.inf
        return self.l1_weight() * float(np.sum(z))

    def objective(self, Z):
        return self.loss_value(Z) + self.penalty_value(Z)

    def solve_linear(self, linear_term):
        """Solve ``argmin L phi + g - <v, .>`` for a flat ``v``."""
        v = np.asarray(linear_term, dtype=float)
        mt = self.m * self.t
        P = -(v[:mt] / self.L).reshape(self.m, self.t)
        Q = -(v[mt:] / self.L).reshape(self.t, self.n)
        U, V, _ = solve_subproblem(P, Q, self.l1_weight() / self.L, self.c1, self.c2)
        return np.concatenate([U.ravel(), V.ravel()])

    def subproblem_parts(self, Y, xi):
        """``(P, Q)`` for extrapolated point ``Y`` and subgradient ``xi``."""
        y = self._flat(Y)
        p = self.loss_gradient(y) / self.L - np.asarray(xi) / self.L - self.kernel_gradient(y)
        mt = self.m * self.t
        return p[:mt].reshape(self.m, self.t), p[mt:].reshape(self.t, self.n)


def build_dc_problem(inst):
    """Wire an instance into ``(DCProblem, SubproblemOracle)``."""
    problem = DCProblem(
        f_value=inst.loss_value,
        f_gradient=inst.loss_gradient,
        g_value=inst.g_value,
        h_value=inst.penalty_h_value,
        h_subgradient=inst.penalty_h_gradient,
        kernel=inst.kernel(),
        L=inst.L,
        l=inst.l,
    )
    return problem, SubproblemOracle(inst.solve_linear)


def initial_factors(inst, seed: Optional[int] = None):
    """Uniform ``[0, sqrt(mean(A_obs) / t)]`` entries, flattened."""
    rng = np.random.default_rng(seed)
    hi = math.sqrt(max(float(np.mean(inst.values)), 0.0) / inst.t)
    return rng.uniform(0.0, hi, size=inst.size)

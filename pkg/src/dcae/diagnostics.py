"""Test-set RMSE, trace validation and run summaries."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, fields
from typing import List

import numpy as np

from dcae.solvers import DCA, DCAE, IDCA

__all__ = [
    "rmse",
    "Violation",
    "TraceReport",
    "validate_trace",
    "RunSummary",
    "aggregate",
    "write_summary_csv",
    "write_summary_json",
]

OBJ_RTOL = 1e-8
BETA_TOL = 1e-12
SUM_ATOL = 1e-6


def rmse(test, U, V):
    """Root mean squared error of ``UV`` over the test entries."""
    if test.nnz < 1:
        raise ValueError("empty test set")
    if U.shape[0] != test.n_rows or V.shape[1] != test.n_cols or U.shape[1] != V.shape[0]:
        raise ValueError(f"factor shapes {U.shape}, {V.shape} do not match {test.n_rows}x{test.n_cols}")
    pred = np.einsum("ij,ji->i", U[test.rows], V[:, test.cols])
    err = test.values - pred
    return math.sqrt(float(err @ err) / test.nnz)


@dataclass(frozen=True)
class Violation:
    kind: str
    k: int
    excess: float


@dataclass
class TraceReport:
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def count(self, kind=None):
        return sum(1 for v in self.violations if kind is None or v.kind == kind)

    def __str__(self):
        if self.ok:
            return "no violations"
        return "; ".join(f"{v.kind}@k={v.k} (+{v.excess:.3g})" for v in self.violations)


def validate_trace(trace, L, l, delta, rho, variant=DCAE, gamma=0.0):
    """Check a solver trace against the per-iteration guarantees.

    For DCA and DCAe (DCA is DCAe with ``beta = 0``):

    * ``decrease``: ``F_{k+1} - F_k - delta L D_k + L D_{k+1} <= 1e-8 (1+|F_k|)``
      where ``D_k = D(x^{k-1}, x^k)``;
    * ``lyapunov``: ``Phi_{k+1} <= Phi_k + 1e-8 (1+|Phi_k|)``;
    * ``beta``: extrapolation gap ``<= 1e-12 (1 + D_k)``;
    * ``summability``: partial sums of squared steps stay below
      ``(F_0 - min F) / ((1-delta) L rho) + 1e-6``.

    For iDCA the decrease check uses the inertial bound
    ``F_{k+1} <= F_k - L D_{k+1} + gamma ||dx_k|| ||dx_{k+1}||``.
    Any non-finite entry is reported as ``nonfinite``.
    """
    report = TraceReport()
    bad = report.violations
    for rec in trace:
        vals = (rec.F, rec.beta, rec.step_norm, rec.bregman_step, rec.phi_lyapunov, rec.time_s)
        if not all(math.isfinite(v) for v in vals):
            bad.append(Violation("nonfinite", rec.k, math.inf))
    if bad:
        return report

    F0 = trace[0].F
    F_min = min(rec.F for rec in trace)
    bound = (F0 - F_min) / ((1.0 - delta) * L * rho) + SUM_ATOL
    partial = 0.0
    for prev, cur in zip(trace, trace[1:]):
        tol = OBJ_RTOL * (1.0 + abs(prev.F))
        if variant == IDCA:
            excess = cur.F - prev.F + L * cur.bregman_step - gamma * prev.step_norm * cur.step_norm
        else:
            excess = cur.F - prev.F - delta * L * prev.bregman_step + L * cur.bregman_step
        if excess > tol:
            bad.append(Violation("decrease", cur.k, excess - tol))
        if variant in (DCA, DCAE):
            lyap_tol = OBJ_RTOL * (1.0 + abs(prev.phi_lyapunov))
            if cur.phi_lyapunov - prev.phi_lyapunov > lyap_tol:
                bad.append(Violation("lyapunov", cur.k, cur.phi_lyapunov - prev.phi_lyapunov - lyap_tol))
            beta_tol = BETA_TOL * (1.0 + prev.bregman_step)
            if cur.extrapolation_gap > beta_tol:
                bad.append(Violation("beta", cur.k, cur.extrapolation_gap - beta_tol))
            partial += cur.step_norm ** 2
            if partial > bound:
                bad.append(Violation("summability", cur.k, partial - bound))
    return report


@dataclass
class RunSummary:
    """One run, or the mean/std over repeats when ``repeats > 1``."""

    variant: str
    final_F: float
    final_rmse: float
    iterations: float
    wall_time: float
    violations: int
    repeats: int = 1
    final_F_std: float = 0.0
    final_rmse_std: float = 0.0
    iterations_std: float = 0.0
    wall_time_std: float = 0.0

    def __post_init__(self):
        if self.violations < 0 or self.repeats < 1:
            raise ValueError("counts must be nonnegative and repeats >= 1")


_STAT_FIELDS = ("final_F", "final_rmse", "iterations", "wall_time")


def aggregate(repeats):
    """Mean and sample standard deviation (N-1; 0 for a single run)."""
    repeats = list(repeats)
    if not repeats:
        raise ValueError("need at least one run")
    variants = {r.variant for r in repeats}
    if len(variants) != 1:
        raise ValueError(f"cannot aggregate mixed variants {sorted(variants)}")
    stats = {}
    for name in _STAT_FIELDS:
        vals = np.array([getattr(r, name) for r in repeats], dtype=float)
        stats[name] = float(vals.mean())
        stats[name + "_std"] = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
    return RunSummary(
        variant=repeats[0].variant,
        violations=sum(r.violations for r in repeats),
        repeats=sum(r.repeats for r in repeats),
        **stats,
    )


def write_summary_csv(path, rows):
    """``rows`` is a list of ``(label, RunSummary)``."""
    names = [f.name for f in fields(RunSummary)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label"] + names)
        for label, summary in rows:
            values = [getattr(summary, n) for n in names]
            writer.writerow([label] + [repr(v) if isinstance(v, float) else v for v in values])


def write_summary_json(path, rows):
    with open(path, "w") as fh:
        json.dump([dict(label=label, **asdict(s)) for label, s in rows], fh, indent=1)
        fh.write("\n")

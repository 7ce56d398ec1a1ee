"""Benchmark harness: run DCA / iDCA / DCAe head-to-head on matrix completion.

Usage::

    python -m dcae --synthetic 50,40,3,0.5,0.1 --rank 3 --variants dca,dcae --out runs/
    python -m dcae --data ratings.dat --format mlcolon --rank 5 --repeats 20 --out runs/
    python -m dcae --print-defaults > bench.ini
    python -m dcae --config bench.ini --max-iters 200

Exit codes: 0 success, 2 config error, 3 data error, 4 solver error,
5 invariant violation.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from typing import Optional, Tuple

from dcae.data import FORMATS, ParseError, read_ratings, split, synthesize, write_split
from dcae.diagnostics import RunSummary, aggregate, rmse, validate_trace, write_summary_csv, write_summary_json
from dcae.matcomp import MatcompInstance, build_dc_problem, initial_factors
from dcae.solvers import VARIANTS, DivergedError, SolverConfig, run_solver, write_trace_csv

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_SOLVER = 4
EXIT_INVARIANT = 5


class ConfigError(ValueError):
    pass


# (field, section, key) in config-file order
_LAYOUT = (
    ("data", "data", "path"),
    ("format", "data", "format"),
    ("synthetic", "data", "synthetic"),
    ("train_fraction", "data", "train_fraction"),
    ("rank", "model", "rank"),
    ("lam", "model", "lambda"),
    ("theta", "model", "theta"),
    ("c1", "model", "c1"),
    ("L", "model", "L"),
    ("l", "model", "l"),
    ("delta", "solver", "delta"),
    ("eta", "solver", "eta"),
    ("mu0", "solver", "mu0"),
    ("max_linesearch_trials", "solver", "max_linesearch_trials"),
    ("max_iters", "solver", "max_iters"),
    ("time_budget_s", "solver", "time_budget_s"),
    ("tol", "solver", "tol"),
    ("gamma", "solver", "gamma"),
    ("variants", "experiment", "variants"),
    ("repeats", "experiment", "repeats"),
    ("seed", "experiment", "seed"),
    ("out", "experiment", "out"),
    ("timestamps", "experiment", "timestamps"),
    ("save_splits", "experiment", "save_splits"),
    ("parallel_repeats", "experiment", "parallel_repeats"),
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a benchmark run needs; defaults follow the MovieLens 1M setup.

    ``synthetic`` is ``(m, n, t_true, density, noise_sd)``. ``gamma=None``
    selects the iDCA default ``0.1 L rho``. With ``timestamps=False`` all
    wall-clock columns are written as zero so outputs are byte-stable.
    """

    data: Optional[str] = None
    format: str = "mlcolon"
    synthetic: Optional[Tuple[int, int, int, float, float]] = None
    train_fraction: float = 0.7
    rank: int = 5
    lam: float = 0.1
    theta: float = 5.0
    c1: float = 3.0
    L: float = 1.0
    l: float = 1.0
    delta: float = 0.9999
    eta: float = 0.9
    mu0: float = 1.0
    max_linesearch_trials: int = 50
    max_iters: int = 500
    time_budget_s: Optional[float] = None
    tol: float = 1e-6
    gamma: Optional[float] = None
    variants: Tuple[str, ...] = VARIANTS
    repeats: int = 1
    seed: int = 0
    out: str = "runs"
    timestamps: bool = False
    save_splits: bool = False
    parallel_repeats: int = 1

    def validate(self):
        if (self.data is None) == (self.synthetic is None):
            raise ConfigError("exactly one of data path or synthetic parameters is required")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {sorted(FORMATS)}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must lie in (0, 1)")
        if self.rank < 1:
            raise ConfigError("rank must be >= 1")
        if self.lam <= 0 or self.theta <= 0 or self.c1 <= 0:
            raise ConfigError("lambda, theta and c1 must be positive")
        if self.L < 1 or self.l < 0:
            raise ConfigError("need L >= 1 and l >= 0")
        if not 0 < self.delta < 1:
            raise ConfigError(f"delta must lie in (0, 1), got {self.delta}")
        if not 0 < self.eta < 1:
            raise ConfigError(f"eta must lie in (0, 1), got {self.eta}")
        if self.mu0 != 1.0:
            raise ConfigError("mu0 is fixed at 1")
        if self.max_iters < 0 or self.max_linesearch_trials < 0 or self.tol < 0:
            raise ConfigError("iteration caps and tol must be nonnegative")
        if self.time_budget_s is not None and self.time_budget_s <= 0:
            raise ConfigError("time budget must be positive")
        if self.gamma is not None and self.gamma < 0:
            raise ConfigError("gamma must be >= 0")
        if not self.variants or any(v not in VARIANTS for v in self.variants):
            raise ConfigError(f"variants must be drawn from {VARIANTS}")
        if self.repeats < 1 or self.parallel_repeats < 1:
            raise ConfigError("repeats and parallel_repeats must be >= 1")
        if self.synthetic is not None:
            m, n, t_true, density, noise = self.synthetic
            if m < 1 or n < 1 or t_true < 1 or not 0 < density <= 1 or noise < 0:
                raise ConfigError(f"bad synthetic parameters {self.synthetic}")
        return self

    def solver_config(self):
        return SolverConfig(
            delta=self.delta,
            eta=self.eta,
            max_linesearch_trials=self.max_linesearch_trials,
            max_iterations=self.max_iters,
            time_budget=self.time_budget_s,
            tol=self.tol,
            inertial_gamma=self.gamma,
            record_time=self.timestamps,
        )

    def to_ini(self):
        sections = {}
        for name, section, key in _LAYOUT:
            sections.setdefault(section, []).append(f"{key} = {_format_value(getattr(self, name))}")
        return "\n\n".join(f"[{s}]\n" + "\n".join(lines) for s, lines in sections.items()) + "\n"

    @classmethod
    def from_ini(cls, text, base=None):
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from None
        known = {(section, key): name for name, section, key in _LAYOUT}
        updates = {}
        for section in parser.sections():
            for key, raw in parser.items(section):
                name = known.get((section, key))
                if name is None:
                    raise ConfigError(f"unknown key [{section}] {key}")
                updates[name] = _parse_field(name, raw)
        return replace(base or cls(), **updates)


def _format_value(value):
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _parse_field(name, raw):
    raw = raw.strip()
    try:
        if name in ("data", "time_budget_s", "gamma", "synthetic") and raw.lower() in ("none", ""):
            return None
        if name == "synthetic":
            return parse_synthetic(raw)
        if name == "variants":
            return tuple(v.strip().lower() for v in raw.split(",") if v.strip())
        if name in ("timestamps", "save_splits"):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        kind = _TYPES[name]
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_synthetic(raw):
    parts = raw.split(",")
    if len(parts) != 5:
        raise ConfigError("synthetic needs m,n,t_true,density,noise_sd")
    m, n, t = (int(p) for p in parts[:3])
    return (m, n, t, float(parts[3]), float(parts[4]))


def print_defaults(file=None):
    text = ExperimentConfig().to_ini()
    print(text, end="", file=file or sys.stdout)
    return text


def _load_dataset(config, rep):
    if config.synthetic is not None:
        m, n, t_true, density, noise = config.synthetic
        return synthesize(m, n, t_true, density, noise, seed=config.seed + rep)
    return read_ratings(config.data, config.format)


def run_repeat(config, rep, ratings=None):
    """Run every variant on one seeded split; returns ``[(variant, RunSummary)]``.

    All variants share the split and the starting point. Traces are written
    to ``<out>/trace_<variant>_<rep>.csv``.
    """
    if ratings is None or config.synthetic is not None:
        ratings = _load_dataset(config, rep)
    seed = config.seed + rep
    parts = split(ratings, config.train_fraction, seed=seed)
    if config.save_splits:
        write_split(config.out, parts, config.format, prefix=f"split_{rep}")
    inst = MatcompInstance(
        parts.train, config.rank, lam=config.lam, theta=config.theta, c1=config.c1, L=config.L, l=config.l
    )
    problem, oracle = build_dc_problem(inst)
    x0 = initial_factors(inst, seed=seed)
    solver_config = config.solver_config()
    results = []
    for variant in config.variants:
        t0 = time.perf_counter()
        res = run_solver(problem, oracle, x0, solver_config, variant)
        wall = time.perf_counter() - t0 if config.timestamps else 0.0
        report = validate_trace(
            res.trace, problem.L, problem.l, config.delta, problem.kernel.rho, variant, res.gamma
        )
        write_trace_csv(os.path.join(config.out, f"trace_{variant}_{rep}.csv"), res.trace)
        Z = inst.unflatten(res.x)
        summary = RunSummary(
            variant=variant,
            final_F=res.final_objective,
            final_rmse=rmse(parts.test, Z.U, Z.V),
            iterations=res.iterations,
            wall_time=wall,
            violations=len(report.violations),
        )
        results.append((variant, summary, str(report)))
    return results


def run_experiment(config):
    """Run all (variant, repeat) jobs and write traces plus ``summary.csv``.

    Returns an exit status; the per-run summaries are also written to
    ``summary.json``.
    """
    try:
        config.validate()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    os.makedirs(config.out, exist_ok=True)
    try:
        ratings = _load_dataset(config, 0) if config.synthetic is None else None
    except (OSError, ParseError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    try:
        if config.parallel_repeats > 1 and config.repeats > 1:
            with ProcessPoolExecutor(max_workers=config.parallel_repeats) as pool:
                futures = [pool.submit(run_repeat, config, rep, ratings) for rep in range(config.repeats)]
                per_rep = [f.result() for f in futures]
        else:
            per_rep = [run_repeat(config, rep, ratings) for rep in range(config.repeats)]
    except (ParseError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (DivergedError, FloatingPointError, ArithmeticError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    rows = []
    violated = False
    for rep, results in enumerate(per_rep):
        for variant, summary, report in results:
            rows.append((f"{variant}/{rep}", summary))
            if summary.violations:
                violated = True
                print(f"invariant violation in {variant} repeat {rep}: {report}", file=sys.stderr)
    for variant in config.variants:
        agg = aggregate(s for label, s in rows if s.variant == variant and "/mean" not in label)
        rows.append((f"{variant}/mean", agg))
    write_summary_csv(os.path.join(config.out, "summary.csv"), rows)
    write_summary_json(os.path.join(config.out, "summary.json"), rows)
    for label, s in rows[-len(config.variants):]:
        print(
            f"{label:12s} F = {s.final_F:.6g} +- {s.final_F_std:.2g}   "
            f"RMSE = {s.final_rmse:.4f} +- {s.final_rmse_std:.2g}   iters = {s.iterations:g}"
        )
    return EXIT_INVARIANT if violated else EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="dcae", description="DCA / iDCA / DCAe matrix-completion benchmark")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--data", metavar="PATH")
    src.add_argument("--synthetic", metavar="m,n,t_true,density,noise_sd")
    p.add_argument("--config", metavar="FILE", help="key-value config file; flags override it")
    p.add_argument("--format", choices=sorted(FORMATS))
    p.add_argument("--rank", type=int)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--theta", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--eta", type=float)
    p.add_argument("--L", dest="L", type=float)
    p.add_argument("--l", dest="l", type=float)
    p.add_argument("--gamma", type=float, help="iDCA inertia (default 0.1 L rho)")
    p.add_argument("--variants", help="comma list from dca,idca,dcae")
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", dest="max_iters", type=int)
    p.add_argument("--time-budget-s", dest="time_budget_s", type=float)
    p.add_argument("--tol", type=float)
    p.add_argument("--train-fraction", dest="train_fraction", type=float)
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--timestamps", action="store_true", default=None, help="record wall-clock times")
    p.add_argument("--save-splits", dest="save_splits", action="store_true", default=None)
    p.add_argument("--parallel-repeats", dest="parallel_repeats", type=int)
    p.add_argument("--print-defaults", action="store_true")
    return p


def config_from_args(args):
    config = ExperimentConfig()
    if args.config:
        with open(args.config) as fh:
            config = ExperimentConfig.from_ini(fh.read())
    updates = {}
    for name in (f.name for f in fields(ExperimentConfig)):
        value = getattr(args, name, None)
        if value is None:
            continue
        if name == "synthetic":
            value = parse_synthetic(value)
            updates["data"] = None
        elif name == "data":
            updates["synthetic"] = None
        elif name == "variants":
            value = _parse_field("variants", value)
        updates[name] = value
    return replace(config, **updates)


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.print_defaults:
        print_defaults()
        return EXIT_OK
    try:
        config = config_from_args(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiment(config)


if __name__ == "__main__":
    sys.exit(main())

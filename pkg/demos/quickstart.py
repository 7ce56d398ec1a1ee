"""
DCA versus DCAe on a small matrix completion problem
====================================================

Build a synthetic low-rank ratings matrix, hide 30% of it, and fit
nonnegative factors with plain DCA and with the extrapolated variant.
Both start from the same point and get the same iteration budget.
"""

# %%
# A 50 x 40 matrix of rank 3, half observed, with a little noise.
import numpy as np

from dcae import (
    DCA,
    DCAE,
    MatcompInstance,
    SolverConfig,
    build_dc_problem,
    initial_factors,
    rmse,
    run_solver,
    split,
    synthesize,
)

ratings = synthesize(50, 40, t_true=3, density=0.5, noise_sd=0.1, seed=0)
parts = split(ratings, train_fraction=0.7, seed=0)
print(f"{ratings.nnz} ratings -> {parts.train.nnz} train / {parts.test.nnz} test")

# %%
# The model: squared loss on observed entries plus an exponential sparsity
# penalty, with U and V kept nonnegative.
inst = MatcompInstance(parts.train, rank=3)
problem, oracle = build_dc_problem(inst)
x0 = initial_factors(inst, seed=0)
print(f"F(x0) = {inst.objective(x0):.4f}")

# %%
# Same budget for both.
config = SolverConfig(max_iterations=300, tol=0.0)
runs = {v: run_solver(problem, oracle, x0, config, v) for v in (DCA, DCAE)}

for variant, res in runs.items():
    Z = inst.unflatten(res.x)
    print(f"{variant:5s} F = {res.final_objective:.4f}  test RMSE = {rmse(parts.test, Z.U, Z.V):.4f}")

# %%
# Objective every 50 iterations. The extrapolated run pulls ahead early
# and stays ahead. Lower training objective does not have to mean lower
# held-out RMSE on a problem this small.
print(" k     DCA        DCAe")
for k in range(0, 301, 50):
    print(f"{k:3d}  {runs[DCA].trace[k].F:9.4f}  {runs[DCAE].trace[k].F:9.4f}")

# %%
# How much extrapolation was actually used. The schedule keeps proposing
# beta close to 1, and the Bregman test trims it back on nearly every step;
# what survives is still a sizeable push.
betas = np.array([r.beta for r in runs[DCAE].trace[1:]])
shrinks = np.array([r.ls_trials for r in runs[DCAE].trace[1:]])
print(f"median beta {np.median(betas):.3f}, iterations needing a shrink: {(shrinks > 0).sum()}")

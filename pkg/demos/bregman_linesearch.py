"""
How the extrapolation line search behaves
=========================================

DCAe only accepts an extrapolated point ``y = x + beta (x - x_prev)`` when
the Bregman distance from ``x`` to ``y`` is small relative to the last step.
With a quadratic kernel this reduces to ``beta <= sqrt(delta)``, which makes
a handy sanity check. With the quartic kernel used for matrix completion
the answer depends a little on where you are.
"""

# %%
import numpy as np

from dcae import DCProblem, SolverConfig, quadratic_kernel
from dcae.data import synthesize
from dcae.matcomp import MatcompInstance, build_dc_problem, initial_factors
from dcae.solvers import find_beta, nesterov_mu_next

# %%
# The Nesterov schedule proposes beta = (mu - 1) / mu, creeping up to 1.
mu = 1.0
for k in range(1, 8):
    mu = nesterov_mu_next(mu)
    print(f"k={k}  mu={mu:.6f}  proposed beta={(mu - 1) / mu:.4f}")

# %%
# Quadratic kernel, delta = 0.25: the search shrinks 0.9 by 0.9 until it
# drops below 0.5. That takes six shrinks and lands on 0.9**7.
quad = DCProblem(
    f_value=lambda x: 0.5 * float(x @ x),
    f_gradient=lambda x: x,
    g_value=lambda x: 0.0,
    h_value=lambda x: 0.0,
    h_subgradient=np.zeros_like,
    kernel=quadratic_kernel(),
    L=1.0,
)
beta, y, shrinks = find_beta(quad, np.array([1.0, 0.0]), np.zeros(2), 0.9, SolverConfig(delta=0.25))
print(f"accepted beta = {beta:.6f} after {shrinks} shrinks (0.9**7 = {0.9**7:.6f})")

# %%
# Quartic kernel on a matrix completion instance, where L = l = 1. Locally
# the kernel looks quadratic, so the test is roughly 2 beta^2 <= delta and
# accepted values hover around 1/sqrt(2) whatever the size of the step. The
# quartic term tips it slightly either way.
inst = MatcompInstance(synthesize(20, 15, 3, 0.5, 0.1, seed=1), rank=3)
problem, _ = build_dc_problem(inst)
x = initial_factors(inst, seed=1)
rng = np.random.default_rng(1)
for scale in (1e-3, 1e-1, 1.0, 5.0):
    x_prev = np.abs(x + scale * rng.normal(size=x.size))
    beta, _, shrinks = find_beta(problem, x, x_prev, 0.95, SolverConfig())
    print(f"|x - x_prev| = {np.linalg.norm(x - x_prev):8.3f}  beta = {beta:.4f}  shrinks = {shrinks}")

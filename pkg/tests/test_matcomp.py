import math

import numpy as np
import pytest

from conftest import bisect_root, central_difference, make_instance, projected_gradient, rel_err
from dcae.bregman import bregman_distance, midpoint_convexity
from dcae.data import SparseRatings
from dcae.matcomp import (
    FactorPair,
    InvalidKernelError,
    MatcompInstance,
    build_dc_problem,
    initial_factors,
    positive_cubic_root,
    solve_subproblem,
)


def tiny_ratings():
    # 3x3 with 4 observed entries
    rows = np.array([0, 0, 1, 2])
    cols = np.array([0, 2, 1, 2])
    vals = np.array([4.0, 1.5, 3.0, 2.0])
    return SparseRatings(3, 3, rows, cols, vals, ("a", "b", "c"), ("x", "y", "z"))


def test_loss_zero_factors():
    inst = MatcompInstance(tiny_ratings(), 2)
    Z = FactorPair(np.zeros((3, 2)), np.zeros((2, 3)))
    assert inst.loss_value(Z) == pytest.approx(0.5 * np.sum(inst.values**2))
    assert np.all(inst.loss_gradient(Z) == 0)


def test_loss_against_dense_oracle():
    inst = MatcompInstance(tiny_ratings(), 2)
    U = np.array([[1.0, 0.5], [0.2, 2.0], [1.5, 0.1]])
    V = np.array([[1.0, 0.3, 0.7], [0.4, 1.2, 0.9]])
    mask = np.zeros((3, 3))
    mask[[0, 0, 1, 2], [0, 2, 1, 2]] = 1
    A = tiny_ratings().to_dense()
    dense = 0.5 * np.sum((mask * (A - U @ V)) ** 2)
    assert inst.loss_value(FactorPair(U, V)) == pytest.approx(dense, rel=1e-14)


def test_loss_exact_fit_is_zero():
    rng = np.random.default_rng(0)
    U, V = rng.uniform(size=(5, 1)), rng.uniform(size=(1, 4))
    A = U @ V
    rows, cols = np.nonzero(np.ones((5, 4)))
    ratings = SparseRatings(5, 4, rows, cols, A[rows, cols], tuple("abcde"), tuple("wxyz"))
    inst = MatcompInstance(ratings, 1)
    assert inst.loss_value(FactorPair(U, V)) < 1e-28
    assert np.max(np.abs(inst.loss_gradient(FactorPair(U, V)))) < 1e-10


def test_loss_gradient_finite_differences():
    inst = make_instance(m=5, n=4, t=2, density=0.6, seed=4)
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = rng.normal(size=inst.size)
        assert rel_err(inst.loss_gradient(x), central_difference(inst.loss_value, x)) < 1e-5


def test_kernel_values():
    inst = make_instance()
    zero = np.zeros(inst.size)
    assert inst.kernel_value(zero) == 0.0
    assert np.all(inst.kernel_gradient(zero) == 0)
    inst.c1, inst.c2 = 3.0, 2.0
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = rng.normal(size=inst.size)
        assert rel_err(inst.kernel_gradient(x), central_difference(inst.kernel_value, x)) < 1e-5


def test_kernel_quadratic_reduction():
    inst = make_instance()
    inst.c1, inst.c2 = 0.0, 2.0
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=(2, inst.size))
    d = bregman_distance(inst.kernel(), x, y)
    assert d == pytest.approx(np.sum((x - y) ** 2), rel=1e-12)


def test_kernel_distance_matches_definition():
    inst = make_instance()
    rng = np.random.default_rng(4)
    for _ in range(20):
        x, y = rng.normal(scale=2, size=(2, inst.size))
        generic = inst.kernel_value(x) - inst.kernel_value(y) - inst.kernel_gradient(y) @ (x - y)
        assert inst.kernel_distance(x, y) == pytest.approx(generic, rel=1e-9)


def test_penalty_at_zero():
    inst = make_instance()
    z = np.zeros(inst.size)
    assert inst.penalty_value(z) == 0.0
    assert inst.penalty_h_value(z) == 0.0
    assert np.all(inst.penalty_h_gradient(z) == 0)


def test_penalty_single_entry():
    inst = make_instance(m=1, n=1, t=1, density=1.0)
    z = np.array([1.0, 0.0])
    assert inst.penalty_value(z) == pytest.approx(0.1 * (1 - math.exp(-5)), rel=1e-14)
    assert inst.penalty_value(z) == pytest.approx(0.0993262, abs=1e-7)
    assert inst.penalty_h_gradient(z)[0] == pytest.approx(0.4966310, abs=1e-7)
    assert inst.penalty_h_gradient(z)[1] == 0.0


def test_dc_split_identity():
    inst = make_instance()
    rng = np.random.default_rng(5)
    for _ in range(50):
        z = rng.normal(scale=rng.uniform(0.01, 3), size=inst.size)
        lhs = inst.penalty_value(z)
        rhs = inst.l1_weight() * np.abs(z).sum() - inst.penalty_h_value(z)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_h_gradient_finite_differences():
    inst = make_instance()
    rng = np.random.default_rng(6)
    for _ in range(20):
        x = rng.normal(size=inst.size)
        assert rel_err(inst.penalty_h_gradient(x), central_difference(inst.penalty_h_value, x)) < 1e-5


def test_h_is_convex():
    inst = make_instance()

    def sampler(rng):
        return rng.normal(scale=rng.uniform(0.01, 2), size=(2, inst.size))

    report = midpoint_convexity(inst.penalty_h_value, sampler, 1000, rng=7, atol=1e-10, rtol=0.0)
    assert report.violations == 0


@pytest.mark.parametrize("a,b", [(3.0, 1.0), (1e-6, 5.0), (1e6, 1e-3), (7.0, 0.0), (1e-12, 1e-9), (2.5, 40.0)])
def test_cubic_root(a, b):
    tau = positive_cubic_root(a, b)
    assert tau > 0
    assert abs(a * tau**3 + b * tau - 1) < 1e-12
    assert tau == pytest.approx(bisect_root(a, b), rel=1e-12)


def test_cubic_root_reference_value():
    assert positive_cubic_root(3.0, 1.0) == pytest.approx(0.5365651646722229, abs=1e-12)


def test_cubic_root_linear_case():
    assert positive_cubic_root(0.0, 2.0) == 0.5


def test_cubic_root_invalid():
    with pytest.raises(InvalidKernelError):
        positive_cubic_root(0.0, 0.0)
    with pytest.raises(InvalidKernelError):
        solve_subproblem(np.zeros((2, 2)), np.zeros((2, 2)), 0.1, 0.0, 0.0)


def test_subproblem_full_threshold():
    P = np.full((3, 2), 0.5)
    Q = np.full((2, 4), -0.05)
    U, V, tau = solve_subproblem(P, Q, 0.1, 3.0, 1.0)
    assert not U.any() and not V.any() and tau == 0.0


def test_subproblem_linear_kernel():
    rng = np.random.default_rng(8)
    P, Q = rng.normal(size=(3, 2)), rng.normal(size=(2, 4))
    U, V, tau = solve_subproblem(P, Q, 0.1, 0.0, 2.0)
    assert tau == 0.5
    assert np.array_equal(U, 0.5 * np.maximum(-P - 0.1, 0))


def test_subproblem_against_projected_gradient():
    rng = np.random.default_rng(9)
    for _ in range(10):
        m, n, t = rng.integers(1, 6), rng.integers(1, 6), rng.integers(1, 3)
        P, Q = rng.normal(size=(m, t)), rng.normal(size=(t, n))
        U, V, tau = solve_subproblem(P, Q, 0.5, 3.0, 1.0)
        x_ref, f_ref, obj = projected_gradient(P, Q, 0.5, 3.0, 1.0)
        f_closed = obj(np.concatenate([U.ravel(), V.ravel()]))
        assert f_closed <= f_ref + 1e-12
        assert abs(f_closed - f_ref) <= 1e-6 * (1 + abs(f_ref))
        assert np.all(U >= 0) and np.all(V >= 0)
        s = np.sum(np.maximum(-P - 0.5, 0) ** 2) + np.sum(np.maximum(-Q - 0.5, 0) ** 2)
        if s > 0:
            assert abs(3.0 * s * tau**3 + tau - 1) < 1e-12


def test_subproblem_scaling_structure():
    rng = np.random.default_rng(10)
    P, Q = rng.normal(size=(4, 2)), rng.normal(size=(2, 3))
    U, V, tau = solve_subproblem(P, Q, 0.2, 3.0, 1.5)
    SU, SV = np.maximum(-P - 0.2, 0), np.maximum(-Q - 0.2, 0)
    assert tau > 0
    np.testing.assert_allclose(U, tau * SU, rtol=0, atol=0)
    np.testing.assert_allclose(V, tau * SV, rtol=0, atol=0)


def test_oracle_output_nonnegative_and_optimal(small_inst):
    problem, oracle = build_dc_problem(small_inst)
    rng = np.random.default_rng(11)
    for _ in range(5):
        y = np.abs(rng.normal(size=small_inst.size))
        x = np.abs(rng.normal(size=small_inst.size))
        xi = small_inst.penalty_h_gradient(x)
        v = problem.L * small_inst.kernel_gradient(y) - small_inst.loss_gradient(y) + xi
        out = oracle.solve(v)
        assert np.all(out >= 0)
        # matches the thresholded form built from the (P, Q) parts
        P, Q = small_inst.subproblem_parts(y, xi)
        U, V, _ = solve_subproblem(P, Q, small_inst.l1_weight() / small_inst.L, small_inst.c1, small_inst.c2)
        np.testing.assert_allclose(out, np.concatenate([U.ravel(), V.ravel()]), rtol=1e-12, atol=1e-14)


def test_instance_defaults_and_validation():
    ratings = tiny_ratings()
    inst = MatcompInstance(ratings, 2)
    assert inst.c1 == 3.0
    assert inst.c2 == pytest.approx(np.linalg.norm(ratings.values))
    assert (inst.lam, inst.theta, inst.L, inst.l) == (0.1, 5.0, 1.0, 1.0)
    with pytest.raises(ValueError):
        MatcompInstance(ratings, 2, L=0.5)
    with pytest.raises(ValueError):
        inst.loss_value(np.zeros(3))


def test_initial_factors_range():
    inst = make_instance()
    x0 = initial_factors(inst, seed=3)
    hi = math.sqrt(np.mean(inst.values) / inst.t)
    assert np.all(x0 >= 0) and np.all(x0 <= hi)
    assert np.array_equal(x0, initial_factors(inst, seed=3))


def test_flatten_roundtrip():
    rng = np.random.default_rng(12)
    Z = FactorPair(rng.normal(size=(4, 2)), rng.normal(size=(2, 3)))
    back = FactorPair.from_flat(Z.flatten(), 4, 3, 2)
    assert np.array_equal(back.U, Z.U) and np.array_equal(back.V, Z.V)

import numpy as np
import pytest
from scipy.optimize import linprog

from drgl.simplex import SimplexError, solve_lp


def scipy_solve(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None):
    return linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                   bounds=(0, None), method="highs")


def test_simple_inequality_lp():
    # max x + y s.t. x + 2y <= 4, 3x + y <= 6  ->  min -(x + y)
    res = solve_lp([-1.0, -1.0], A_ub=[[1, 2], [3, 1]], b_ub=[4, 6])
    assert res.objective == pytest.approx(-2.8)
    assert res.x == pytest.approx([1.6, 1.2])
    # binding <= rows of a min problem carry nonpositive duals
    assert (res.duals_ub <= 1e-12).all()


def test_equality_lp_with_duals():
    # min x + 2y s.t. x + y = 1
    res = solve_lp([1.0, 2.0], A_eq=[[1.0, 1.0]], b_eq=[1.0])
    assert res.objective == pytest.approx(1.0)
    assert res.x == pytest.approx([1.0, 0.0])
    assert res.duals_eq[0] == pytest.approx(1.0)   # dV/db = 1


def test_infeasible_detected():
    with pytest.raises(SimplexError) as exc:
        solve_lp([1.0], A_eq=[[1.0]], b_eq=[1.0], A_ub=[[1.0]], b_ub=[0.5])
    assert exc.value.status == "infeasible"


def test_unbounded_detected():
    with pytest.raises(SimplexError) as exc:
        solve_lp([-1.0, 0.0], A_ub=[[0.0, 1.0]], b_ub=[1.0])
    assert exc.value.status == "unbounded"


def test_negative_rhs_handled():
    # x >= 2 encoded as -x <= -2, minimize x
    res = solve_lp([1.0], A_ub=[[-1.0]], b_ub=[-2.0])
    assert res.objective == pytest.approx(2.0)


def test_random_lps_match_scipy():
    rng = np.random.default_rng(0)
    solved = 0
    attempts = 0
    while solved < 40 and attempts < 200:
        attempts += 1
        m_eq = int(rng.integers(1, 4))
        m_ub = int(rng.integers(0, 4))
        n = int(rng.integers(m_eq + 1, 9))
        x_feas = rng.uniform(0.0, 2.0, size=n)
        A_eq = rng.normal(size=(m_eq, n))
        b_eq = A_eq @ x_feas
        A_ub = rng.normal(size=(m_ub, n)) if m_ub else None
        b_ub = (A_ub @ x_feas + rng.uniform(0.1, 1.0, size=m_ub)) if m_ub else None
        c = rng.normal(size=n)
        ref = scipy_solve(c, A_eq, b_eq, A_ub, b_ub)
        if ref.status != 0:
            continue
        res = solve_lp(c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub)
        assert res.objective == pytest.approx(ref.fun, abs=1e-7)
        assert (res.x >= -1e-9).all()
        if m_eq:
            assert A_eq @ res.x == pytest.approx(b_eq, abs=1e-8)
        if m_ub:
            assert (A_ub @ res.x <= b_ub + 1e-8).all()
        solved += 1
    assert solved == 40


def test_duals_match_scipy_marginals():
    rng = np.random.default_rng(5)
    for _ in range(10):
        n = 6
        x_feas = rng.uniform(0.5, 1.5, size=n)
        A_eq = rng.normal(size=(2, n))
        b_eq = A_eq @ x_feas
        A_ub = rng.normal(size=(3, n))
        b_ub = A_ub @ x_feas + rng.uniform(0.05, 0.5, size=3)
        c = rng.uniform(0.5, 2.0, size=n)
        ref = scipy_solve(c, A_eq, b_eq, A_ub, b_ub)
        if ref.status != 0:
            continue
        res = solve_lp(c, A_eq=A_eq, b_eq=b_eq, A_ub=A_ub, b_ub=b_ub)
        # HiGHS reports duals with the same value-function convention
        assert res.duals_eq == pytest.approx(ref.eqlin.marginals, abs=1e-6)
        assert res.duals_ub == pytest.approx(ref.ineqlin.marginals, abs=1e-6)


def test_warm_basis_used():
    # x + y = 1, minimize x: basis {y, slack} is feasible and optimal
    res = solve_lp([1.0, 0.0], A_eq=[[1.0, 1.0]], b_eq=[1.0],
                   A_ub=[[1.0, 0.0]], b_ub=[2.0], basis=[1, 2])
    assert res.objective == pytest.approx(0.0)
    assert res.iterations == 0

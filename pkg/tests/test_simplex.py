"""Exact-LP solver tests: hand-worked optima, edge statuses, and a
brute-force cross-check that enumerates basic feasible solutions."""

import itertools

import numpy as np
import pytest

from persphull.rationals import QQ, ZERO, ONE
from persphull.simplex import solve_lp, lp_feasible_point


def test_two_row_polygon_optimum():
    # max x+y over x+2y<=4, 3x+y<=6: vertices (0,0),(2,0),(0,2),(8/5,6/5);
    # the interior vertex wins with value 14/5.
    res = solve_lp(
        [1, 1],
        [[1, 2], [3, 1]],
        ["<=", "<="],
        [4, 6],
        maximize=True,
    )
    assert res.optimal
    assert res.objective == QQ(14, 5)
    assert res.x == [QQ(8, 5), QQ(6, 5)]


def test_negative_lower_bound_shift():
    # min x+y with x >= 1/2, y >= -2, x+y >= 1: the row is tight at optimum.
    res = solve_lp(
        [1, 1],
        [[1, 1]],
        [">="],
        [1],
        bounds=[(QQ(1, 2), None), (QQ(-2), None)],
    )
    assert res.optimal
    assert res.objective == ONE


def test_free_variables():
    # min y s.t. y >= x-3 and y >= -x+1 with both free: kink at (2,-1).
    res = solve_lp(
        [0, 1],
        [[-1, 1], [1, 1]],
        [">=", ">="],
        [-3, 1],
        bounds=[(None, None), (None, None)],
    )
    assert res.optimal
    assert res.objective == QQ(-1)
    assert res.x == [QQ(2), QQ(-1)]


def test_upper_bounds():
    # max 2x+3y on the unit box cut by x+y <= 3/2: optimum (1/2, 1) -> 4.
    res = solve_lp(
        [2, 3],
        [[1, 1]],
        ["<="],
        [QQ(3, 2)],
        bounds=[(ZERO, ONE), (ZERO, ONE)],
        maximize=True,
    )
    assert res.optimal
    assert res.objective == QQ(4)
    assert res.x == [QQ(1, 2), ONE]


def test_equality_and_redundant_row():
    # x+y=1 stated twice (scaled); min x is 0 with y picking up the slack.
    res = solve_lp(
        [1, 0],
        [[1, 1], [2, 2]],
        ["=", "="],
        [1, 2],
    )
    assert res.optimal
    assert res.objective == ZERO


def test_three_var_equality():
    res = solve_lp([2, 3, 1], [[1, 1, 1]], ["="], [1])
    assert res.optimal
    assert res.objective == ONE
    assert res.x == [ZERO, ZERO, ONE]


def test_infeasible():
    res = solve_lp([1], [[1]], [">="], [2], bounds=[(ZERO, ONE)])
    assert res.status == "infeasible"


def test_inverted_bounds_infeasible():
    res = solve_lp([1], [[1]], ["<="], [10], bounds=[(ONE, ZERO)])
    assert res.status == "infeasible"


def test_unbounded():
    res = solve_lp([-1], [], [], [])
    assert res.status == "unbounded"


def test_unbounded_free_direction():
    res = solve_lp(
        [1, -1],
        [[1, -1]],
        ["<="],
        [0],
        bounds=[(None, None), (None, None)],
    )
    assert res.status == "unbounded"


def test_beale_degenerate_cycle_guard():
    # A classically cycling instance under naive pivoting; the optimum is
    # -1/20 at (1/25, 0, 1, 0).  Exercises the anti-cycling fallback.
    res = solve_lp(
        [QQ(-3, 4), QQ(150), QQ(-1, 50), QQ(6)],
        [
            [QQ(1, 4), QQ(-60), QQ(-1, 25), QQ(9)],
            [QQ(1, 2), QQ(-90), QQ(-1, 50), QQ(3)],
            [ZERO, ZERO, ONE, ZERO],
        ],
        ["<=", "<=", "<="],
        [0, 0, 1],
    )
    assert res.optimal
    assert res.objective == QQ(-1, 20)
    assert res.x == [QQ(1, 25), ZERO, ONE, ZERO]


def test_feasible_point_helper():
    pt = lp_feasible_point([[1, 1]], [">="], [1], [(ZERO, None)] * 2, 2)
    assert pt is not None
    assert pt[0] + pt[1] >= 1
    assert lp_feasible_point([[1]], [">="], [1], [(ZERO, QQ(1, 2))], 1) is None


# ---------------------------------------------------------------------------
# Brute-force cross-check: enumerate all basic solutions of the slack form
# A x + s = b, x, s >= 0 and take the best feasible one.


def _solve_square(M, rhs):
    """Gaussian elimination over rationals; None when singular."""
    n = len(M)
    A = [list(row) + [rhs[i]] for i, row in enumerate(M)]
    for col in range(n):
        piv = next((r for r in range(col, n) if A[r][col] != 0), None)
        if piv is None:
            return None
        A[col], A[piv] = A[piv], A[col]
        inv = ONE / A[col][col]
        A[col] = [v * inv for v in A[col]]
        for r in range(n):
            if r != col and A[r][col] != 0:
                f = A[r][col]
                A[r] = [a - f * p for a, p in zip(A[r], A[col])]
    return [A[i][n] for i in range(n)]


def _best_vertex(c, rows, rhs):
    """Optimal objective over basic feasible solutions of the <=-system."""
    m, n = len(rows), len(c)
    cols = n + m
    best = None
    for basis in itertools.combinations(range(cols), m):
        M = [
            [
                (rows[i][j] if j < n else (ONE if j - n == i else ZERO))
                for j in basis
            ]
            for i in range(m)
        ]
        sol = _solve_square(M, rhs)
        if sol is None or any(v < 0 for v in sol):
            continue
        x = [ZERO] * n
        for j, v in zip(basis, sol):
            if j < n:
                x[j] = v
        val = sum((ci * xi for ci, xi in zip(c, x)), ZERO)
        if best is None or val < best:
            best = val
    return best


@pytest.mark.parametrize("seed", range(25))
def test_random_lp_matches_vertex_enumeration(seed):
    rng = np.random.default_rng(20260800 + seed)
    n = int(rng.integers(2, 5))
    m = int(rng.integers(1, 4))
    c = [QQ(int(rng.integers(-5, 6)), int(rng.integers(1, 4))) for _ in range(n)]
    rows = [
        [QQ(int(rng.integers(-4, 5)), int(rng.integers(1, 3))) for _ in range(n)]
        for _ in range(m)
    ]
    rhs = [QQ(int(rng.integers(0, 7))) for _ in range(m)]
    # Box row keeps the feasible set bounded so every instance has a vertex
    # optimum reachable by enumeration.
    rows.append([ONE] * n)
    rhs.append(QQ(10))
    senses = ["<="] * (m + 1)

    res = solve_lp(c, rows, senses, rhs)
    expected = _best_vertex(c, rows, rhs)
    assert res.optimal
    assert res.objective == expected
    for row, b in zip(rows, rhs):
        assert sum((a * v for a, v in zip(row, res.x)), ZERO) <= b
    assert all(v >= 0 for v in res.x)

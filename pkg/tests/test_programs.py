import math

import pytest

from persphull.atoms import Quadratic
from persphull.programs import (
    ConicProgram,
    Exp3,
    LinExpr,
    Nonneg,
    PerspEpi,
    ProgramBuilder,
    ProgramError,
    RotatedSOC3,
    Row,
)


def small_program():
    b = ProgramBuilder()
    t = b.add_variable("tau", group="tau")
    x = b.add_variable("x1", lb=0.0, group="x")
    z = b.add_variable("z1", kind="binary", group="z")
    b.add_row([(x, 1.0), (z, -2.0)], "<=", 0.0)
    b.add_cone(PerspEpi(Quadratic(), LinExpr.var(t), LinExpr.var(x),
                        LinExpr.var(z)))
    return b.build(LinExpr(((t, 1.0),)))


class TestLinExpr:
    def test_merges_and_drops_zero_terms(self):
        e = LinExpr(((2, 1.0), (0, 3.0), (2, -1.0), (1, 0.0)), 4.0)
        assert e.terms == ((0, 3.0),)
        assert e.const == 4.0

    def test_evaluate_and_negate(self):
        e = LinExpr(((0, 2.0), (2, -1.0)), 1.5)
        assert e.evaluate([1.0, 9.0, 3.0]) == 0.5
        assert (-e).evaluate([1.0, 9.0, 3.0]) == -0.5

    def test_var_and_shift(self):
        e = LinExpr.var(3, -2.0).shift(1.0)
        assert e.terms == ((3, -2.0),)
        assert e.const == 1.0


class TestRowViolation:
    def test_le(self):
        r = Row(LinExpr(((0, 1.0),)), "<=", 1.0)
        assert r.violation([0.5]) == 0.0
        assert r.violation([1.5]) == 0.5

    def test_ge(self):
        r = Row(LinExpr(((0, 1.0),)), ">=", 1.0)
        assert r.violation([1.5]) == 0.0
        assert r.violation([0.25]) == 0.75

    def test_eq(self):
        r = Row(LinExpr(((0, 1.0),)), "=", 1.0)
        assert r.violation([1.25]) == 0.25
        assert r.violation([0.75]) == 0.25

    def test_bad_sense(self):
        with pytest.raises(ProgramError):
            Row(LinExpr(((0, 1.0),)), "<", 1.0)


class TestConeViolation:
    def test_nonneg(self):
        c = Nonneg(LinExpr(((0, 1.0),), -1.0))
        assert c.violation([2.0]) == 0.0
        assert c.violation([0.5]) == 0.5

    def test_rotated_soc(self):
        c = RotatedSOC3(LinExpr.var(0), LinExpr.var(1), LinExpr.var(2))
        assert c.violation([1.0, 1.0, 1.0]) == 0.0
        assert c.violation([1.0, 1.0, 2.0]) == 3.0
        assert c.violation([-1.0, 1.0, 0.0]) == 1.0

    def test_exponential(self):
        c = Exp3(LinExpr.var(0), LinExpr.var(1), LinExpr.var(2))
        assert c.violation([1.0, 1.0, 0.0]) == 0.0
        assert c.violation([0.5, 1.0, 0.0]) == 0.5
        assert c.violation([1.0, 0.0, -1.0]) == 0.0
        assert c.violation([1.0, 0.0, 1.0]) == 1.0
        assert c.violation([-1.0, 0.0, -1.0]) == 1.0
        assert c.violation([1.0, -0.5, 0.0]) == 0.5

    def test_perspective_epigraph(self):
        c = PerspEpi(Quadratic(), LinExpr.var(0), LinExpr.var(1),
                     LinExpr.var(2))
        assert c.violation([0.25, 0.5, 1.0]) == 0.0
        assert c.violation([0.20, 0.5, 1.0]) == pytest.approx(0.05)
        assert c.violation([0.0, 0.0, 0.0]) == 0.0
        assert c.violation([5.0, 1.0, 0.0]) == math.inf
        assert c.violation([0.0, 0.0, -0.1]) == math.inf


class TestConicProgram:
    def test_relax_flips_binary_kinds_only(self):
        p = small_program()
        assert p.kinds == ("continuous", "continuous", "binary")
        r = p.relax()
        assert r.kinds == ("continuous", "continuous", "continuous")
        assert r.lb == p.lb and r.ub == p.ub
        assert r.rows == p.rows and r.cones == p.cones
        assert p.kinds[2] == "binary"

    def test_groups_and_indices(self):
        p = small_program()
        assert p.group("z") == (2,)
        assert p.variable_index("x1") == 1
        assert p.binary_indices() == (2,)
        with pytest.raises(ProgramError, match="group"):
            p.group("nope")
        with pytest.raises(ProgramError, match="named"):
            p.variable_index("nope")

    def test_fix_variable(self):
        p = small_program().fix_variable(2, 1.0)
        assert p.lb[2] == p.ub[2] == 1.0
        with pytest.raises(ProgramError, match="bounds"):
            small_program().fix_variable(2, 2.0)

    def test_with_objective(self):
        p = small_program().with_objective([(1, -1.0), (0, 1.0)])
        assert p.objective.terms == ((0, 1.0), (1, -1.0))
        assert p.objective_value([0.25, 0.5, 1.0]) == -0.25
        with pytest.raises(ProgramError):
            small_program().with_objective([(7, 1.0)])

    def test_constraint_violation(self):
        p = small_program()
        assert p.constraint_violation([0.25, 0.5, 1.0]) == 0.0
        assert p.constraint_violation([10.0, 2.5, 1.0]) == pytest.approx(0.5)
        assert p.constraint_violation([1.0, 0.5, 1.2]) == pytest.approx(0.2)
        assert p.constraint_violation([0.0, -1.0, 0.0]) == math.inf
        with pytest.raises(ProgramError):
            p.constraint_violation([0.0, 0.0])

    def test_integrality_violation(self):
        p = small_program()
        assert p.integrality_violation([9.0, 9.0, 1.0]) == 0.0
        assert p.integrality_violation([9.0, 9.0, 0.6]) == pytest.approx(0.4)

    def test_validation_errors(self):
        with pytest.raises(ProgramError, match="unique"):
            ConicProgram(("a", "a"), ("continuous",) * 2, (None,) * 2,
                         (None,) * 2)
        with pytest.raises(ProgramError, match="kind"):
            ConicProgram(("a",), ("int",), (None,), (None,))
        with pytest.raises(ProgramError, match="unknown variable"):
            ConicProgram(("a",), ("continuous",), (None,), (None,),
                         rows=(Row(LinExpr(((3, 1.0),)), "<=", 0.0),))

    def test_text_export(self):
        text = small_program().to_text()
        assert "var z1 binary [0, 1]" in text
        assert "min +1 tau" in text
        assert "+1 x1 -2 z1 <= 0" in text
        assert "persp_epi(quadratic" in text

    def test_builder_group_order(self):
        b = ProgramBuilder()
        b.add_variable("u", group="late")
        b.add_variable("v", group="early")
        b.add_variable("w", group="late")
        p = b.build()
        assert p.groups == (("late", (0, 2)), ("early", (1,)))

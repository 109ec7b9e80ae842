"""Immutable conic programs: variables, linear rows, and cone constraints.

A program couples a variable table (continuous or binary, with bounds)
with linear constraints, cone memberships, and a linear objective to
minimize.  Binary variables always live in [0, 1]; the continuous
relaxation just flips their kind.  Cone constraints reference affine
expressions of the declared variables, so a program is a complete,
solver-independent problem statement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .atoms import atom_to_text, eval_perspective_closure

SENSES = ("<=", ">=", "=")


class ProgramError(ValueError):
    """Invalid program construction or query."""


@dataclass(frozen=True)
class LinExpr:
    """Affine expression: sum of coef * variable plus a constant."""

    terms: tuple = ()
    const: float = 0.0

    def __post_init__(self):
        merged = {}
        for idx, coef in self.terms:
            if coef:
                merged[idx] = merged.get(idx, 0.0) + float(coef)
        object.__setattr__(self, "terms",
                           tuple(sorted((i, c) for i, c in merged.items() if c)))
        object.__setattr__(self, "const", float(self.const))

    def evaluate(self, x):
        return sum(c * x[i] for i, c in self.terms) + self.const

    def shift(self, delta):
        return LinExpr(self.terms, self.const + delta)

    def __neg__(self):
        return LinExpr(tuple((i, -c) for i, c in self.terms), -self.const)

    @staticmethod
    def var(idx, coef=1.0):
        return LinExpr(((idx, coef),))


@dataclass(frozen=True)
class Row:
    expr: LinExpr
    sense: str
    rhs: float

    def __post_init__(self):
        if self.sense not in SENSES:
            raise ProgramError(f"sense must be one of {SENSES}")
        object.__setattr__(self, "rhs", float(self.rhs))

    def violation(self, x):
        val = self.expr.evaluate(x)
        if self.sense == "<=":
            return max(0.0, val - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - val)
        return abs(val - self.rhs)


@dataclass(frozen=True)
class Nonneg:
    """expr >= 0."""

    expr: LinExpr

    def violation(self, x):
        return max(0.0, -self.expr.evaluate(x))


@dataclass(frozen=True)
class RotatedSOC3:
    """e1 * e2 >= e3^2 with e1, e2 >= 0."""

    e1: LinExpr
    e2: LinExpr
    e3: LinExpr

    def violation(self, x):
        v1, v2, v3 = (e.evaluate(x) for e in (self.e1, self.e2, self.e3))
        bound = max(0.0, -v1, -v2)
        if v1 >= 0 and v2 >= 0:
            return max(bound, v3 * v3 - v1 * v2)
        return max(bound, v3 * v3)


@dataclass(frozen=True)
class Exp3:
    """e1 >= e2 * exp(e3 / e2) for e2 > 0; e1 >= 0, e3 <= 0 when e2 = 0."""

    e1: LinExpr
    e2: LinExpr
    e3: LinExpr

    def violation(self, x):
        v1, v2, v3 = (e.evaluate(x) for e in (self.e1, self.e2, self.e3))
        if v2 < 0:
            return -v2
        if v2 == 0.0:
            return max(0.0, -v1, v3)
        try:
            need = v2 * math.exp(v3 / v2)
        except OverflowError:
            return math.inf
        return max(0.0, need - v1)


@dataclass(frozen=True)
class PerspEpi:
    """Perspective epigraph: h^pi(x_expr, w_expr) <= t_expr."""

    atom: object
    t: LinExpr
    x: LinExpr
    w: LinExpr

    def violation(self, point):
        tv = self.t.evaluate(point)
        xv = self.x.evaluate(point)
        wv = self.w.evaluate(point)
        val = eval_perspective_closure(self.atom, xv, wv)
        if val == math.inf:
            return math.inf
        return max(0.0, val - tv)


CONE_TYPES = (Nonneg, RotatedSOC3, Exp3, PerspEpi)


@dataclass(frozen=True)
class ConicProgram:
    """A minimization problem over named continuous/binary variables."""

    names: tuple
    kinds: tuple
    lb: tuple
    ub: tuple
    rows: tuple = ()
    cones: tuple = ()
    objective: LinExpr = LinExpr()
    groups: tuple = ()

    def __post_init__(self):
        n = len(self.names)
        if len(set(self.names)) != n:
            raise ProgramError("variable names must be unique")
        if not (len(self.kinds) == len(self.lb) == len(self.ub) == n):
            raise ProgramError("variable table fields must align")
        for kind in self.kinds:
            if kind not in ("continuous", "binary"):
                raise ProgramError(f"unknown variable kind {kind!r}")
        for k, (kind, lo, hi) in enumerate(zip(self.kinds, self.lb, self.ub)):
            if kind == "binary" and (lo != 0.0 or hi != 1.0):
                if lo not in (0.0, 1.0) or hi not in (0.0, 1.0) or lo > hi:
                    raise ProgramError("binary bounds must stay within {0, 1}")
        for _, idx in self.groups:
            for i in idx:
                if not 0 <= i < n:
                    raise ProgramError("group index out of range")
        for obj in list(self.rows) + list(self.cones):
            for expr in _exprs_of(obj):
                for i, _ in expr.terms:
                    if not 0 <= i < n:
                        raise ProgramError("expression references unknown variable")

    @property
    def nvars(self):
        return len(self.names)

    def variable_index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise ProgramError(f"no variable named {name!r}") from None

    def group(self, name):
        for g, idx in self.groups:
            if g == name:
                return idx
        raise ProgramError(f"no variable group named {name!r}; "
                           f"have {tuple(g for g, _ in self.groups)}")

    def has_group(self, name):
        return any(g == name for g, _ in self.groups)

    def binary_indices(self):
        return tuple(i for i, k in enumerate(self.kinds) if k == "binary")

    def relax(self):
        """Continuous relaxation: binary kinds become continuous in [0, 1]."""
        kinds = tuple("continuous" for _ in self.kinds)
        return replace(self, kinds=kinds)

    def relax_subset(self, indices):
        """Partial relaxation: only the given variables lose binariness."""
        chosen = set(indices)
        for i in chosen:
            if not 0 <= i < self.nvars:
                raise ProgramError("relaxation index out of range")
        kinds = tuple("continuous" if i in chosen else k
                      for i, k in enumerate(self.kinds))
        return replace(self, kinds=kinds)

    def fix_variable(self, idx, value):
        """A copy with one variable pinned by its bounds."""
        value = float(value)
        lo, hi = self.lb[idx], self.ub[idx]
        if (lo is not None and value < lo - 1e-12) or \
                (hi is not None and value > hi + 1e-12):
            raise ProgramError("fixing value lies outside the variable bounds")
        lb = self.lb[:idx] + (value,) + self.lb[idx + 1:]
        ub = self.ub[:idx] + (value,) + self.ub[idx + 1:]
        return replace(self, lb=lb, ub=ub)

    def with_objective(self, objective):
        """A copy minimizing the given affine expression."""
        if not isinstance(objective, LinExpr):
            objective = LinExpr(tuple(objective))
        for i, _ in objective.terms:
            if not 0 <= i < self.nvars:
                raise ProgramError("objective references unknown variable")
        return replace(self, objective=objective)

    def objective_value(self, x):
        return self.objective.evaluate(x)

    def bound_violation(self, x):
        worst = 0.0
        for v, lo, hi in zip(x, self.lb, self.ub):
            if lo is not None:
                worst = max(worst, lo - v)
            if hi is not None:
                worst = max(worst, v - hi)
        return worst

    def constraint_violation(self, x):
        """Largest violation across bounds, rows, and cones at a point."""
        if len(x) != self.nvars:
            raise ProgramError(f"point length {len(x)} != {self.nvars}")
        worst = self.bound_violation(x)
        for row in self.rows:
            worst = max(worst, row.violation(x))
            if worst == math.inf:
                return worst
        for cone in self.cones:
            worst = max(worst, cone.violation(x))
            if worst == math.inf:
                return worst
        return worst

    def integrality_violation(self, x):
        worst = 0.0
        for i in self.binary_indices():
            worst = max(worst, abs(x[i] - round(x[i])))
        return worst

    def to_text(self):
        """Plain-text dump: variables, objective, rows, cones."""
        out = ["# variables"]
        for name, kind, lo, hi in zip(self.names, self.kinds, self.lb, self.ub):
            lo_s = "-inf" if lo is None else f"{lo:g}"
            hi_s = "inf" if hi is None else f"{hi:g}"
            out.append(f"var {name} {kind} [{lo_s}, {hi_s}]")
        out.append("# minimize")
        out.append("min " + self._expr_text(self.objective))
        if self.rows:
            out.append("# linear rows")
            for row in self.rows:
                out.append(f"{self._expr_text(row.expr)} {row.sense} {row.rhs:g}")
        if self.cones:
            out.append("# cones")
            for cone in self.cones:
                out.append(self._cone_text(cone))
        return "\n".join(out) + "\n"

    def _expr_text(self, expr):
        parts = []
        for i, c in expr.terms:
            parts.append(f"{c:+g} {self.names[i]}")
        if expr.const or not parts:
            parts.append(f"{expr.const:+g}")
        return " ".join(parts)

    def _cone_text(self, cone):
        if isinstance(cone, Nonneg):
            return f"nonneg({self._expr_text(cone.expr)})"
        if isinstance(cone, RotatedSOC3):
            return ("rsoc3(" + ", ".join(self._expr_text(e) for e in
                                         (cone.e1, cone.e2, cone.e3)) + ")")
        if isinstance(cone, Exp3):
            return ("exp3(" + ", ".join(self._expr_text(e) for e in
                                        (cone.e1, cone.e2, cone.e3)) + ")")
        if isinstance(cone, PerspEpi):
            return (f"persp_epi({atom_to_text(cone.atom)}, "
                    f"t: {self._expr_text(cone.t)}, x: {self._expr_text(cone.x)}, "
                    f"w: {self._expr_text(cone.w)})")
        raise ProgramError(f"unknown cone type {type(cone).__name__}")


def _exprs_of(obj):
    if isinstance(obj, Row):
        return (obj.expr,)
    if isinstance(obj, Nonneg):
        return (obj.expr,)
    if isinstance(obj, (RotatedSOC3, Exp3)):
        return (obj.e1, obj.e2, obj.e3)
    if isinstance(obj, PerspEpi):
        return (obj.t, obj.x, obj.w)
    raise ProgramError(f"unknown constraint type {type(obj).__name__}")


class ProgramBuilder:
    """Mutable assembler producing an immutable ConicProgram."""

    def __init__(self):
        self._names = []
        self._kinds = []
        self._lb = []
        self._ub = []
        self._rows = []
        self._cones = []
        self._groups = {}
        self._order = []

    def add_variable(self, name, kind="continuous", lb=None, ub=None,
                     group=None):
        if kind == "binary":
            lb = 0.0 if lb is None else lb
            ub = 1.0 if ub is None else ub
        idx = len(self._names)
        self._names.append(name)
        self._kinds.append(kind)
        self._lb.append(lb)
        self._ub.append(ub)
        if group is not None:
            if group not in self._groups:
                self._groups[group] = []
                self._order.append(group)
            self._groups[group].append(idx)
        return idx

    def add_row(self, terms, sense, rhs):
        expr = terms if isinstance(terms, LinExpr) else LinExpr(tuple(terms))
        self._rows.append(Row(expr, sense, rhs))

    def add_cone(self, cone):
        if not isinstance(cone, CONE_TYPES):
            raise ProgramError(f"unknown cone type {type(cone).__name__}")
        self._cones.append(cone)

    def build(self, objective=LinExpr()):
        groups = tuple((g, tuple(self._groups[g])) for g in self._order)
        return ConicProgram(tuple(self._names), tuple(self._kinds),
                            tuple(self._lb), tuple(self._ub),
                            tuple(self._rows), tuple(self._cones),
                            objective, groups)

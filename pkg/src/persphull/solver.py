"""First-order solvers for perspective-cone programs.

solve_relaxation minimizes a continuous conic program by folding every
cone into perspective-epigraph terms, smoothing each perspective as
(w + mu) h(x / (w + mu)) with a decreasing mu schedule, and handling
the linear rows with an augmented-Lagrangian outer loop around a
projected accelerated-gradient inner loop.  Exponential-cone pairs
produced by the logistic builders are recognized and replaced by a
single bounded logistic perspective, which keeps the subproblems well
conditioned; a fixed slack cap contributes an extra w log w term,
shifted so the smoothed model never overestimates the true value.

branch_and_bound runs a best-bound search over the binary variables,
with node relaxations solved by the same machinery, warm starts from
the parent node, and incumbents obtained by rounding the binaries,
repairing the pattern against the binary-only rows, and re-solving the
restricted continuous program.

pattern_restricted_solve minimizes the original convex objective of an
instance over one fixed support pattern by a projected accelerated
gradient method.
"""

from __future__ import annotations

import csv
import heapq
import math
import threading
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .atoms import ExpMinusOne, Quadratic, ShiftedLogistic, atom_to_text
from .programs import Exp3, LinExpr, Nonneg, PerspEpi, RotatedSOC3

OPTIMAL = "Optimal"
UNBOUNDED = "Unbounded"
INFEASIBLE = "Infeasible"
ITER_LIMIT = "IterLimit"


class SolverError(ValueError):
    """Bad solver input or configuration."""


_INT_KEYS = {"max_outer", "warm_outer", "max_inner", "node_limit", "seed",
             "workers"}
_STR_KEYS = {"log_path"}


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and limits, readable from "key = value" text."""

    tol: float = 1e-6
    mu_init: float = 1e-1
    mu_floor: float = 1e-7
    mu_factor: float = 10.0
    rho_init: float = 10.0
    rho_growth: float = 4.0
    rho_cap: float = 1e9
    max_outer: int = 40
    warm_outer: int = 6
    max_inner: int = 3000
    time_limit: float | None = None
    node_limit: int | None = None
    target_gap: float = 0.0
    prune_tol: float = 1e-6
    int_tol: float = 1e-6
    seed: int = 0
    workers: int = 1
    log_path: str | None = None

    @classmethod
    def from_text(cls, text):
        """Parse "key = value" lines; '#' starts a comment."""
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not eq or not key or not val:
                raise SolverError(f"malformed config line {lineno}: {raw!r}")
            if key not in cls.__dataclass_fields__:
                raise SolverError(f"unknown config key {key!r}")
            values[key] = _parse_value(key, val)
        return cls(**values)

    def to_text(self):
        lines = []
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            lines.append(f"{name} = {'none' if value is None else value}")
        return "\n".join(lines) + "\n"


def _parse_value(key, val):
    if val.lower() == "none":
        return None
    if key in _STR_KEYS:
        return val
    if key in _INT_KEYS:
        return int(val)
    return float(val)


@dataclass(frozen=True)
class SolveResult:
    """Outcome of one continuous solve."""

    status: str
    objective: float
    primal: tuple
    iterations: int
    kkt_residual: float


@dataclass(frozen=True)
class BnbResult:
    """Outcome of a branch-and-bound run."""

    lower_bound: float
    incumbent: float
    incumbent_point: tuple
    gap: float
    nodes: int
    wall: float
    log: tuple


# ---------------------------------------------------------------------------
# expression helpers


def _expr_value(expr, vec):
    return sum(coef * vec[idx] for idx, coef in expr.terms) + expr.const


def _expr_neg(expr):
    return LinExpr(tuple((i, -c) for i, c in expr.terms), -expr.const)


def _expr_sub(a, b):
    terms = dict(a.terms)
    for idx, coef in b.terms:
        terms[idx] = terms.get(idx, 0.0) - coef
    return LinExpr(tuple(terms.items()), a.const - b.const)


def _expr_key(expr):
    return (expr.terms, expr.const)


def _single_bare_var(expr):
    if expr.const == 0.0 and len(expr.terms) == 1 and expr.terms[0][1] == 1.0:
        return expr.terms[0][0]
    return None


def _stack_exprs(exprs, n):
    rows, cols, data, const = [], [], [], []
    for k, expr in enumerate(exprs):
        const.append(expr.const)
        for idx, coef in expr.terms:
            rows.append(k)
            cols.append(idx)
            data.append(coef)
    mat = sp.csr_matrix((np.asarray(data, dtype=float),
                         (np.asarray(rows, dtype=int),
                          np.asarray(cols, dtype=int))),
                        shape=(len(exprs), n))
    return mat, np.asarray(const, dtype=float)


def _upper_bound_of(expr, lb, ub):
    total = expr.const
    for idx, coef in expr.terms:
        bound = ub[idx] if coef > 0 else lb[idx]
        if not math.isfinite(bound):
            return math.inf
        total += coef * bound
    return total


def _expr_scale(expr, s):
    return LinExpr(tuple((i, s * c) for i, c in expr.terms), s * expr.const)


def _expr_range(expr, lb, ub):
    """Interval of an affine expression over the current variable box."""
    lo = hi = expr.const
    for idx, coef in expr.terms:
        if coef > 0:
            lo += coef * lb[idx]
            hi += coef * ub[idx]
        else:
            lo += coef * ub[idx]
            hi += coef * lb[idx]
    return lo, hi


def _atom_key(atom):
    try:
        return atom_to_text(atom)
    except Exception:
        return f"id:{id(atom)}"


def _persp_lower(atom):
    if isinstance(atom, Quadratic) and atom.lin == 0.0 and atom.quad >= 0.0:
        return 0.0
    return -math.inf


def _second_vec(atom, v):
    """Central-difference curvature estimate, clipped to stay usable."""
    eps = 1e-5
    with np.errstate(over="ignore", invalid="ignore"):
        d2 = (atom.derivative_vec(v + eps)
              - atom.derivative_vec(v - eps)) / (2.0 * eps)
    return np.clip(np.nan_to_num(d2, nan=0.0, posinf=1e12, neginf=0.0),
                   0.0, 1e12)


def _cone_exprs(cone):
    if isinstance(cone, Nonneg):
        return (cone.expr,)
    if isinstance(cone, PerspEpi):
        return (cone.t, cone.x, cone.w)
    return (cone.e1, cone.e2, cone.e3)


# ---------------------------------------------------------------------------
# smooth model


class _Batch:
    """Perspective terms sharing one atom, evaluated in bulk.

    Objective batches enter as sum_k gamma_k persp(x_k, w_k); constraint
    batches enter as persp(x_k, w_k) - t_k <= 0 with one multiplier per
    term.  With entropy set, each term also carries ws log ws - shift(mu),
    the composite of a fixed-cap exponential pair, where the shift keeps
    the smoothed term at or below the unsmoothed one on [0, wmax].
    """

    def __init__(self, atom, entropy):
        self.atom = atom
        self.entropy = entropy
        self.x_exprs = []
        self.w_exprs = []
        self.gammas = []
        self.t_exprs = []
        self.wmaxes = []

    def add(self, x_expr, w_expr, gamma, t_expr, wmax):
        self.x_exprs.append(x_expr)
        self.w_exprs.append(w_expr)
        self.gammas.append(gamma)
        if t_expr is not None:
            self.t_exprs.append(t_expr)
        self.wmaxes.append(wmax)
        return len(self.x_exprs) - 1

    def freeze(self, n):
        self.size = len(self.x_exprs)
        self.Mx, self.cx = _stack_exprs(self.x_exprs, n)
        self.Mw, self.cw = _stack_exprs(self.w_exprs, n)
        self.Mx2 = self.Mx.multiply(self.Mx).tocsr()
        self.Mw2 = self.Mw.multiply(self.Mw).tocsr()
        self.gamma = np.asarray(self.gammas, dtype=float)
        self.wmax = np.minimum(np.asarray(self.wmaxes, dtype=float), 1e12)
        if self.t_exprs:
            self.Mt, self.ct = _stack_exprs(self.t_exprs, n)
            self.Mt2 = self.Mt.multiply(self.Mt).tocsr()

    def shift(self, mu):
        if not self.entropy:
            return 0.0
        w = np.maximum(self.wmax, 0.0)
        base = np.where(w > 0.0, w * np.log(np.maximum(w, 1e-300)), 0.0)
        return (w + mu) * np.log(w + mu) - base

    def xw(self, p):
        return self.Mx @ p + self.cx, self.Mw @ p + self.cw

    def values(self, p, mu):
        x, w = self.xw(p)
        ws = np.maximum(w, 0.0) + mu
        with np.errstate(over="ignore", invalid="ignore"):
            vals = ws * self.atom.value_vec(x / ws)
        if self.entropy:
            vals = vals + ws * np.log(ws) - self.shift(mu)
        return vals

    def values_grads(self, p, mu):
        x, w = self.xw(p)
        ws = np.maximum(w, 0.0) + mu
        v = x / ws
        with np.errstate(over="ignore", invalid="ignore"):
            hv = self.atom.value_vec(v)
            gx = self.atom.derivative_vec(v)
            vals = ws * hv
            gw = hv - v * gx
        if self.entropy:
            logw = np.log(ws)
            vals = vals + ws * logw - self.shift(mu)
            gw = gw + logw + 1.0
        return vals, gx, gw


class _Model:
    """Smooth reformulation of a conic program over its full variable set."""

    def __init__(self, program, lb=None, ub=None):
        self.program = program
        n = program.nvars
        self.n = n
        if lb is None:
            self.lb = np.array([-np.inf if b is None else float(b)
                                for b in program.lb], dtype=float)
        else:
            self.lb = np.asarray(lb, dtype=float).copy()
        if ub is None:
            self.ub = np.array([np.inf if b is None else float(b)
                                for b in program.ub], dtype=float)
        else:
            self.ub = np.asarray(ub, dtype=float).copy()
        self.binaries = tuple(program.binary_indices())
        self.c_full = np.zeros(n)
        for idx, coef in program.objective.terms:
            self.c_full[idx] += coef
        self.const = float(program.objective.const)
        self.const_smooth = self.const
        self.c = self.c_full.copy()
        self._lower_cones()
        self._interval_cache = None

    # -- cone lowering ---------------------------------------------------

    def _lower_cones(self):
        program = self.program
        pinned = {i: self.lb[i] for i in range(self.n)
                  if self.lb[i] == self.ub[i]}

        def subst(expr):
            if not any(i in pinned for i, _ in expr.terms):
                return expr
            const = expr.const
            keep = []
            for i, coef in expr.terms:
                if i in pinned:
                    const += coef * pinned[i]
                else:
                    keep.append((i, coef))
            return LinExpr(tuple(keep), const)

        def pin(idx, value):
            self.lb[idx] = self.ub[idx] = value
            pinned[idx] = value

        # variables pinned by equal bounds are constants; single-variable
        # rows tighten bounds (the projection enforces them exactly) and
        # may pin more variables; rows whose interval minimum equals the
        # right-hand side force every variable to its matching bound; and
        # cones with a constant scaling member collapse to their closure,
        # which is polyhedral.  Each reduction can enable the others, so
        # iterate everything to a joint fixpoint.
        self.presolve_infeasible = False
        rows_work = [(row.expr, row.sense, row.rhs) for row in program.rows]
        cones_work = []
        for cone in program.cones:
            if isinstance(cone, Nonneg):
                rows_work.append((cone.expr, ">=", 0.0))
            elif isinstance(cone, (Exp3, RotatedSOC3, PerspEpi)):
                cones_work.append(cone)
            else:
                raise SolverError(f"unsupported cone {type(cone).__name__}")
        while True:
            changed = False
            kept = []
            for expr, sense, rhs in rows_work:
                expr = subst(expr)
                if not expr.terms:
                    resid = expr.const - rhs
                    tol = 1e-9 * max(1.0, abs(rhs))
                    if sense == "=":
                        bad = abs(resid) > tol
                    elif sense == "<=":
                        bad = resid > tol
                    else:
                        bad = -resid > tol
                    if bad:
                        self.presolve_infeasible = True
                    changed = True
                    continue
                if len(expr.terms) == 1:
                    idx, coef = expr.terms[0]
                    value = (rhs - expr.const) / coef
                    if sense == "=":
                        self.lb[idx] = max(self.lb[idx], value)
                        self.ub[idx] = min(self.ub[idx], value)
                    elif (sense == "<=") == (coef > 0):
                        self.ub[idx] = min(self.ub[idx], value)
                    else:
                        self.lb[idx] = max(self.lb[idx], value)
                    if self.lb[idx] == self.ub[idx] and idx not in pinned:
                        pinned[idx] = self.lb[idx]
                    changed = True
                    continue
                lo, hi = _expr_range(expr, self.lb, self.ub)
                tol = 1e-9 * max(1.0, abs(rhs))
                if sense == "<=":
                    if lo > rhs + tol:
                        self.presolve_infeasible = True
                        changed = True
                        continue
                    if hi <= rhs:
                        changed = True
                        continue
                    if lo == rhs:
                        for idx, coef in expr.terms:
                            pin(idx, self.lb[idx] if coef > 0
                                else self.ub[idx])
                        changed = True
                        continue
                elif sense == ">=":
                    if hi < rhs - tol:
                        self.presolve_infeasible = True
                        changed = True
                        continue
                    if lo >= rhs:
                        changed = True
                        continue
                    if hi == rhs:
                        for idx, coef in expr.terms:
                            pin(idx, self.ub[idx] if coef > 0
                                else self.lb[idx])
                        changed = True
                        continue
                else:
                    if lo > rhs + tol or hi < rhs - tol:
                        self.presolve_infeasible = True
                        changed = True
                        continue
                    if lo == rhs or hi == rhs:
                        low_side = lo == rhs
                        for idx, coef in expr.terms:
                            at_lb = (coef > 0) == low_side
                            pin(idx, self.lb[idx] if at_lb
                                else self.ub[idx])
                        changed = True
                        continue
                kept.append((expr, sense, rhs))
            rows_work = kept

            kept_cones = []
            for cone in cones_work:
                if isinstance(cone, Exp3):
                    e1 = subst(cone.e1)
                    e2 = subst(cone.e2)
                    e3 = subst(cone.e3)
                    if not e2.terms:
                        c2 = e2.const
                        if c2 < -1e-12:
                            self.presolve_infeasible = True
                            changed = True
                            continue
                        if c2 <= 1e-12:
                            # closure face at zero scaling
                            rows_work.append((e1, ">=", 0.0))
                            rows_work.append((e3, "<=", 0.0))
                            changed = True
                            continue
                        if not e3.terms:
                            arg = e3.const / c2
                            if arg < 700.0:
                                rows_work.append((e1, ">=",
                                                  c2 * math.exp(arg)))
                            else:
                                self.presolve_infeasible = True
                            changed = True
                            continue
                        if not e1.terms:
                            if e1.const <= 0.0:
                                self.presolve_infeasible = True
                            else:
                                rows_work.append(
                                    (e3, "<=",
                                     c2 * math.log(e1.const / c2)))
                            changed = True
                            continue
                    cone = Exp3(e1, e2, e3)
                elif isinstance(cone, RotatedSOC3):
                    e1 = subst(cone.e1)
                    e2 = subst(cone.e2)
                    e3 = subst(cone.e3)
                    reduced = False
                    for ea, eb in ((e1, e2), (e2, e1)):
                        if ea.terms:
                            continue
                        ca = ea.const
                        if ca < -1e-12:
                            self.presolve_infeasible = True
                        elif ca <= 1e-12:
                            # degenerate face: the partner member stays
                            # nonnegative and the rotated term vanishes
                            rows_work.append((eb, ">=", 0.0))
                            rows_work.append((e3, "=", 0.0))
                        elif not e3.terms:
                            rows_work.append((eb, ">=",
                                              e3.const ** 2 / ca))
                        else:
                            continue
                        reduced = True
                        break
                    if reduced:
                        changed = True
                        continue
                    if not e1.terms and not e2.terms:
                        # both scalings constant and positive
                        s = math.sqrt(e1.const * e2.const)
                        rows_work.append((e3, "<=", s))
                        rows_work.append((e3, ">=", -s))
                        changed = True
                        continue
                    cone = RotatedSOC3(e1, e2, e3)
                else:
                    t = subst(cone.t)
                    x = subst(cone.x)
                    w = subst(cone.w)
                    if not w.terms:
                        cw = w.const
                        if cw < -1e-12:
                            self.presolve_infeasible = True
                            changed = True
                            continue
                        if cw <= 1e-12:
                            # closure at zero weight: the epigraph of the
                            # atom's recession function, linear per slope
                            sneg, spos = cone.atom.slope_limits()
                            if spos == math.inf:
                                rows_work.append((x, "<=", 0.0))
                            else:
                                rows_work.append(
                                    (_expr_sub(_expr_scale(x, spos), t),
                                     "<=", 0.0))
                            if sneg == -math.inf:
                                rows_work.append((x, ">=", 0.0))
                            else:
                                rows_work.append(
                                    (_expr_sub(_expr_scale(x, sneg), t),
                                     "<=", 0.0))
                            if spos == math.inf and sneg == -math.inf:
                                rows_work.append((t, ">=", 0.0))
                            changed = True
                            continue
                        if not x.terms:
                            rows_work.append(
                                (t, ">=",
                                 cw * cone.atom.value(x.const / cw)))
                            changed = True
                            continue
                    cone = PerspEpi(cone.atom, t, x, w)
                kept_cones.append(cone)
            cones_work = kept_cones
            if not changed:
                break
        for idx, value in pinned.items():
            if self.c[idx] != 0.0:
                self.const_smooth += self.c[idx] * value
                self.c[idx] = 0.0

        usage_rows = {}
        usage_cones = {}
        for r, (expr, _, _) in enumerate(rows_work):
            for idx, _ in expr.terms:
                usage_rows.setdefault(idx, []).append(r)
        for cpos, cone in enumerate(cones_work):
            for expr in _cone_exprs(cone):
                for idx, _ in expr.terms:
                    usage_cones.setdefault(idx, []).append(cpos)
        obj_vars = {int(i) for i in np.nonzero(self.c)[0]}

        terms = []
        self.pair_fills = []
        consumed_rows = set()
        consumed_cones = set()

        bare = {}
        for cpos, cone in enumerate(cones_work):
            if not isinstance(cone, Exp3):
                continue
            var = _single_bare_var(cone.e1)
            if var is not None and var not in bare:
                bare[var] = (cpos, cone)

        def slack_like(idx, row_id):
            return (idx not in obj_vars
                    and usage_rows.get(idx) == [row_id]
                    and len(usage_cones.get(idx, ())) == 1
                    and program.kinds[idx] == "continuous"
                    and self.lb[idx] in (-np.inf, 0.0)
                    and self.ub[idx] == np.inf)

        for r, (row_expr, sense, rhs) in enumerate(rows_work):
            if sense != "<=":
                continue
            ones = [idx for idx, coef in row_expr.terms
                    if coef == 1.0 and idx in bare]
            if len(ones) != 2:
                continue
            a, b = ones
            if not (slack_like(a, r) and slack_like(b, r)):
                continue
            cone_a, cone_b = bare[a][1], bare[b][1]
            if _expr_key(cone_a.e2) != _expr_key(cone_b.e2):
                continue
            w_expr = cone_a.e2
            rest = LinExpr(tuple((i, c) for i, c in row_expr.terms
                                 if i not in (a, b)),
                           row_expr.const - rhs)
            tightened = LinExpr(tuple((i, -2.0 * c) for i, c in w_expr.terms),
                                -2.0 * w_expr.const)
            if _expr_key(rest) == _expr_key(tightened):
                entropy = False
            elif not rest.terms and rest.const == -2.0:
                entropy = True
            else:
                continue
            first, second = cone_a, cone_b
            if (_single_bare_var(_expr_neg(cone_b.e3)) is not None
                    and _single_bare_var(_expr_neg(cone_a.e3)) is None):
                first, second = cone_b, cone_a
            t_expr = _expr_neg(first.e3)
            x_expr = _expr_sub(first.e3, second.e3)
            wmax = _upper_bound_of(w_expr, self.lb, self.ub) if entropy \
                else 0.0
            terms.append((ShiftedLogistic(), t_expr, x_expr, w_expr,
                          entropy, wmax))
            self.pair_fills.append((a, b, x_expr, w_expr, t_expr))
            consumed_rows.add(r)
            consumed_cones.add(bare[a][0])
            consumed_cones.add(bare[b][0])

        extra_le = []
        for cpos, cone in enumerate(cones_work):
            if cpos in consumed_cones:
                continue
            if isinstance(cone, Exp3):
                terms.append((ExpMinusOne(), _expr_sub(cone.e1, cone.e2),
                              cone.e3, cone.e2, False, 0.0))
            elif isinstance(cone, RotatedSOC3):
                terms.append((Quadratic(), cone.e1, cone.e3, cone.e2,
                              False, 0.0))
            else:
                terms.append((cone.atom, cone.t, cone.x, cone.w, False, 0.0))
            w_expr = terms[-1][3]
            if len(w_expr.terms) == 1 and w_expr.const == 0.0 \
                    and w_expr.terms[0][1] > 0:
                w_ok = self.lb[w_expr.terms[0][0]] >= 0.0
            else:
                w_ok = not w_expr.terms and w_expr.const >= 0.0
            if not w_ok:
                extra_le.append(_expr_neg(w_expr))

        # fold lonely epigraph variables into the objective
        term_usage = {}
        for slot, (_, t_expr, x_expr, w_expr, _, _) in enumerate(terms):
            for expr in (t_expr, x_expr, w_expr):
                for idx, _ in expr.terms:
                    term_usage.setdefault(idx, []).append(slot)

        obj_batches = {}
        con_batches = {}
        seen_cons = set()
        self.fills = []
        for slot, (atom, t_expr, x_expr, w_expr, entropy, wmax) in \
                enumerate(terms):
            tvar = None
            if len(t_expr.terms) == 1 and t_expr.terms[0][1] > 0:
                cand = t_expr.terms[0][0]
                lb_ok = (self.lb[cand] == -np.inf
                         or self.lb[cand] <= _persp_lower(atom))
                if (term_usage.get(cand) == [slot]
                        and cand not in usage_rows
                        and program.kinds[cand] == "continuous"
                        and self.ub[cand] == np.inf
                        and lb_ok
                        and self.c[cand] >= 0.0):
                    tvar = cand
            key = (_atom_key(atom), entropy)
            if tvar is not None:
                coef = t_expr.terms[0][1]
                gamma = self.c[tvar] / coef
                self.c[tvar] = 0.0
                self.const_smooth -= gamma * t_expr.const
                batch = obj_batches.setdefault(key, _Batch(atom, entropy))
                k = batch.add(x_expr, w_expr, gamma, None, wmax)
                self.fills.append((tvar, batch, k, coef, t_expr.const))
            else:
                dkey = (key, _expr_key(t_expr), _expr_key(x_expr),
                        _expr_key(w_expr), wmax)
                if dkey in seen_cons:
                    continue
                seen_cons.add(dkey)
                batch = con_batches.setdefault(key, _Batch(atom, entropy))
                batch.add(x_expr, w_expr, 1.0, t_expr, wmax)

        self.obj_batches = list(obj_batches.values())
        self.con_batches = list(con_batches.values())
        for batch in self.obj_batches + self.con_batches:
            batch.freeze(self.n)

        eq_rows, le_rows = [], []
        for r, (expr, sense, rhs) in enumerate(rows_work):
            if r in consumed_rows:
                continue
            shifted = LinExpr(expr.terms, expr.const - rhs)
            if sense == "=":
                eq_rows.append(shifted)
            elif sense == "<=":
                le_rows.append(shifted)
            else:
                le_rows.append(_expr_neg(shifted))
        for expr in extra_le:
            if not expr.terms:
                if expr.const > 1e-9:
                    self.presolve_infeasible = True
                continue
            if len(expr.terms) == 1:
                idx, coef = expr.terms[0]
                value = -expr.const / coef
                if coef > 0:
                    self.ub[idx] = min(self.ub[idx], value)
                else:
                    self.lb[idx] = max(self.lb[idx], value)
                continue
            le_rows.append(expr)
        self.A_eq, ceq = _stack_exprs(eq_rows, self.n)
        self.b_eq = -ceq
        self.A_le, cle = _stack_exprs(le_rows, self.n)
        self.b_le = -cle
        self.m_eq = len(eq_rows)
        self.m_le = len(le_rows)
        self.m_con = sum(b.size for b in self.con_batches)

    # -- evaluation ------------------------------------------------------

    def al_eval(self, p, mu, lam_eq, lam_le, lam_con, rho, need_grad):
        grad = self.c.copy() if need_grad else None
        val = float(self.c @ p) + self.const_smooth
        for batch in self.obj_batches:
            if need_grad:
                vals, gx, gw = batch.values_grads(p, mu)
            else:
                vals = batch.values(p, mu)
            contrib = batch.gamma @ vals
            if not np.isfinite(contrib):
                return math.inf, grad
            val += float(contrib)
            if need_grad:
                grad += batch.Mx.T @ (batch.gamma * gx)
                grad += batch.Mw.T @ (batch.gamma * gw)
        if self.m_eq:
            h = self.A_eq @ p - self.b_eq
            val += float(lam_eq @ h) + 0.5 * rho * float(h @ h)
            if need_grad:
                grad += self.A_eq.T @ (lam_eq + rho * h)
        if self.m_le:
            g = self.A_le @ p - self.b_le
            m = np.maximum(0.0, lam_le + rho * g)
            val += float(m @ m - lam_le @ lam_le) / (2.0 * rho)
            if need_grad:
                grad += self.A_le.T @ m
        pos = 0
        for batch in self.con_batches:
            if need_grad:
                vals, gx, gw = batch.values_grads(p, mu)
            else:
                vals = batch.values(p, mu)
            g = vals - (batch.Mt @ p + batch.ct)
            if not np.all(np.isfinite(g)):
                return math.inf, grad
            lam = lam_con[pos:pos + batch.size]
            m = np.maximum(0.0, lam + rho * g)
            val += float(m @ m - lam @ lam) / (2.0 * rho)
            if need_grad:
                grad += batch.Mx.T @ (m * gx)
                grad += batch.Mw.T @ (m * gw)
                grad -= batch.Mt.T @ m
            pos += batch.size
        if need_grad and not np.all(np.isfinite(grad)):
            return math.inf, grad
        return val, grad

    def objective_smooth(self, p, mu):
        val = float(self.c @ p) + self.const_smooth
        for batch in self.obj_batches:
            val += float(batch.gamma @ batch.values(p, mu))
        return val

    def residuals(self, p, mu):
        h = self.A_eq @ p - self.b_eq if self.m_eq else np.zeros(0)
        g = self.A_le @ p - self.b_le if self.m_le else np.zeros(0)
        parts = [batch.values(p, mu) - (batch.Mt @ p + batch.ct)
                 for batch in self.con_batches]
        gc = np.concatenate(parts) if parts else np.zeros(0)
        return h, g, gc

    def violation(self, p, mu):
        h, g, gc = self.residuals(p, mu)
        worst = 0.0
        if h.size:
            worst = max(worst, float(np.max(np.abs(h))))
        if g.size:
            worst = max(worst, float(np.max(g)))
        if gc.size:
            worst = max(worst, float(np.max(gc)))
        return worst

    def fill_point(self, p, mu):
        """Full primal with eliminated epigraph and slack variables restored."""
        out = p.copy()
        fill_vals = {}
        batches = {}
        for tvar, batch, k, coef, const in self.fills:
            batches[id(batch)] = batch
        for bid, batch in batches.items():
            x, w = batch.xw(p)
            ws = np.maximum(w, 0.0) + mu
            with np.errstate(over="ignore", invalid="ignore"):
                vals = ws * batch.atom.value_vec(x / ws)
            if batch.entropy:
                vals = vals + ws * np.log(ws)
            fill_vals[bid] = vals
        for tvar, batch, k, coef, const in self.fills:
            value = (float(fill_vals[id(batch)][k]) - const) / coef
            if self.lb[tvar] > -np.inf:
                value = max(value, self.lb[tvar])
            out[tvar] = value
        for u, v, x_expr, w_expr, t_expr in self.pair_fills:
            x = _expr_value(x_expr, out)
            w = _expr_value(w_expr, out)
            t = _expr_value(t_expr, out)
            ws = max(w, 0.0) + mu
            out[u] = ws * math.exp(min((-x - t) / ws, 700.0))
            out[v] = ws * math.exp(min(-t / ws, 700.0))
        return out

    def true_objective(self, filled):
        return float(self.c_full @ filled) + self.const

    def precondition(self, p, mu, lam_le, lam_con, rho):
        """Diagonal curvature estimate of the augmented Lagrangian at p."""
        D = np.zeros(self.n)
        for batch in self.obj_batches:
            x, w = batch.xw(p)
            ws = np.maximum(w, 0.0) + mu
            v = x / ws
            hpp = _second_vec(batch.atom, v)
            scale = 2.0 * np.abs(batch.gamma) * hpp / ws
            D += batch.Mx2.T @ scale
            D += batch.Mw2.T @ (scale * v * v)
            if batch.entropy:
                D += batch.Mw2.T @ (np.abs(batch.gamma) / ws)
        if self.m_eq:
            if not hasattr(self, "_eq_colsq"):
                self._eq_colsq = np.asarray(
                    self.A_eq.multiply(self.A_eq).sum(axis=0)).ravel()
            D += rho * self._eq_colsq
        if self.m_le:
            if not hasattr(self, "_le_sq"):
                self._le_sq = self.A_le.multiply(self.A_le).tocsc()
            g = self.A_le @ p - self.b_le
            active = (lam_le + rho * g > 0.0).astype(float)
            D += rho * (self._le_sq.T @ active)
        pos = 0
        for batch in self.con_batches:
            x, w = batch.xw(p)
            ws = np.maximum(w, 0.0) + mu
            v = x / ws
            with np.errstate(over="ignore", invalid="ignore"):
                hv = batch.atom.value_vec(v)
                gx = np.nan_to_num(batch.atom.derivative_vec(v),
                                   nan=0.0, posinf=1e6, neginf=-1e6)
            hpp = _second_vec(batch.atom, v)
            gw = np.nan_to_num(hv - v * gx, nan=0.0, posinf=1e6, neginf=-1e6)
            if batch.entropy:
                gw = gw + np.log(ws) + 1.0
            gvals = batch.values(p, mu) - (batch.Mt @ p + batch.ct)
            lam = lam_con[pos:pos + batch.size]
            m = np.maximum(0.0, lam + rho * gvals)
            active = (m > 0.0).astype(float)
            D += batch.Mx2.T @ (2.0 * rho * active * gx * gx
                                + 2.0 * m * hpp / ws)
            D += batch.Mw2.T @ (2.0 * rho * active * gw * gw
                                + 2.0 * m * hpp * v * v / ws)
            D += batch.Mt2.T @ (rho * active)
            pos += batch.size
        top = float(D.max()) if D.size else 0.0
        if top <= 0.0:
            return np.ones(self.n)
        return np.maximum(D, 1e-8 * max(1.0, top))

    def interval_infeasible(self, lb, ub):
        """Provable row infeasibility from bounds alone (no false positives)."""
        if self._interval_cache is None:
            self._interval_cache = (
                self.A_eq.maximum(0), self.A_eq.minimum(0),
                self.A_le.maximum(0), self.A_le.minimum(0))
        peq, neq, ple, nle = self._interval_cache
        lbc = np.clip(lb, -1e30, 1e30)
        ubc = np.clip(ub, -1e30, 1e30)
        if self.m_le:
            lo = ple @ lbc + nle @ ubc
            if np.any(lo > self.b_le + 1e-7):
                return True
        if self.m_eq:
            lo = peq @ lbc + neq @ ubc
            hi = peq @ ubc + neq @ lbc
            if np.any(lo > self.b_eq + 1e-7) or np.any(hi < self.b_eq - 1e-7):
                return True
        return False


# ---------------------------------------------------------------------------
# projected accelerated gradient inner loop


def _fista(eval_fn, p0, lb, ub, max_iter, tol, L0, deadline, D=None):
    """Monotone-safeguarded FISTA with backtracking and box projection.

    D is a diagonal metric; steps are y - g / (L D).  Returns
    (p, f(p), iterations, gradient-map norm, L, diverged).
    """
    if D is None:
        D = np.ones_like(p0)
    p = np.clip(p0, lb, ub)
    fp, gp = eval_fn(p, True)
    guard = 0
    while not np.isfinite(fp) or gp is None or not np.all(np.isfinite(gp)):
        p = np.clip(p * 0.5, lb, ub)
        fp, gp = eval_fn(p, True)
        guard += 1
        if guard > 80:
            return p, math.inf, guard, math.inf, L0, False
    y = p.copy()
    L = max(L0, 1e-10)
    theta = 1.0
    pg = math.inf
    it = 0
    stall = 0
    jump_snap = p.copy()
    jump_mark = 0
    for it in range(1, max_iter + 1):
        fy, gy = eval_fn(y, True)
        if not np.isfinite(fy) or not np.all(np.isfinite(gy)):
            y = p.copy()
            theta = 1.0
            L *= 10.0
            if L > 1e18:
                break
            continue
        while True:
            cand = np.clip(y - gy / (L * D), lb, ub)
            d = cand - y
            dd = float((D * d) @ d)
            fc, _ = eval_fn(cand, False)
            if fc <= fy + float(gy @ d) + 0.5 * L * dd \
                    + 1e-12 * (1.0 + abs(fy)):
                break
            L *= 2.0
            if L > 1e18:
                cand = y.copy()
                fc = fy
                dd = 0.0
                break
        pg = L * math.sqrt(dd) if dd > 0.0 else 0.0
        if fc > fp + 1e-12 * (1.0 + abs(fp)):
            y = p.copy()
            theta = 1.0
            L *= 2.0
            if L > 1e18:
                break
            continue
        restart = float((y - cand) @ (cand - p)) > 0.0
        theta_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        beta = (theta - 1.0) / theta_next
        if restart:
            y = cand.copy()
            theta_next = 1.0
        else:
            y = cand + beta * (cand - p)
        theta = theta_next
        if fc < fp - 1e-13 * (1.0 + abs(fp)):
            stall = 0
        else:
            stall += 1
        p, fp = cand, fc
        if pg <= tol or stall >= 250:
            break
        if float(np.max(np.abs(p))) > 1e9 or fp < -1e16:
            return p, fp, it, pg, L, True
        if it - jump_mark >= 250:
            # valley extrapolation: a diagonal metric cannot see a flat
            # direction shared by several penalty rows, so progress along
            # it crawls.  The recent displacement points down that valley;
            # a doubling line search on the function value jumps it.
            d = p - jump_snap
            if pg > tol and float(np.max(np.abs(d))) > 0.0:
                best_f, best_q = fp, None
                a, last = 1.0, p
                while a <= 2.0 ** 30:
                    q = np.clip(p + a * d, lb, ub)
                    if np.array_equal(q, last):
                        break
                    last = q
                    fq, _ = eval_fn(q, False)
                    if not (np.isfinite(fq)
                            and fq < best_f - 1e-15 * (1.0 + abs(best_f))):
                        break
                    best_f, best_q = fq, q
                    a *= 2.0
                if best_q is not None:
                    p, fp = best_q, best_f
                    y = p.copy()
                    theta = 1.0
                    stall = 0
            jump_snap = p.copy()
            jump_mark = it
        if deadline is not None and it % 64 == 0 \
                and time.monotonic() > deadline:
            break
        L = max(L * 0.9, 1e-10)
    return p, fp, it, pg, L, False


# ---------------------------------------------------------------------------
# augmented-Lagrangian outer loop


class _WarmState:
    __slots__ = ("p", "lam_eq", "lam_le", "lam_con", "rho", "L")

    def __init__(self, p, lam_eq, lam_le, lam_con, rho, L):
        self.p = p
        self.lam_eq = lam_eq
        self.lam_le = lam_le
        self.lam_con = lam_con
        self.rho = rho
        self.L = L


class _Solved:
    __slots__ = ("status", "p", "filled", "objective", "al_bound", "viol",
                 "pg", "kkt", "iters", "state", "mu")

    def __init__(self, **kw):
        self.kkt = math.inf
        for key, val in kw.items():
            setattr(self, key, val)


def _certify_unbounded(model, p, lb, ub):
    """Check a diverging iterate for a certified descent ray."""
    norm = float(np.linalg.norm(p))
    if norm < 1.0:
        return None
    d = p / norm
    d[np.abs(d) < 1e-12] = 0.0
    if np.any(d[np.isfinite(lb)] < -1e-9) or np.any(d[np.isfinite(ub)] > 1e-9):
        return None
    if model.m_eq and float(np.max(np.abs(model.A_eq @ d))) > 1e-9:
        return None
    if model.m_le and float(np.max(model.A_le @ d)) > 1e-9:
        return None
    slope = float(model.c @ d)
    for batch in model.obj_batches:
        x = batch.Mx @ d
        w = batch.Mw @ d
        if batch.entropy and np.any(np.abs(w) > 1e-9):
            return None
        if np.any(w < -1e-9):
            return None
        ws = np.maximum(w, 0.0) + 1e-14
        with np.errstate(over="ignore", invalid="ignore"):
            vals = ws * batch.atom.value_vec(x / ws)
        contrib = float(batch.gamma @ vals)
        if not math.isfinite(contrib):
            return None
        slope += contrib
    for batch in model.con_batches:
        x = batch.Mx @ d
        w = batch.Mw @ d
        t = batch.Mt @ d
        if np.any(w < -1e-9):
            return None
        ws = np.maximum(w, 0.0) + 1e-14
        with np.errstate(over="ignore", invalid="ignore"):
            vals = ws * batch.atom.value_vec(x / ws)
        if not np.all(vals - t <= 1e-9):
            return None
    if slope < -1e-8:
        return d
    return None


def _solve_model(model, cfg, lb, ub, warm=None, full=True, deadline=None):
    if model.presolve_infeasible or np.any(lb > ub + 1e-12):
        return _Solved(status=INFEASIBLE, p=None, filled=None,
                       objective=math.inf, al_bound=math.inf, viol=math.inf,
                       pg=math.inf, iters=0, state=None, mu=cfg.mu_floor)
    if warm is not None:
        p = np.clip(warm.p.copy(), lb, ub)
        if warm.lam_eq.size == model.m_eq and \
                warm.lam_le.size == model.m_le and \
                warm.lam_con.size == model.m_con:
            lam_eq = warm.lam_eq.copy()
            lam_le = warm.lam_le.copy()
            lam_con = warm.lam_con.copy()
        else:
            # the warm point came from a differently reduced model; its
            # multipliers do not line up, so only the primal carries over
            lam_eq = np.zeros(model.m_eq)
            lam_le = np.zeros(model.m_le)
            lam_con = np.zeros(model.m_con)
        rho = warm.rho
        L = warm.L
        mu = cfg.mu_floor
        outers = cfg.max_outer if full else cfg.warm_outer
    else:
        p = np.clip(np.zeros(model.n), lb, ub)
        lam_eq = np.zeros(model.m_eq)
        lam_le = np.zeros(model.m_le)
        lam_con = np.zeros(model.m_con)
        rho = cfg.rho_init
        L = 1.0
        mu = cfg.mu_init if full else cfg.mu_floor
        outers = cfg.max_outer if full else cfg.warm_outer

    total_iters = 0
    viol_prev = math.inf
    prev_obj = None
    dobj = math.inf
    status = ITER_LIMIT
    al_val = math.inf
    pg = math.inf
    rho_bumps = 0

    for _ in range(outers):
        at_floor = mu <= cfg.mu_floor * (1.0 + 1e-12)
        inner_tol = max(0.1 * cfg.tol, 0.01 * mu)
        budget = cfg.max_inner if at_floor else max(300, cfg.max_inner // 8)
        D = model.precondition(p, mu, lam_le, lam_con, rho)
        p, al_val, iters, pg, L, diverged = _fista(
            lambda q, ng: model.al_eval(q, mu, lam_eq, lam_le, lam_con,
                                        rho, ng),
            p, lb, ub, budget, inner_tol, 1.0, deadline, D)
        inner_done = pg <= inner_tol
        total_iters += iters
        if diverged:
            direction = _certify_unbounded(model, p, lb, ub)
            if direction is not None:
                return _Solved(status=UNBOUNDED, p=direction,
                               filled=direction, objective=-math.inf,
                               al_bound=-math.inf, viol=0.0, pg=pg, kkt=0.0,
                               iters=total_iters, state=None, mu=mu)
            break
        h, g, gc = model.residuals(p, mu)
        viol = 0.0
        if h.size:
            viol = max(viol, float(np.max(np.abs(h))))
        if g.size:
            viol = max(viol, float(np.max(g)))
        if gc.size:
            viol = max(viol, float(np.max(gc)))
        obj = model.objective_smooth(p, mu)
        if at_floor:
            _, gv = model.al_eval(p, mu, lam_eq, lam_le, lam_con, rho, True)
            pg = float(np.max(np.abs(p - np.clip(p - gv, lb, ub)))) \
                if np.all(np.isfinite(gv)) else pg
            if prev_obj is not None:
                dobj = abs(obj - prev_obj) / max(1.0, abs(obj))
            prev_obj = obj
        # stop on stalled objective + feasibility; the stationarity guard
        # rejects stops caused by a stuck inner loop rather than optimality
        if at_floor and viol <= cfg.tol and dobj <= cfg.tol and \
                pg <= math.sqrt(cfg.tol):
            status = OPTIMAL
            break
        lam_eq = lam_eq + rho * h
        if g.size:
            lam_le = np.maximum(0.0, lam_le + rho * g)
        if gc.size:
            lam_con = np.maximum(0.0, lam_con + rho * gc)
        # stiffen the penalty only when the subproblem was actually solved
        # yet feasibility stalled; growing it on an unconverged inner loop
        # inflates the curvature and feeds the stall instead of fixing it
        if inner_done and viol > 0.25 * viol_prev and viol > cfg.tol:
            rho = min(rho * cfg.rho_growth, cfg.rho_cap)
            rho_bumps += 1
        viol_prev = viol
        mu = max(cfg.mu_floor, mu / cfg.mu_factor)
        if deadline is not None and time.monotonic() > deadline:
            break

    final_viol = model.violation(p, mu)
    if status != OPTIMAL:
        if final_viol > max(1e3 * cfg.tol, 1e-5) and rho_bumps >= 5:
            status = INFEASIBLE
        elif final_viol <= cfg.tol and dobj <= cfg.tol and \
                pg <= math.sqrt(cfg.tol) and \
                mu <= cfg.mu_floor * (1.0 + 1e-12):
            status = OPTIMAL
    filled = model.fill_point(p, mu)
    objective = model.true_objective(filled)
    state = _WarmState(p.copy(), lam_eq.copy(), lam_le.copy(),
                       lam_con.copy(), rho, L)
    return _Solved(status=status, p=p, filled=filled, objective=objective,
                   al_bound=al_val, viol=final_viol, pg=pg,
                   kkt=max(final_viol, dobj if dobj < math.inf else pg),
                   iters=total_iters, state=state, mu=mu)


def solve_relaxation(program, config=None, warm=None):
    """Minimize a continuous perspective-cone program.

    Binary variables are treated through their box bounds; relax the
    program first if that distinction matters to the caller.
    """
    cfg = config if config is not None else SolverConfig()
    model = _Model(program)
    deadline = (time.monotonic() + cfg.time_limit
                if cfg.time_limit is not None else None)
    solved = _solve_model(model, cfg, model.lb, model.ub, warm=warm,
                          full=True, deadline=deadline)
    if solved.status == INFEASIBLE and solved.p is None:
        return SolveResult(INFEASIBLE, math.inf, (), 0, math.inf)
    if solved.status == UNBOUNDED:
        return SolveResult(UNBOUNDED, -math.inf, tuple(solved.p),
                           solved.iters, 0.0)
    return SolveResult(solved.status, solved.objective,
                       tuple(solved.filled), solved.iters, solved.kkt)


# ---------------------------------------------------------------------------
# pattern-restricted convex solves


def pattern_restricted_point(instance, z, objective=None, form="auto",
                             partition=None, config=None):
    """Minimize the instance objective over one support pattern.

    Returns (value, x) where x is the minimizer with x_i = 0 whenever
    z_i = 0.  The form picks the nonlinear part: "logistic" for the
    averaged label losses with the canonical regularizers, "separable"
    for per-coordinate atoms, "rank1" (or "rank1_plus" with the sign
    constraints active) for a single atom of one linear form, and
    "rank1_general" for block sums over a partition.  For non-logistic
    forms, objective is (c_tau, c_x, c_z) with c_tau >= 0; the returned
    value includes the c_z term.
    """
    cfg = config if config is not None else SolverConfig()
    d = instance.d
    zvec = np.asarray(z, dtype=float)
    if zvec.shape != (d,):
        raise SolverError(f"pattern length {zvec.size} does not match d={d}")
    free = zvec >= 0.5

    if form == "auto":
        if instance.labels:
            form = "logistic"
        elif len(instance.atoms) == d and (d > 1 or not instance.rows):
            form = "separable"
        else:
            form = "rank1"

    lb = np.where(free, -np.inf, 0.0)
    ub = np.where(free, np.inf, 0.0)
    if form in ("rank1_plus", "logistic"):
        sign = tuple(getattr(instance, "sign_constrained", ()))
        if sign:
            lb[np.asarray(sign, dtype=int)] = 0.0

    if form == "logistic":
        if objective is not None:
            raise SolverError("the logistic form fixes its own objective")
        A = np.asarray(instance.rows, dtype=float)
        bvec = np.asarray(instance.labels, dtype=float)
        nsamp = A.shape[0]
        lam_term = instance.lam * float(zvec.sum())
        muc = instance.mu

        def eval_fn(x, need_grad):
            m = bvec * (A @ x)
            val = float(np.logaddexp(0.0, -m).mean()) + lam_term \
                + muc * float(x @ x)
            if not need_grad:
                return val, None
            grad = A.T @ (bvec * -expit(-m)) / nsamp + 2.0 * muc * x
            return val, grad

        extra = 0.0
    else:
        if objective is None:
            c_tau, c_x, c_z = 1.0, np.zeros(d), np.zeros(d)
        else:
            c_tau, c_x, c_z = objective
            c_x = np.asarray(c_x, dtype=float)
            c_z = np.asarray(c_z, dtype=float)
        if c_tau < 0.0:
            raise SolverError("the atom weight c_tau must be nonnegative")
        extra = float(c_z @ zvec)

        if form == "separable":
            atoms = instance.atoms
            if len(atoms) != d:
                raise SolverError(
                    "separable form needs one atom per coordinate")

            def eval_fn(x, need_grad):
                val = float(c_x @ x)
                grad = c_x.copy() if need_grad else None
                for i, atom in enumerate(atoms):
                    val += c_tau * atom.value(float(x[i]))
                    if need_grad:
                        grad[i] += c_tau * float(
                            atom.derivative_vec(np.array([x[i]]))[0])
                return val, grad

        elif form in ("rank1", "rank1_plus"):
            atom = instance.atoms[0]
            a = np.asarray(instance.rows[0] if instance.rows
                           else [1.0] * d, dtype=float)

            def eval_fn(x, need_grad):
                s = float(a @ x)
                val = c_tau * atom.value(s) + float(c_x @ x)
                if not need_grad:
                    return val, None
                gs = float(atom.derivative_vec(np.array([s]))[0])
                return val, c_tau * gs * a + c_x

        elif form == "rank1_general":
            if partition is None:
                raise SolverError("rank1_general needs a partition")
            atom = instance.atoms[0]
            rows = [np.asarray(row, dtype=float) for row in instance.rows]

            def eval_fn(x, need_grad):
                val = float(c_x @ x)
                grad = c_x.copy() if need_grad else None
                for a in rows:
                    s = float(a @ x)
                    val += c_tau * atom.value(s)
                    if need_grad:
                        gs = float(atom.derivative_vec(np.array([s]))[0])
                        grad += c_tau * gs * a
                return val, grad

        else:
            raise SolverError(f"unknown pattern form {form!r}")

    x0 = np.zeros(d)
    x, fval, _, pg, _, diverged = _fista(
        eval_fn, x0, lb, ub, 4 * cfg.max_inner, max(1e-10, 0.01 * cfg.tol),
        1.0, None)
    if diverged or fval < -1e12:
        return -math.inf, tuple(x)
    return fval + extra, tuple(x)


def pattern_restricted_solve(instance, z, objective=None, form="auto",
                             partition=None, config=None):
    """Optimal value of the instance objective over one support pattern."""
    value, _ = pattern_restricted_point(instance, z, objective=objective,
                                        form=form, partition=partition,
                                        config=config)
    return value


# ---------------------------------------------------------------------------
# branch and bound


class _Node:
    __slots__ = ("bound", "fixings", "state", "depth")

    def __init__(self, bound, fixings, state, depth):
        self.bound = bound
        self.fixings = fixings
        self.state = state
        self.depth = depth


class _Search:
    """Shared branch-and-bound state; all mutation happens under one lock."""

    def __init__(self, model, cfg, binary_rows, start):
        self.model = model
        self.cfg = cfg
        self.binary_rows = binary_rows
        self.start = start
        self.heap = []
        self.seq = 0
        self.nodes = 0
        self.incumbent = math.inf
        self.incumbent_point = None
        self.pattern_cache = set()
        self.log = []
        self.active_bounds = {}
        self.done = False
        self.lock = threading.Lock()
        self.cv = threading.Condition(self.lock)

    def push(self, node):
        heapq.heappush(self.heap, (node.bound, self.seq, node))
        self.seq += 1

    def global_lb(self):
        candidates = [self.incumbent]
        if self.heap:
            candidates.append(self.heap[0][0])
        candidates.extend(self.active_bounds.values())
        return min(candidates)

    def gap(self):
        lb = self.global_lb()
        if not math.isfinite(self.incumbent):
            return math.inf
        return max(0.0, (self.incumbent - lb) / max(1.0, abs(self.incumbent)))

    def record(self, action, node_lb, depth, var=-1):
        self.log.append((len(self.log) + 1, depth, action,
                         None if node_lb is None else float(node_lb),
                         float(self.incumbent), float(min(self.gap(), 1e18)),
                         var, round(time.monotonic() - self.start, 6)))

    def over_limit(self):
        cfg = self.cfg
        if cfg.node_limit is not None and self.nodes >= cfg.node_limit:
            return True
        if cfg.time_limit is not None and \
                time.monotonic() - self.start > cfg.time_limit:
            return True
        if cfg.target_gap > 0.0 and math.isfinite(self.incumbent) and \
                self.gap() <= cfg.target_gap:
            return True
        return False


def _binary_only_rows(program, binaries):
    binset = set(binaries)
    rows = []
    for row in program.rows:
        if row.sense == "<=" and row.expr.terms and \
                all(idx in binset for idx, _ in row.expr.terms):
            rows.append((row.expr.terms, row.expr.const, row.rhs))
    return tuple(rows)


def _repair_pattern(pattern, relax_values, binary_rows):
    """Flip rounded binaries down until the binary-only rows hold."""
    values = dict(pattern)
    for _ in range(1 + len(values)):
        dirty = False
        for terms, const, rhs in binary_rows:
            lhs = sum(coef * values[idx] for idx, coef in terms) + const
            if lhs <= rhs + 1e-9:
                continue
            cand = [idx for idx, coef in terms
                    if coef > 0 and values[idx] > 0.5]
            if not cand:
                return None
            drop = min(cand, key=lambda i: (relax_values.get(i, 0.0), i))
            values[drop] = 0.0
            dirty = True
        if not dirty:
            return values
    return None


def branch_and_bound(program, config=None):
    """Best-bound search over the binary variables of a conic program."""
    cfg = config if config is not None else SolverConfig()
    model = _Model(program)
    start = time.monotonic()
    deadline = start + cfg.time_limit if cfg.time_limit is not None else None
    search = _Search(model, cfg, _binary_only_rows(program, model.binaries),
                     start)

    root = _solve_model(model, cfg, model.lb, model.ub, warm=None, full=True,
                        deadline=deadline)
    search.nodes = 1
    if root.status == INFEASIBLE:
        search.record("infeasible", None, 0)
        return _finish(search, math.inf)
    if root.status == UNBOUNDED:
        search.record("unbounded", -math.inf, 0)
        return _finish(search, -math.inf)

    with search.lock:
        _process_solved(search, _Node(root.al_bound, {}, root.state, 0), root)

    workers = max(1, cfg.workers)
    if workers == 1:
        _worker(search, deadline)
    else:
        threads = [threading.Thread(target=_worker, args=(search, deadline))
                   for _ in range(workers)]
        for thread in threads:
            thread.start()
        for thread in threads:
            thread.join()

    with search.lock:
        if search.heap or search.active_bounds:
            lb = search.global_lb()
        else:
            lb = search.incumbent
    return _finish(search, lb)


def _finish(search, lb):
    inc = search.incumbent
    point = tuple(search.incumbent_point) \
        if search.incumbent_point is not None else ()
    if math.isfinite(inc):
        gap = max(0.0, (inc - lb) / max(1.0, abs(inc)))
    else:
        gap = 0.0 if lb >= inc or not math.isfinite(lb) else math.inf
    result = BnbResult(lb, inc, point, gap, search.nodes,
                       time.monotonic() - search.start, tuple(search.log))
    if search.cfg.log_path:
        with open(search.cfg.log_path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(("node", "depth", "action", "bound", "incumbent",
                             "gap", "variable", "seconds"))
            writer.writerows(search.log)
    return result


def _worker(search, deadline):
    model, cfg = search.model, search.cfg
    while True:
        with search.cv:
            while not search.done and not search.heap and \
                    search.active_bounds:
                search.cv.wait(0.05)
            if search.done or (not search.heap and not search.active_bounds):
                search.done = True
                search.cv.notify_all()
                return
            bound, _, node = heapq.heappop(search.heap)
            scale = max(1.0, abs(search.incumbent))
            if bound >= search.incumbent - cfg.prune_tol * scale:
                search.record("pruned", bound, node.depth)
                if not search.heap and not search.active_bounds:
                    search.done = True
                    search.cv.notify_all()
                continue
            if search.over_limit():
                search.push(node)
                search.done = True
                search.cv.notify_all()
                return
            token = object()
            search.active_bounds[token] = bound
            search.nodes += 1

        lb = model.lb.copy()
        ub = model.ub.copy()
        for idx, val in node.fixings.items():
            lb[idx] = ub[idx] = val
        if model.interval_infeasible(lb, ub):
            solved = None
        else:
            # fixed binaries cascade through the cone reductions, so a
            # node-local model is much smoother than the shared one
            sub = _Model(model.program, lb, ub) if node.fixings else model
            solved = _solve_model(sub, cfg, sub.lb, sub.ub, warm=node.state,
                                  full=False, deadline=deadline)

        with search.cv:
            del search.active_bounds[token]
            if solved is None or solved.status == INFEASIBLE:
                search.record("infeasible", node.bound, node.depth)
            else:
                node.bound = max(node.bound, solved.al_bound)
                _process_solved(search, node, solved)
            if not search.heap and not search.active_bounds:
                search.done = True
            search.cv.notify_all()


def _process_solved(search, node, solved):
    """Branch, prune, or accept a solved node; the caller holds the lock."""
    model, cfg = search.model, search.cfg
    node_lb = node.bound if solved.status != UNBOUNDED else -math.inf
    scale = max(1.0, abs(search.incumbent))
    zvals = {i: float(solved.p[i]) for i in model.binaries}
    integral = all(abs(v - round(v)) <= cfg.int_tol for v in zvals.values())

    if integral or solved.viol <= 10.0 * cfg.tol:
        pattern = {i: float(round(v)) for i, v in zvals.items()}
        repaired = _repair_pattern(pattern, zvals, search.binary_rows)
        if repaired is not None:
            key = tuple(sorted(repaired.items()))
            if key not in search.pattern_cache:
                search.pattern_cache.add(key)
                value, point = _restricted_value(search, repaired, solved)
                if value is not None and value < search.incumbent - 1e-12:
                    search.incumbent = value
                    search.incumbent_point = point

    if node_lb >= search.incumbent - cfg.prune_tol * \
            max(1.0, abs(search.incumbent)):
        search.record("pruned", node_lb, node.depth)
        return
    if integral:
        search.record("leaf", node_lb, node.depth)
        return
    frac_items = [(i, min(zvals[i], 1.0 - zvals[i]))
                  for i in model.binaries if i not in node.fixings]
    if not frac_items:
        search.record("leaf", node_lb, node.depth)
        return
    var = max(frac_items, key=lambda item: (item[1], -item[0]))[0]
    for val in (0.0, 1.0):
        fixings = dict(node.fixings)
        fixings[var] = val
        search.push(_Node(node_lb, fixings, solved.state, node.depth + 1))
    search.record("branched", node_lb, node.depth, var)


def _restricted_value(search, pattern, solved):
    """Solve the continuous restriction at one binary pattern."""
    model, cfg = search.model, search.cfg
    lb = model.lb.copy()
    ub = model.ub.copy()
    for idx, val in pattern.items():
        lb[idx] = ub[idx] = val
    if model.interval_infeasible(lb, ub):
        return None, None
    sub = _Model(model.program, lb, ub)
    res = _solve_model(sub, cfg, sub.lb, sub.ub, warm=solved.state,
                       full=False)
    if res.status in (INFEASIBLE, UNBOUNDED) or res.viol > 10.0 * cfg.tol:
        return None, None
    return res.objective, tuple(res.filled)

"""Exact two-phase dense simplex over the rationals.

This is the LP oracle used by the polytope and hull verification machinery.
Everything is exact: coefficients, pivots, optima.  The pivot rule is
Dantzig's (most negative reduced cost) for speed, switching to Bland's rule
after a streak of degenerate pivots so termination is guaranteed.

Problems are stated as

    min c.x   s.t.  rows_k . x  (<=|=|>=)  rhs_k,   lo_j <= x_j <= up_j

with per-variable bounds where ``None`` means unbounded on that side.
Free variables are split internally; nonzero lower bounds are shifted;
finite upper bounds become rows.
"""

from __future__ import annotations

from dataclasses import dataclass

from .rationals import QQ, ZERO, ONE

_BLAND_TRIGGER = 32  # degenerate pivots before switching to Bland's rule


@dataclass
class LPResult:
    status: str  # 'optimal' | 'infeasible' | 'unbounded'
    objective: object | None = None  # exact rational when optimal
    x: list | None = None  # exact rationals, original variable order

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


def solve_lp(c, rows, senses, rhs, bounds=None, maximize=False) -> LPResult:
    """Solve a rational LP exactly.  See module docstring for conventions."""
    n = len(c)
    c = [QQ(v) for v in c]
    rows = [[QQ(v) for v in row] for row in rows]
    rhs = [QQ(v) for v in rhs]
    if bounds is None:
        bounds = [(ZERO, None)] * n
    if len(bounds) != n:
        raise ValueError("bounds length mismatch")
    for row in rows:
        if len(row) != n:
            raise ValueError("row length mismatch")
    if maximize:
        c = [-v for v in c]

    # Variable transformation to nonnegative internal columns.
    # col_terms[j] = list of (internal_col, sign); offsets[j] shifts back.
    col_terms: list[list[tuple[int, int]]] = []
    offsets: list = []
    ncols = 0
    extra_rows: list[tuple[list[tuple[int, object]], str, object]] = []
    for j in range(n):
        lo, hi = bounds[j]
        lo = None if lo is None else QQ(lo)
        hi = None if hi is None else QQ(hi)
        if lo is not None and hi is not None and hi < lo:
            return LPResult("infeasible")
        if lo is None:
            plus, minus = ncols, ncols + 1
            ncols += 2
            col_terms.append([(plus, 1), (minus, -1)])
            offsets.append(ZERO)
            if hi is not None:
                extra_rows.append(([(plus, ONE), (minus, -ONE)], "<=", hi))
        else:
            col = ncols
            ncols += 1
            col_terms.append([(col, 1)])
            offsets.append(lo)
            if hi is not None:
                extra_rows.append(([(col, ONE)], "<=", hi - lo))

    def expand(dense_row, rhs_val):
        """Rewrite a row over original vars into internal columns + new rhs."""
        out = [ZERO] * ncols
        shift = ZERO
        for j, coef in enumerate(dense_row):
            if coef == 0:
                continue
            shift += coef * offsets[j]
            for col, sign in col_terms[j]:
                out[col] += coef if sign > 0 else -coef
        return out, rhs_val - shift

    std_rows, std_senses, std_rhs = [], [], []
    for row, sense, b in zip(rows, senses, rhs):
        r, b2 = expand(row, b)
        std_rows.append(r)
        std_senses.append(sense)
        std_rhs.append(b2)
    for terms, sense, b in extra_rows:
        r = [ZERO] * ncols
        for col, v in terms:
            r[col] += v
        std_rows.append(r)
        std_senses.append(sense)
        std_rhs.append(b)

    obj = [ZERO] * ncols
    obj_shift = ZERO
    for j, coef in enumerate(c):
        if coef == 0:
            continue
        obj_shift += coef * offsets[j]
        for col, sign in col_terms[j]:
            obj[col] += coef if sign > 0 else -coef

    status, xcols, value = _two_phase(obj, std_rows, std_senses, std_rhs)
    if status != "optimal":
        return LPResult(status)
    xs = []
    for j in range(n):
        val = offsets[j]
        for col, sign in col_terms[j]:
            val = val + xcols[col] if sign > 0 else val - xcols[col]
        xs.append(val)
    total = value + obj_shift
    if maximize:
        total = -total
    return LPResult("optimal", total, xs)


def lp_feasible_point(rows, senses, rhs, bounds, nvars) -> list | None:
    """Phase-1 feasibility: a satisfying point, or None."""
    res = solve_lp([ZERO] * nvars, rows, senses, rhs, bounds)
    if res.status == "optimal":
        return res.x
    return None


def _two_phase(c, rows, senses, rhs):
    """Core: min c.x, rows with senses, x >= 0.  Returns (status, x, value)."""
    m = len(rows)
    n = len(c)
    # Normalize rhs >= 0.
    rows = [list(r) for r in rows]
    rhs = list(rhs)
    senses = list(senses)
    for i in range(m):
        if rhs[i] < 0:
            rows[i] = [-v for v in rows[i]]
            rhs[i] = -rhs[i]
            senses[i] = {"<=": ">=", ">=": "<=", "=": "="}[senses[i]]

    # Column layout: structural | slacks/surplus | artificials.
    slack_cols: dict[int, int] = {}
    art_cols: dict[int, int] = {}
    ncols = n
    for i, s in enumerate(senses):
        if s == "<=":
            slack_cols[i] = ncols
            ncols += 1
        elif s == ">=":
            slack_cols[i] = ncols
            ncols += 1
    for i, s in enumerate(senses):
        if s in (">=", "="):
            art_cols[i] = ncols
            ncols += 1

    T = [[ZERO] * ncols for _ in range(m)]
    basis = [0] * m
    for i in range(m):
        row = rows[i]
        Ti = T[i]
        for j in range(n):
            if row[j] != 0:
                Ti[j] = row[j]
        s = senses[i]
        if s == "<=":
            Ti[slack_cols[i]] = ONE
            basis[i] = slack_cols[i]
        elif s == ">=":
            Ti[slack_cols[i]] = -ONE
            Ti[art_cols[i]] = ONE
            basis[i] = art_cols[i]
        else:
            Ti[art_cols[i]] = ONE
            basis[i] = art_cols[i]
    b = list(rhs)

    artificial = set(art_cols.values())

    if artificial:
        # Phase 1: min sum of artificials.
        obj1 = [ZERO] * ncols
        for col in artificial:
            obj1[col] = ONE
        red, val = _price(obj1, T, b, basis)
        status = _iterate(T, b, basis, red, val, ncols)
        if status != "optimal":  # phase 1 cannot be unbounded
            return "infeasible", None, None
        if val[0] > 0:
            return "infeasible", None, None
        # Pivot artificials out of the basis where possible; drop what remains.
        keep = []
        for i in range(m):
            if basis[i] in artificial:
                piv = None
                for j in range(ncols):
                    if j not in artificial and T[i][j] != 0:
                        piv = j
                        break
                if piv is None:
                    continue  # redundant row
                _pivot(T, b, basis, red, val, i, piv)
            keep.append(i)
        if len(keep) != m:
            T = [T[i] for i in keep]
            b = [b[i] for i in keep]
            basis = [basis[i] for i in keep]
            m = len(keep)
        # Freeze artificial columns at zero.
        for row in T:
            for col in artificial:
                row[col] = ZERO

    obj2 = list(c) + [ZERO] * (ncols - n)
    red, val = _price(obj2, T, b, basis)
    status = _iterate(T, b, basis, red, val, ncols, blocked=artificial)
    if status == "unbounded":
        return "unbounded", None, None
    x = [ZERO] * ncols
    for i in range(m):
        x[basis[i]] = b[i]
    return "optimal", x[:n], val[0]


def _price(obj, T, b, basis):
    """Reduced-cost row and objective value for the current basis."""
    red = list(obj)
    val = [ZERO]
    for i, bi in enumerate(basis):
        cb = obj[bi]
        if cb != 0:
            Ti = T[i]
            for j in range(len(red)):
                if Ti[j] != 0:
                    red[j] -= cb * Ti[j]
            val[0] += cb * b[i]
    return red, val


def _pivot(T, b, basis, red, val, r, col):
    piv = T[r][col]
    Tr = T[r]
    if piv != 1:
        inv = ONE / piv
        for j in range(len(Tr)):
            if Tr[j] != 0:
                Tr[j] *= inv
        b[r] *= inv
    for i in range(len(T)):
        if i == r:
            continue
        f = T[i][col]
        if f == 0:
            continue
        Ti = T[i]
        for j in range(len(Tr)):
            if Tr[j] != 0:
                Ti[j] -= f * Tr[j]
        b[i] -= f * b[r]
    f = red[col]
    if f != 0:
        for j in range(len(Tr)):
            if Tr[j] != 0:
                red[j] -= f * Tr[j]
        val[0] += f * b[r]
    basis[r] = col


def _iterate(T, b, basis, red, val, ncols, blocked=frozenset()):
    """Run simplex pivots until optimal or unbounded."""
    m = len(T)
    degenerate_streak = 0
    bland = False
    while True:
        enter = -1
        if bland:
            for j in range(ncols):
                if j not in blocked and red[j] < 0:
                    enter = j
                    break
        else:
            best = ZERO
            for j in range(ncols):
                if j not in blocked and red[j] < best:
                    best = red[j]
                    enter = j
        if enter < 0:
            return "optimal"
        leave = -1
        best_ratio = None
        for i in range(m):
            a = T[i][enter]
            if a > 0:
                ratio = b[i] / a
                if best_ratio is None or ratio < best_ratio:
                    best_ratio = ratio
                    leave = i
                elif ratio == best_ratio and basis[i] < basis[leave]:
                    leave = i  # Bland-compatible tie break on basis index
        if leave < 0:
            return "unbounded"
        if best_ratio == 0:
            degenerate_streak += 1
            if degenerate_streak >= _BLAND_TRIGGER:
                bland = True
        else:
            degenerate_streak = 0
            bland = False
        _pivot(T, b, basis, red, val, leave, enter)

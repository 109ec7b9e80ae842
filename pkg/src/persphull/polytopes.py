"""Exact polyhedral descriptions of the activation sets' convex hulls.

Every polytope here is stored as explicit inequality rows over named
variables with rational coefficients.  All variables are implicitly
nonnegative; upper bounds and every other restriction appear as rows.
Lifted descriptions carry named auxiliary variables flagged as
projectable, and feasibility or optimization queries account for them
through exact linear programming.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import gcd

from . import binsets
from .rationals import QQ, ZERO, ONE, rat_str
from .simplex import lp_feasible_point, solve_lp

SENSES = ("<=", ">=", "=")

# Bound-propagation pass limit before falling back to an exact LP.
_PROPAGATION_PASSES = 80


class PolytopeError(ValueError):
    """Invalid polytope construction or query."""


@dataclass(frozen=True)
class PolyRow:
    """One linear constraint: coeffs . x  (sense)  rhs."""

    coeffs: tuple
    sense: str
    rhs: object
    group: str = ""

    def __post_init__(self):
        if self.sense not in SENSES:
            raise PolytopeError(f"sense must be one of {SENSES}, got {self.sense!r}")
        coeffs = tuple(QQ(c) for c in self.coeffs)
        if all(c == 0 for c in coeffs):
            raise PolytopeError("constraint rows must have a nonzero coefficient")
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "rhs", QQ(self.rhs))


def _scaled_int_row(row):
    """Rescale a row to integer data (positive multiple, same solution set)."""
    denom = 1
    for c in list(row.coeffs) + [row.rhs]:
        denom = denom * int(c.denominator) // gcd(denom, int(c.denominator))
    coeffs = tuple(int(c * denom) for c in row.coeffs)
    return coeffs, int(row.rhs * denom)


@dataclass(frozen=True)
class LinearPolytope:
    """A polytope over named, implicitly nonnegative variables.

    ``projectable`` names trailing auxiliary variables of a lifted
    description; the polytope's meaning is its projection onto the
    remaining (main) variables.
    """

    names: tuple
    rows: tuple
    projectable: tuple = ()

    def __post_init__(self):
        names = tuple(str(n) for n in self.names)
        if len(set(names)) != len(names):
            raise PolytopeError("variable names must be unique")
        proj = tuple(str(n) for n in self.projectable)
        for n in proj:
            if n not in names:
                raise PolytopeError(f"projectable name {n!r} is not a variable")
        if proj and names[-len(proj):] != proj:
            raise PolytopeError("projectable variables must come last")
        rows = tuple(r if isinstance(r, PolyRow) else PolyRow(*r) for r in self.rows)
        for r in rows:
            if len(r.coeffs) != len(names):
                raise PolytopeError("row length must match the variable count")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "projectable", proj)
        object.__setattr__(self, "rows", rows)
        # Sparse integer form of each row, used by the exact fast paths.
        sparse = []
        for r in rows:
            coeffs, rhs = _scaled_int_row(r)
            idx = tuple(j for j, c in enumerate(coeffs) if c)
            sparse.append((idx, tuple(coeffs[j] for j in idx), r.sense, rhs))
        object.__setattr__(self, "_sparse", tuple(sparse))

    @property
    def n_all(self):
        return len(self.names)

    @property
    def n_main(self):
        return len(self.names) - len(self.projectable)

    @property
    def main_names(self):
        return self.names[:self.n_main]

    def groups(self):
        return tuple(sorted({r.group for r in self.rows}))

    def without_group(self, group):
        """A copy with one named row group deleted (for mutation studies)."""
        if group not in {r.group for r in self.rows}:
            raise PolytopeError(f"unknown row group {group!r}; have {self.groups()}")
        kept = tuple(r for r in self.rows if r.group != group)
        return LinearPolytope(self.names, kept, self.projectable)

    def to_text(self):
        """One inequality per line: coefficients, sense, right-hand side."""
        lines = ["# vars: " + " ".join(self.names)]
        if self.projectable:
            lines.append("# projectable: " + " ".join(self.projectable))
        for r in self.rows:
            coeffs = " ".join(rat_str(c) for c in r.coeffs)
            line = f"{coeffs} {r.sense} {rat_str(r.rhs)}"
            if r.group:
                line += f"  # {r.group}"
            lines.append(line)
        return "\n".join(lines) + "\n"

    def contains(self, point, method="auto"):
        """Exact membership of a main-variable point in the projection.

        With auxiliary variables present, feasibility of the lift is
        decided by exact bound propagation, falling back to a rational
        LP; ``method="lp"`` forces the LP path.
        """
        pt = _exact_point(point, self.n_main)
        if not self.projectable:
            return self._satisfies_mains(pt)
        n_main = self.n_main
        naux = len(self.projectable)
        aux_rows = []
        for (idx, coeffs, sense, rhs), row in zip(self._sparse, self.rows):
            main_part = sum(c * pt[j] for j, c in zip(idx, coeffs) if j < n_main)
            rest = rhs - main_part
            aidx = tuple(j - n_main for j in idx if j >= n_main)
            acoef = tuple(c for j, c in zip(idx, coeffs) if j >= n_main)
            if not aidx:
                if sense == "<=" and not main_part <= rhs:
                    return False
                if sense == ">=" and not main_part >= rhs:
                    return False
                if sense == "=" and main_part != rhs:
                    return False
                continue
            if sense in ("<=", "="):
                aux_rows.append((aidx, acoef, rest))
            if sense in (">=", "="):
                aux_rows.append((aidx, tuple(-c for c in acoef), -rest))
        return _aux_system_feasible(aux_rows, naux, force_lp=(method == "lp"))

    def _satisfies_mains(self, pt):
        for idx, coeffs, sense, rhs in self._sparse:
            val = sum(c * pt[j] for j, c in zip(idx, coeffs))
            if sense == "<=" and not val <= rhs:
                return False
            if sense == ">=" and not val >= rhs:
                return False
            if sense == "=" and val != rhs:
                return False
        return True

    def satisfies(self, full_point):
        """Exact check of a full point (mains and auxiliaries)."""
        pt = _exact_point(full_point, self.n_all)
        if any(v < 0 for v in pt):
            return False
        for idx, coeffs, sense, rhs in self._sparse:
            val = sum(c * pt[j] for j, c in zip(idx, coeffs))
            if sense == "<=" and not val <= rhs:
                return False
            if sense == ">=" and not val >= rhs:
                return False
            if sense == "=" and val != rhs:
                return False
        return True

    def integral_points(self):
        """All 0/1 main-variable points contained in the projection."""
        if self.n_main > 20:
            raise PolytopeError("integral enumeration supports at most 20 mains")
        out = []
        for pt in itertools.product((0, 1), repeat=self.n_main):
            if self.contains(pt):
                out.append(pt)
        return tuple(out)

    def maximize(self, objective):
        """Exact LP maximum of a linear objective over the main variables.

        The objective may also cover the auxiliaries; otherwise they get
        zero weight.  Returns the solver's result object.
        """
        c = [QQ(v) for v in objective]
        if len(c) == self.n_main:
            c = c + [ZERO] * (self.n_all - self.n_main)
        if len(c) != self.n_all:
            raise PolytopeError("objective length must match main or all variables")
        rows, senses, rhs, bounds = self._lp_parts()
        if not rows:
            return _boxed_max(c, bounds)
        return solve_lp(c, rows, senses, rhs, bounds=bounds, maximize=True)

    def _lp_parts(self):
        """LP data with single-variable rows folded into bounds."""
        cached = getattr(self, "_lp_cache", None)
        if cached is not None:
            return cached
        lo = [ZERO] * self.n_all
        hi = [None] * self.n_all
        rows, senses, rhs = [], [], []
        for (idx, coeffs, sense, b), row in zip(self._sparse, self.rows):
            if len(idx) == 1:
                j, c = idx[0], coeffs[0]
                val = QQ(b, c)
                if sense == "=" or (sense == "<=" and c > 0) or (sense == ">=" and c < 0):
                    if hi[j] is None or val < hi[j]:
                        hi[j] = val
                if sense == "=" or (sense == ">=" and c > 0) or (sense == "<=" and c < 0):
                    if val > lo[j]:
                        lo[j] = val
                continue
            if sense == ">=":
                rows.append([-c for c in row.coeffs])
                senses.append("<=")
                rhs.append(-row.rhs)
            else:
                rows.append(list(row.coeffs))
                senses.append(sense)
                rhs.append(row.rhs)
        bounds = list(zip(lo, hi))
        parts = (rows, senses, rhs, bounds)
        object.__setattr__(self, "_lp_cache", parts)
        return parts


def _exact_point(point, n):
    pt = [QQ(v) if not isinstance(v, float) else QQ(*v.as_integer_ratio())
          for v in point]
    if len(pt) != n:
        raise PolytopeError(f"expected a point of length {n}, got {len(pt)}")
    return pt


def _boxed_max(c, bounds):
    """Optimum of a bound-only LP, reported like the simplex solver."""
    from .simplex import LPResult

    x = []
    val = ZERO
    for cj, (lo, hi) in zip(c, bounds):
        if hi is not None and hi < lo:
            return LPResult("infeasible", None, None)
        if cj > 0:
            if hi is None:
                return LPResult("unbounded", None, None)
            x.append(hi)
        else:
            x.append(lo)
        val += cj * x[-1]
    return LPResult("optimal", val, x)


def _aux_system_feasible(aux_rows, naux, force_lp=False):
    """Feasibility of <=-rows over nonnegative auxiliaries, exactly."""
    if not aux_rows:
        return True
    if not force_lp:
        verdict = _propagate_bounds(aux_rows, naux)
        if verdict is not None:
            return verdict
    rows = []
    rhs = []
    for aidx, acoef, b in aux_rows:
        row = [ZERO] * naux
        for j, c in zip(aidx, acoef):
            row[j] += c
        rows.append(row)
        rhs.append(b)
    senses = ["<="] * len(rows)
    bounds = [(ZERO, None)] * naux
    return lp_feasible_point(rows, senses, rhs, bounds, naux) is not None


def _propagate_bounds(aux_rows, naux):
    """Exact interval propagation; True/False when decided, None when stuck."""
    lo = [ZERO] * naux
    hi = [None] * naux
    for _ in range(_PROPAGATION_PASSES):
        changed = False
        for aidx, acoef, b in aux_rows:
            # Minimum achievable row value given current intervals.
            finite = ZERO
            unbounded = []
            for j, c in zip(aidx, acoef):
                if c > 0:
                    finite += c * lo[j]
                elif hi[j] is None:
                    unbounded.append(j)
                else:
                    finite += c * hi[j]
            if not unbounded:
                if finite > b:
                    return False
                for j, c in zip(aidx, acoef):
                    if c > 0:
                        rest = finite - c * lo[j]
                        cap = QQ(b - rest, c)
                        if hi[j] is None or cap < hi[j]:
                            hi[j] = cap
                            changed = True
                            if lo[j] > cap:
                                return False
                    else:
                        rest = finite - c * hi[j]
                        floor = QQ(b - rest, c)
                        if floor > lo[j]:
                            lo[j] = floor
                            changed = True
                            if hi[j] is not None and hi[j] < floor:
                                return False
            elif len(unbounded) == 1:
                worst = unbounded[0]
                c = acoef[aidx.index(worst)]
                floor = QQ(b - finite, c)
                if floor > lo[worst]:
                    lo[worst] = floor
                    changed = True
        if not changed:
            break
    # A fully decided system: the lower corner must satisfy every row.
    for aidx, acoef, b in aux_rows:
        if sum(c * lo[j] for j, c in zip(aidx, acoef)) > b:
            return None
    return True


def _z_names(d):
    return tuple(f"z{i + 1}" for i in range(d))


def _row(n, entries, sense, rhs, group):
    coeffs = [ZERO] * n
    for j, c in entries:
        coeffs[j] += QQ(c)
    return PolyRow(tuple(coeffs), sense, rhs, group)


def _box_rows(n, positions, group="box"):
    rows = []
    for j in positions:
        rows.append(_row(n, [(j, 1)], ">=", 0, group))
        rows.append(_row(n, [(j, 1)], "<=", 1, group))
    return rows


def conv_z(zset):
    """Hull of the binary set itself, in the original z coordinates.

    The cube, cardinality, hierarchy, and quadratic-hierarchy families
    all have totally unimodular defining systems, so the hull is the box
    plus the defining rows.  Explicit integer systems carry no such
    guarantee and are rejected.
    """
    d = zset.d
    n = d
    names = _z_names(d)
    rows = _box_rows(n, range(n))
    if isinstance(zset, binsets.FullCube):
        pass
    elif isinstance(zset, binsets.Cardinality):
        rows.append(_row(n, [(j, 1) for j in range(n)], "<=", zset.kappa,
                         "cardinality"))
    elif isinstance(zset, binsets.WeakHierarchy):
        rows.append(_row(n, [(n - 1, 1)] + [(j, -1) for j in range(n - 1)],
                         "<=", 0, "hierarchy"))
    elif isinstance(zset, binsets.StrongHierarchy):
        for j in range(n - 1):
            rows.append(_row(n, [(n - 1, 1), (j, -1)], "<=", 0, "hierarchy"))
    elif isinstance(zset, binsets.QuadraticStrongHierarchy):
        p = zset.p
        for k in range(p):
            rows.append(_row(n, [(zset.square_index(k), 1),
                                 (zset.main_index(k), -1)], "<=", 0, "square"))
        for k in range(p):
            for ell in range(k + 1, p):
                cross = zset.cross_index(k, ell)
                rows.append(_row(n, [(cross, 1), (zset.main_index(k), -1)],
                                 "<=", 0, "cross"))
                rows.append(_row(n, [(cross, 1), (zset.main_index(ell), -1)],
                                 "<=", 0, "cross"))
    else:
        raise PolytopeError(
            f"no exact hull description for {type(zset).__name__}; "
            "its raw rows are only a relaxation")
    return LinearPolytope(names, rows)


def conv_delta1(zset, normal_form=None):
    """Hull of (w, z) with one activation binary w <= z_1 + ... + z_d.

    Closed forms cover the cube, cardinality, and hierarchy families; any
    other family needs facet data for the hull of its nonzero members.
    """
    d = zset.d
    if normal_form is not None:
        if normal_form.d != d:
            raise PolytopeError("facet data dimension must match the set")
        return delta1_from_normal_form(normal_form)
    n = 1 + d
    names = ("w",) + _z_names(d)
    zpos = range(1, n)
    rows = _box_rows(n, range(n))
    if isinstance(zset, (binsets.FullCube, binsets.Cardinality)):
        rows.append(_row(n, [(0, 1)] + [(j, -1) for j in zpos], "<=", 0, "link"))
        if isinstance(zset, binsets.Cardinality):
            rows.append(_row(n, [(j, 1) for j in zpos], "<=", zset.kappa,
                             "cardinality"))
    elif isinstance(zset, binsets.WeakHierarchy):
        rows.append(_row(n, [(0, 1)] + [(j, -1) for j in zpos[:-1]], "<=", 0,
                         "link"))
        rows.append(_row(n, [(n - 1, 1)] + [(j, -1) for j in zpos[:-1]], "<=", 0,
                         "hierarchy"))
    elif isinstance(zset, binsets.StrongHierarchy):
        rows.append(_row(n, [(0, 1)] + [(j, -1) for j in zpos[:-1]]
                         + [(n - 1, d - 2)], "<=", 0, "link"))
        for j in zpos[:-1]:
            rows.append(_row(n, [(n - 1, 1), (j, -1)], "<=", 0, "hierarchy"))
    else:
        raise PolytopeError(
            f"unsupported family {type(zset).__name__} without facet data; "
            "pass a NonzeroHullForm for the hull of its nonzero members")
    return LinearPolytope(names, rows)


def delta1_from_normal_form(form):
    """Hull of (w, z) built from facet data of the nonzero-member hull."""
    d = form.d
    n = 1 + d
    names = ("w",) + _z_names(d)
    rows = _box_rows(n, [0])
    for a in form.cone:
        rows.append(_row(n, [(j + 1, c) for j, c in enumerate(a) if c], ">=", 0,
                         "cone"))
    for f in form.plus:
        rows.append(_row(n, [(j + 1, c) for j, c in enumerate(f) if c]
                         + [(0, -1)], ">=", 0, "plus_link"))
    for g in form.minus:
        rows.append(_row(n, [(j + 1, c) for j, c in enumerate(g) if c], "<=", 1,
                         "minus_bound"))
    for g in form.minus:
        for f in form.plus:
            entries = [(j + 1, gc - fc) for j, (gc, fc) in enumerate(zip(g, f))
                       if gc != fc]
            if entries:
                rows.append(_row(n, entries, "<=", 0, "minus_plus"))
    return LinearPolytope(names, rows)


def conv_delta_p(zset, partition, block_forms=None):
    """Hull of (w, z) with one activation binary per indicator-graph block.

    The partition must equal the graph's connected components (caller
    order is kept for the w indexing).  Facet data for each block's
    nonzero section is derived from the closed-form families or supplied
    via ``block_forms``.
    """
    blocks = binsets.validate_partition(zset, partition)
    d = zset.d
    p = len(blocks)
    forms = _block_forms(zset, blocks, block_forms)
    if p == 1:
        base = conv_delta1(zset, normal_form=block_forms[0] if block_forms else None)
        names = ("w1",) + base.names[1:]
        rows = list(base.rows)
        rows.append(_row(1 + d, [(0, 1)], "<=", 1, "budget"))
        return LinearPolytope(names, rows)
    n = p + d
    names = tuple(f"w{i + 1}" for i in range(p)) + _z_names(d)
    lam = tuple(f"lam{i + 1}" for i in range(p))
    total = n + p
    rows = _box_rows(total, range(p))
    rows.append(_row(total, [(i, 1) for i in range(p)], "<=", 1, "budget"))
    for i, (block, form) in enumerate(zip(blocks, forms)):
        zpos = [p + j for j in block]
        for a in form.cone:
            rows.append(_row(total, [(zpos[k], c) for k, c in enumerate(a) if c],
                             ">=", 0, "cone"))
        for f in form.plus:
            rows.append(_row(total, [(zpos[k], c) for k, c in enumerate(f) if c]
                             + [(i, -1)], ">=", 0, "plus_link"))
        for g in form.minus:
            rows.append(_row(total, [(zpos[k], c) for k, c in enumerate(g) if c],
                             "<=", 1, "minus_bound"))
        for g in form.minus:
            for f in form.plus:
                entries = [(zpos[k], gc - fc)
                           for k, (gc, fc) in enumerate(zip(g, f)) if gc != fc]
                if entries:
                    rows.append(_row(total, entries, "<=", 0, "minus_plus"))
        # Exact lift: lam_i is block i's share of the activation budget.
        li = n + i
        rows.append(_row(total, [(li, 1)], ">=", 0, "lift"))
        rows.append(_row(total, [(i, 1), (li, -1)], "<=", 0, "lift"))
        for f in form.plus:
            rows.append(_row(total, [(zpos[k], c) for k, c in enumerate(f) if c]
                             + [(li, -1)], ">=", 0, "lift"))
        for g in form.minus:
            rows.append(_row(total, [(zpos[k], c) for k, c in enumerate(g) if c]
                             + [(li, -1)], "<=", 0, "lift"))
    rows.append(_row(total, [(n + i, 1) for i in range(p)], "<=", 1, "lift"))
    return LinearPolytope(names + lam, rows, projectable=lam)


def _block_forms(zset, blocks, block_forms):
    if block_forms is not None:
        if len(block_forms) != len(blocks):
            raise PolytopeError("need one facet-data record per block")
        for form, block in zip(block_forms, blocks):
            if form.d != len(block):
                raise PolytopeError("facet data dimension must match its block")
        return tuple(block_forms)
    forms = []
    for block in blocks:
        try:
            forms.append(binsets.nonzero_hull_normal_form(zset) if len(block) == zset.d
                         else binsets.detect_section_form(
                             binsets.block_section(zset, block), len(block)))
        except binsets.BinarySetError as exc:
            raise PolytopeError(str(exc)) from exc
    return tuple(forms)


def conv_omega(zset, omega_form=None, z_pieces=None):
    """Hull of (w, z) with at most one activation marker w <= z.

    Closed forms cover the cube, cardinality, and weak-hierarchy families;
    the strong hierarchy gets its lifted description.  Other families need
    caller data: ``omega_form`` (facet data of the nonzero-member hull over
    the joint (w, z) space) or ``z_pieces`` (hull rows of the member set and
    of each "coordinate i active" slice).
    """
    d = zset.d
    if omega_form is not None:
        if omega_form.d != 2 * d:
            raise PolytopeError("joint facet data must cover (w, z)")
        return omega_from_normal_form(omega_form)
    if z_pieces is not None:
        return omega_from_pieces(d, *z_pieces)
    n = 2 * d
    names = tuple(f"w{i + 1}" for i in range(d)) + _z_names(d)
    if isinstance(zset, (binsets.FullCube, binsets.Cardinality)) or (
            isinstance(zset, binsets.StrongHierarchy) and d == 1):
        rows = _box_rows(n, range(n))
        rows.append(_row(n, [(i, 1) for i in range(d)], "<=", 1, "budget"))
        for i in range(d):
            rows.append(_row(n, [(i, 1), (d + i, -1)], "<=", 0, "link"))
        if isinstance(zset, binsets.Cardinality):
            rows.append(_row(n, [(d + i, 1) for i in range(d)], "<=", zset.kappa,
                             "cardinality"))
        return LinearPolytope(names, rows)
    if isinstance(zset, binsets.WeakHierarchy):
        rows = _box_rows(n, range(n))
        rows.append(_row(n, [(i, 1) for i in range(d)], "<=", 1, "budget"))
        for i in range(d):
            rows.append(_row(n, [(i, 1), (d + i, -1)], "<=", 0, "link"))
        rows.append(_row(n, [(n - 1, 1)] + [(d + j, -1) for j in range(d - 1)],
                         "<=", 0, "hierarchy"))
        rows.append(_row(n, [(i, 1) for i in range(d)]
                         + [(d + j, -1) for j in range(d - 1)], "<=", 0,
                         "budget_link"))
        return LinearPolytope(names, rows)
    if isinstance(zset, binsets.StrongHierarchy):
        return _omega_strong_hierarchy(d)
    raise PolytopeError(
        f"unsupported family {type(zset).__name__} without caller data; pass "
        "omega_form or z_pieces")


def _omega_strong_hierarchy(d):
    """Lifted hull for the strong hierarchy: one part per activation case.

    Auxiliary block 0 carries the no-activation part; block i carries the
    part with marker i active.  The member vector z is the sum of all
    parts.
    """
    names = tuple(f"w{i + 1}" for i in range(d)) + _z_names(d)
    aux = tuple(f"zt{i}_{j + 1}" for i in range(d + 1) for j in range(d))
    n = 2 * d + (d + 1) * d
    w = list(range(d))
    z = list(range(d, 2 * d))

    def zt(i, j):
        return 2 * d + i * d + j

    rows = []
    for i in w:
        rows.append(_row(n, [(i, 1)], ">=", 0, "box"))
    rows.append(_row(n, [(i, 1) for i in w], "<=", 1, "budget"))
    for j in range(d):
        rows.append(_row(n, [(z[j], 1)] + [(zt(i, j), -1) for i in range(d + 1)],
                         "=", 0, "decomp"))
    rows.append(_row(n, [(zt(0, d - 1), 1)], ">=", 0, "tilde0_order"))
    for j in range(d - 1):
        rows.append(_row(n, [(zt(0, d - 1), 1), (zt(0, j), -1)], "<=", 0,
                         "tilde0_order"))
        rows.append(_row(n, [(zt(0, j), 1)] + [(i, 1) for i in w], "<=", 1,
                         "tilde0_cap"))
    for i in range(d - 1):
        rows.append(_row(n, [(zt(i + 1, i), 1), (i, -1)], "=", 0, "tilde_diag"))
        rows.append(_row(n, [(zt(i + 1, d - 1), 1)], ">=", 0, "tilde_order"))
        for j in range(d - 1):
            rows.append(_row(n, [(zt(i + 1, d - 1), 1), (zt(i + 1, j), -1)],
                             "<=", 0, "tilde_order"))
            rows.append(_row(n, [(zt(i + 1, j), 1), (i, -1)], "<=", 0,
                             "tilde_cap"))
    for j in range(d):
        rows.append(_row(n, [(zt(d, j), 1), (d - 1, -1)], "=", 0, "tilde_last"))
    return LinearPolytope(names + aux, rows, projectable=aux)


def omega_from_normal_form(form):
    """Hull of (w, z) from facet data of its nonzero members' hull."""
    d2 = form.d
    if d2 % 2:
        raise PolytopeError("joint facet data must have even dimension")
    d = d2 // 2
    names = tuple(f"w{i + 1}" for i in range(d)) + _z_names(d)
    rows = []
    for a in form.cone:
        rows.append(_row(d2, [(j, c) for j, c in enumerate(a) if c], ">=", 0,
                         "cone"))
    for f in form.plus:
        rows.append(_row(d2, [(j, c) for j, c in enumerate(f) if c], ">=", 0,
                         "plus_nonneg"))
    for g in form.minus:
        rows.append(_row(d2, [(j, c) for j, c in enumerate(g) if c], "<=", 1,
                         "minus_bound"))
    for g in form.minus:
        for f in form.plus:
            entries = [(j, gc - fc) for j, (gc, fc) in enumerate(zip(g, f))
                       if gc != fc]
            if entries:
                rows.append(_row(d2, entries, "<=", 0, "minus_plus"))
    return LinearPolytope(names, rows)


def omega_from_pieces(d, member_hull_rows, slice_hull_rows):
    """Hull of (w, z) assembled from hull rows of the member set and slices.

    ``member_hull_rows`` describes the hull of the member set; entry i of
    ``slice_hull_rows`` describes the hull of the members with z_i = 1.
    Rows are (coefficients over z, sense, rhs) triples.  Each part of the
    decomposition gets the corresponding rows rescaled by its weight.
    """
    if len(slice_hull_rows) != d:
        raise PolytopeError("need one slice description per coordinate")
    names = tuple(f"w{i + 1}" for i in range(d)) + _z_names(d)
    aux = tuple(f"zt{i}_{j + 1}" for i in range(d + 1) for j in range(d))
    n = 2 * d + (d + 1) * d
    w = list(range(d))
    z = list(range(d, 2 * d))

    def zt(i, j):
        return 2 * d + i * d + j

    rows = []
    for i in w:
        rows.append(_row(n, [(i, 1)], ">=", 0, "box"))
    rows.append(_row(n, [(i, 1) for i in w], "<=", 1, "budget"))
    for j in range(d):
        rows.append(_row(n, [(z[j], 1)] + [(zt(i, j), -1) for i in range(d + 1)],
                         "=", 0, "decomp"))
    for coeffs, sense, rhs in member_hull_rows:
        b = QQ(rhs)
        entries = [(zt(0, j), c) for j, c in enumerate(coeffs) if c]
        entries += [(i, b) for i in w if b]
        rows.append(_row(n, entries, sense, b, "piece0"))
    for i, piece in enumerate(slice_hull_rows):
        for coeffs, sense, rhs in piece:
            b = QQ(rhs)
            entries = [(zt(i + 1, j), c) for j, c in enumerate(coeffs) if c]
            if b:
                entries.append((i, -b))
            rows.append(_row(n, entries, sense, 0, "piece"))
    return LinearPolytope(names + aux, rows, projectable=aux)


def valid_cuts_logreg(zset, pattern, target):
    """Linking cuts between sample activations and quadratic indicators.

    ``pattern`` holds one 0/1 row per sample marking which of the p raw
    features are present.  ``target`` selects the cut family: "delta_v"
    bounds one activation w_j per sample, "omega_v" bounds per-coordinate
    activations w_{j,i}.  Samples with no active feature get no rows.
    """
    if not isinstance(zset, binsets.QuadraticStrongHierarchy):
        raise PolytopeError("cuts are defined for the quadratic hierarchy set")
    if target not in ("delta_v", "omega_v"):
        raise PolytopeError('target must be "delta_v" or "omega_v"')
    p = zset.p
    d = zset.d
    actives = []
    for j, row in enumerate(pattern):
        vals = list(row)
        if len(vals) != p:
            raise PolytopeError(
                f"pattern row {j} has length {len(vals)}, expected p={p}")
        if any(v not in (0, 1) for v in vals):
            raise PolytopeError("pattern entries must be 0 or 1")
        actives.append([k for k, v in enumerate(vals) if v])
    nsamp = len(actives)
    if target == "delta_v":
        names = tuple(f"w{j + 1}" for j in range(nsamp)) + _z_names(d)
        n = nsamp + d
        rows = []
        for j, act in enumerate(actives):
            if len(act) >= 2:
                entries = {j: ONE}
                for k, l in itertools.combinations(act, 2):
                    for pos in (zset.main_index(k), zset.main_index(l)):
                        entries[nsamp + pos] = entries.get(nsamp + pos, ZERO) - 1
                    cross = nsamp + zset.cross_index(k, l)
                    entries[cross] = entries.get(cross, ZERO) + 1
                rows.append(_row(n, list(entries.items()), "<=", 0, "pair"))
            if act:
                rows.append(_row(n, [(j, 1)] + [(nsamp + zset.main_index(k), -1)
                                                for k in act], "<=", 0, "main"))
        return LinearPolytope(names, rows)
    names = tuple(f"w{j + 1}_{i + 1}" for j in range(nsamp) for i in range(d))
    names += _z_names(d)
    n = nsamp * d + d
    zoff = nsamp * d

    def wvar(j, i):
        return j * d + i

    rows = []
    for j, act in enumerate(actives):
        for k, l in itertools.combinations(act, 2):
            rows.append(_row(n, [
                (wvar(j, zset.main_index(k)), 1),
                (wvar(j, zset.main_index(l)), 1),
                (wvar(j, zset.cross_index(k, l)), 1),
                (zoff + zset.main_index(k), -1),
                (zoff + zset.main_index(l), -1),
                (zoff + zset.cross_index(k, l), 1),
            ], "<=", 0, "pair"))
        for k in act:
            rows.append(_row(n, [
                (wvar(j, zset.main_index(k)), 1),
                (wvar(j, zset.square_index(k)), 1),
                (zoff + zset.main_index(k), -1),
            ], "<=", 0, "square"))
    return LinearPolytope(names, rows)


def integer_matrix(poly, exclude_groups=("box",)):
    """Integer coefficient rows of a polytope, minus the named groups."""
    out = []
    for row in poly.rows:
        if row.group in exclude_groups:
            continue
        vals = []
        for c in row.coeffs:
            if c.denominator != 1:
                raise PolytopeError("matrix has a non-integer coefficient")
            vals.append(int(c))
        out.append(tuple(vals))
    return tuple(out)


def is_totally_unimodular(matrix, max_checks=2_000_000):
    """Brute-force check: every square submatrix determinant is -1, 0 or 1."""
    rows = [tuple(int(v) for v in r) for r in matrix]
    if not rows:
        return True
    m, ncols = len(rows), len(rows[0])
    total = 0
    for k in range(1, min(m, ncols) + 1):
        for ri in itertools.combinations(range(m), k):
            for ci in itertools.combinations(range(ncols), k):
                total += 1
                if total > max_checks:
                    raise PolytopeError("too many submatrices; raise max_checks")
                sub = [[rows[r][c] for c in ci] for r in ri]
                if _det_int(sub) not in (-1, 0, 1):
                    return False
    return True


def _det_int(mat):
    """Exact integer determinant via fraction-free elimination."""
    n = len(mat)
    m = [list(row) for row in mat]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for r in range(k + 1, n):
                if m[r][k] != 0:
                    m[k], m[r] = m[r], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[-1][-1]

"""Conic formulations whose relaxations recover sparse-regression hulls.

Each builder turns a problem instance into an immutable conic program
over (tau, x, z, ...) where tau is the epigraph value of the nonlinear
part, x the continuous decision, and z the 0/1 support pattern.  The
epigraph is always expanded through per-term variables t with a linking
row sum(t) = tau.  Binary mode keeps z (and the activation markers w)
binary; calling .relax() on the result yields the continuous relaxation,
which is exact whenever the spliced hull rows are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import binsets
from .atoms import eval_perspective_closure
from .binsets import BinarySetError, Cardinality
from .polytopes import PolytopeError, conv_delta1, conv_delta_p, conv_omega, conv_z
from .programs import LinExpr, PerspEpi, ProgramBuilder
from .rationals import as_float


class FormulationError(ValueError):
    """An instance does not meet a builder's requirements."""


@dataclass(frozen=True)
class ProblemInstance:
    """Data of one sparse estimation problem.

    atoms holds the convex pieces: one per coordinate for separable
    losses, or a single shared atom for rank-one builders.  rows and
    labels carry the data matrix a_j and targets b_j of sample-sum
    losses; sign_constrained lists the coordinates with x_i >= 0.
    """

    atoms: tuple
    zset: object
    rows: tuple = ()
    labels: tuple = ()
    sign_constrained: tuple = ()
    lam: float = 0.0
    mu: float = 0.0

    def __post_init__(self):
        if not self.atoms:
            raise FormulationError("need at least one atom")
        object.__setattr__(self, "atoms", tuple(self.atoms))
        d = self.zset.d
        rows = tuple(tuple(float(c) for c in row) for row in self.rows)
        for row in rows:
            if len(row) != d:
                raise FormulationError(f"every data row must have length {d}")
        object.__setattr__(self, "rows", rows)
        labels = tuple(float(b) for b in self.labels)
        if labels and len(labels) != len(rows):
            raise FormulationError("need one label per data row")
        if any(b not in (-1.0, 1.0) for b in labels):
            raise FormulationError("labels must be -1 or +1")
        object.__setattr__(self, "labels", labels)
        sign = tuple(sorted(set(int(i) for i in self.sign_constrained)))
        if sign and not (0 <= sign[0] and sign[-1] < d):
            raise FormulationError(f"sign indices must lie in 0..{d - 1}")
        object.__setattr__(self, "sign_constrained", sign)
        if self.lam < 0 or self.mu < 0:
            raise FormulationError("regularization weights must be nonnegative")

    @property
    def d(self):
        return self.zset.d


def splice_polytope(builder, poly, main_indices, aux_group="hull_aux"):
    """Append a polytope's rows, mapping its main columns onto program
    variables and creating fresh continuous variables for aux columns."""
    if len(main_indices) != poly.n_main:
        raise FormulationError(
            f"polytope has {poly.n_main} main columns, got {len(main_indices)}")
    colmap = list(main_indices)
    for name in poly.names[poly.n_main:]:
        colmap.append(builder.add_variable(name, group=aux_group))
    for row in poly.rows:
        terms = [(colmap[j], as_float(c)) for j, c in enumerate(row.coeffs) if c]
        builder.add_row(terms, row.sense, as_float(row.rhs))


def append_z_rows(builder, zset, z_idx):
    """Hull rows of the support set when available, raw rows otherwise."""
    try:
        splice_polytope(builder, conv_z(zset), z_idx)
    except PolytopeError:
        for row, rhs in zip(zset.F, zset.f):
            terms = [(z_idx[j], float(c)) for j, c in enumerate(row) if c]
            builder.add_row(terms, "<=", float(rhs))


def _single_atom(instance, builder_name):
    if len(instance.atoms) != 1:
        raise FormulationError(
            f"{builder_name} uses one shared atom, got {len(instance.atoms)}")
    return instance.atoms[0]


def _single_row(instance, builder_name):
    if len(instance.rows) != 1:
        raise FormulationError(
            f"{builder_name} needs exactly one weight row, got "
            f"{len(instance.rows)}")
    return instance.rows[0]


def _require_dense(a, builder_name):
    if any(c == 0 for c in a):
        raise FormulationError(
            f"{builder_name} needs nonzero weights everywhere; eliminate "
            "coordinates with zero weight first")


def _require_free_x(instance, builder_name):
    if instance.sign_constrained:
        raise FormulationError(
            f"{builder_name} needs unconstrained x; sign constraints are "
            "handled by build_rank1_plus")


def _core_variables(builder, instance, with_x_signs=True):
    d = instance.d
    sign = set(instance.sign_constrained) if with_x_signs else set()
    tau = builder.add_variable("tau", group="tau")
    x = [builder.add_variable(f"x{i + 1}",
                              lb=0.0 if i in sign else None, group="x")
         for i in range(d)]
    z = [builder.add_variable(f"z{i + 1}", kind="binary", group="z")
         for i in range(d)]
    return tau, x, z


def build_separable_hull(instance):
    """Per-coordinate perspective program: sum_i h_i^pi(x_i, z_i) <= tau.

    The relaxation is the exact convexification whenever the spliced
    support-set rows describe conv(Z) exactly.
    """
    d = instance.d
    if len(instance.atoms) != d:
        raise FormulationError(
            f"need one atom per coordinate ({d}), got {len(instance.atoms)}")
    b = ProgramBuilder()
    tau, x, z = _core_variables(b, instance)
    t = [b.add_variable(f"t{i + 1}", group="t") for i in range(d)]
    b.add_row([(ti, 1.0) for ti in t] + [(tau, -1.0)], "=", 0.0)
    append_z_rows(b, instance.zset, z)
    for i in range(d):
        b.add_cone(PerspEpi(instance.atoms[i], LinExpr.var(t[i]),
                            LinExpr.var(x[i]), LinExpr.var(z[i])))
    return b.build()


def build_rank1_hull(instance):
    """Single-marker perspective program: h^pi(a.x, w) <= tau, w <= 1.z.

    Requires a connected activation structure so one marker w covers the
    whole support; the relaxation is exact with exact hull rows.
    """
    h = _single_atom(instance, "build_rank1_hull")
    a = _single_row(instance, "build_rank1_hull")
    _require_dense(a, "build_rank1_hull")
    _require_free_x(instance, "build_rank1_hull")
    if not instance.zset.is_connected():
        raise FormulationError(
            "the activation structure splits into independent blocks; "
            "use build_rank1_general with one marker per block")
    b = ProgramBuilder()
    tau, x, z = _core_variables(b, instance)
    w = b.add_variable("w1", kind="binary", group="w")
    s = b.add_variable("s1", group="s")
    t = b.add_variable("t1", group="t")
    b.add_row([(t, 1.0), (tau, -1.0)], "=", 0.0)
    b.add_row([(s, 1.0)] + [(x[i], -a[i]) for i in range(instance.d)], "=", 0.0)
    try:
        poly = conv_delta1(instance.zset)
        splice_polytope(b, poly, [w] + z)
    except PolytopeError:
        b.add_row([(w, 1.0)] + [(zi, -1.0) for zi in z], "<=", 0.0)
        append_z_rows(b, instance.zset, z)
    b.add_cone(PerspEpi(h, LinExpr.var(t), LinExpr.var(s), LinExpr.var(w)))
    return b.build()


def build_rank1_general(instance, partition):
    """Block-wise markers: sum_i h^pi(a_i . x_i, w_i) <= tau, one marker
    per block of the partition, with at most one marker active."""
    h = _single_atom(instance, "build_rank1_general")
    a = _single_row(instance, "build_rank1_general")
    _require_dense(a, "build_rank1_general")
    _require_free_x(instance, "build_rank1_general")
    try:
        blocks = binsets.validate_partition(instance.zset, partition)
    except BinarySetError as exc:
        raise FormulationError(str(exc)) from exc
    p = len(blocks)
    b = ProgramBuilder()
    tau, x, z = _core_variables(b, instance)
    w = [b.add_variable(f"w{i + 1}", kind="binary", group="w")
         for i in range(p)]
    s = [b.add_variable(f"s{i + 1}", group="s") for i in range(p)]
    t = [b.add_variable(f"t{i + 1}", group="t") for i in range(p)]
    b.add_row([(ti, 1.0) for ti in t] + [(tau, -1.0)], "=", 0.0)
    for i, block in enumerate(blocks):
        b.add_row([(s[i], 1.0)] + [(x[j], -a[j]) for j in block], "=", 0.0)
    try:
        poly = conv_delta_p(instance.zset, blocks)
        splice_polytope(b, poly, w + z)
    except PolytopeError:
        b.add_row([(wi, 1.0) for wi in w], "<=", 1.0)
        for i, block in enumerate(blocks):
            b.add_row([(w[i], 1.0)] + [(z[j], -1.0) for j in block], "<=", 0.0)
        append_z_rows(b, instance.zset, z)
    for i in range(p):
        b.add_cone(PerspEpi(h, LinExpr.var(t[i]), LinExpr.var(s[i]),
                            LinExpr.var(w[i])))
    return b.build()


def build_rank1_plus(instance):
    """Split form with per-coordinate markers and shares.

    Decomposes a.x into shares s_i with their own markers w_i, at most
    one active, linked back through a.s = a.x; sign-constrained
    coordinates additionally get 0 <= s_i <= x_i.  Needs every pair of
    coordinates jointly activatable and a genuinely nonlinear atom.
    """
    h = _single_atom(instance, "build_rank1_plus")
    a = _single_row(instance, "build_rank1_plus")
    _require_dense(a, "build_rank1_plus")
    if h.is_linear():
        raise FormulationError(
            "the split form needs a nonlinear atom; a linear atom makes "
            "the split markers vacuous")
    zset = instance.zset
    if isinstance(zset, Cardinality) and zset.kappa == 1:
        raise FormulationError(
            "with at most one active coordinate the sum splits exactly; "
            "use build_separable_hull on the per-coordinate pieces")
    if not zset.has_pairwise_activation():
        raise FormulationError(
            "every pair of coordinates must be jointly activatable")
    d = instance.d
    sign = set(instance.sign_constrained)
    b = ProgramBuilder()
    tau, x, z = _core_variables(b, instance)
    s = [b.add_variable(f"s{i + 1}", lb=0.0 if i in sign else None, group="s")
         for i in range(d)]
    w = [b.add_variable(f"w{i + 1}", kind="binary", group="w")
         for i in range(d)]
    t = [b.add_variable(f"t{i + 1}", group="t") for i in range(d)]
    b.add_row([(ti, 1.0) for ti in t] + [(tau, -1.0)], "=", 0.0)
    b.add_row([(s[i], a[i]) for i in range(d)]
              + [(x[i], -a[i]) for i in range(d)], "=", 0.0)
    for i in sorted(sign):
        b.add_row([(s[i], 1.0), (x[i], -1.0)], "<=", 0.0)
    try:
        poly = conv_omega(zset)
        splice_polytope(b, poly, w + z)
    except PolytopeError:
        b.add_row([(wi, 1.0) for wi in w], "<=", 1.0)
        for i in range(d):
            b.add_row([(w[i], 1.0), (z[i], -1.0)], "<=", 0.0)
        append_z_rows(b, zset, z)
    for i in range(d):
        b.add_cone(PerspEpi(h, LinExpr.var(t[i]),
                            LinExpr.var(s[i], a[i]), LinExpr.var(w[i])))
    return b.build()


def _base_point(program, x, z):
    point = [0.0] * program.nvars
    for idx, v in zip(program.group("x"), x):
        point[idx] = float(v)
    for idx, v in zip(program.group("z"), z):
        point[idx] = float(v)
    return point


def _fill(point, indices, values):
    for idx, v in zip(indices, values):
        point[idx] = float(v)


def separable_witness(program, instance, x, z):
    """Feasible full point for a set member: t_i carries each perspective
    value.  Needs supp(x) inside supp(z), x within its sign bounds."""
    t = [eval_perspective_closure(atom, xi, zi)
         for atom, xi, zi in zip(instance.atoms, x, z)]
    if any(math.isinf(v) for v in t):
        raise FormulationError("x is active where z is not; no finite witness")
    point = _base_point(program, x, z)
    _fill(point, program.group("t"), t)
    point[program.group("tau")[0]] = sum(t)
    return point


def rank1_witness(program, instance, x, z):
    """Feasible full point: s = a.x, the marker follows the support."""
    a = instance.rows[0]
    s = sum(ai * xi for ai, xi in zip(a, x))
    w = 1.0 if any(z) else 0.0
    t = eval_perspective_closure(instance.atoms[0], s, w)
    if math.isinf(t):
        raise FormulationError("a.x is nonzero on an empty support")
    point = _base_point(program, x, z)
    _fill(point, program.group("s"), [s])
    _fill(point, program.group("w"), [w])
    _fill(point, program.group("t"), [t])
    point[program.group("tau")[0]] = t
    return point


def rank1_general_witness(program, instance, partition, x, z):
    """Feasible full point: per-block s_i = a_i . x_i, markers and the
    lifted budget shares follow the block activations."""
    a = instance.rows[0]
    blocks = binsets.validate_partition(instance.zset, partition)
    s = [sum(a[j] * x[j] for j in block) for block in blocks]
    w = [1.0 if any(z[j] for j in block) else 0.0 for block in blocks]
    t = [eval_perspective_closure(instance.atoms[0], si, wi)
         for si, wi in zip(s, w)]
    if any(math.isinf(v) for v in t):
        raise FormulationError("a block mixes activity into an empty support")
    point = _base_point(program, x, z)
    _fill(point, program.group("s"), s)
    _fill(point, program.group("w"), w)
    _fill(point, program.group("t"), t)
    point[program.group("tau")[0]] = sum(t)
    if program.has_group("hull_aux"):
        _fill(point, program.group("hull_aux"), w)
    return point


def rank1_plus_witness(program, instance, x, z):
    """Feasible full point via sign-matched shares.

    Coordinates whose term a_i x_i matches the sign of a.x keep a scaled
    share s_i; the markers split proportionally so every perspective term
    evaluates to its share of h(a.x)."""
    a = instance.rows[0]
    h = instance.atoms[0]
    d = instance.d
    sigma = sum(ai * xi for ai, xi in zip(a, x))
    if sigma == 0.0:
        s = [0.0] * d
        w = [0.0] * d
        t = [0.0] * d
    else:
        keep = [i for i in range(d) if a[i] * x[i] * sigma > 0]
        sigma_kept = sum(a[i] * x[i] for i in keep)
        theta = sigma / sigma_kept
        s = [theta * x[i] if i in keep else 0.0 for i in range(d)]
        w = [a[i] * s[i] / sigma for i in range(d)]
        t = [wi * h.value(sigma) for wi in w]
    point = _base_point(program, x, z)
    _fill(point, program.group("s"), s)
    _fill(point, program.group("w"), w)
    _fill(point, program.group("t"), t)
    point[program.group("tau")[0]] = sum(t)
    if program.has_group("hull_aux"):
        sumw = sum(w)
        aux = [(1.0 - sumw) * zj for zj in z]
        for wi in w:
            aux.extend(wi * zj for zj in z)
        _fill(point, program.group("hull_aux"), aux)
    return point

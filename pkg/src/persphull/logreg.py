"""Sparse logistic regression over quadratically lifted features.

The feature map sends p raw measurements to d = p(p+3)/2 monomials
(mains, squares, pairwise products); the support set is the quadratic
strong hierarchy, so a product monomial may only enter when its factors
do.  Four conic programs encode the regularized log-loss problem

    (1/N) sum_j log(1 + exp(-b_j a_j.x)) + lam * 1.z + mu * |x|^2

at increasing relaxation strength: a plain form whose perspective
strengthening only touches the ridge term, a one-marker-per-sample
form, a one-marker-per-coordinate form, and an expression-marker form
that folds the linking cuts into equality-defined marker levels.

Every program minimizes (1/N) sum t + log(2) + lam * 1.z + mu * 1.r
with the exponential-cone pairs carrying the loss shifted by log(2).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import expit

from .atoms import ShiftedLogistic, eval_perspective_closure
from .binsets import QuadraticStrongHierarchy
from .formulations import FormulationError, ProblemInstance, splice_polytope
from .polytopes import conv_z, valid_cuts_logreg
from .programs import Exp3, LinExpr, ProgramBuilder, RotatedSOC3

VARIANTS = ("separable", "rank1", "rank1_plus", "rank1_w")
SLACK_MODES = ("verbatim", "tightened")
LOG2 = math.log(2.0)


def lift_dimension(p):
    """Lifted feature count: p mains, p squares, p(p-1)/2 products."""
    return p * (p + 3) // 2


def lift_features(phi):
    """Map raw features to the monomial vector matching the hierarchy
    set's index layout: mains, then squares, then products (k < l)."""
    phi = [float(v) for v in phi]
    p = len(phi)
    if p < 1:
        raise FormulationError("need at least one raw feature")
    zset = QuadraticStrongHierarchy(p)
    out = [0.0] * zset.d
    for k in range(p):
        out[zset.main_index(k)] = phi[k]
        out[zset.square_index(k)] = phi[k] * phi[k]
        for l in range(k + 1, p):
            out[zset.cross_index(k, l)] = phi[k] * phi[l]
    return tuple(out)


def generate_instance(p, n_samples, density, lam, mu, seed):
    """Draw a random sparse-logistic instance, reproducibly.

    Raw features are standard normal, kept with probability ``density``
    and zeroed otherwise; the ground-truth weight vector is uniform on
    [-1, 1]^d over the lifted space; labels are +-1 with the logistic
    conditional probability.  A fixed seed fixes every draw.
    """
    if p < 1 or n_samples < 1:
        raise FormulationError("need p >= 1 raw features and one sample")
    if not 0.0 <= density <= 1.0:
        raise FormulationError("density must lie in [0, 1]")
    rng = np.random.Generator(np.random.PCG64(seed))
    normals = rng.standard_normal((n_samples, p))
    mask = rng.random((n_samples, p)) < density
    phi = normals * mask
    d = lift_dimension(p)
    x_true = rng.uniform(-1.0, 1.0, d)
    rows = tuple(lift_features(phi[j]) for j in range(n_samples))
    margins = np.array([float(np.dot(row, x_true)) for row in rows])
    draws = rng.random(n_samples)
    labels = tuple(1.0 if u < expit(m) else -1.0
                   for u, m in zip(draws, margins))
    return ProblemInstance(
        atoms=(ShiftedLogistic(),),
        zset=QuadraticStrongHierarchy(p),
        rows=rows,
        labels=labels,
        sign_constrained=tuple(range(d)),
        lam=float(lam),
        mu=float(mu),
    )


def _check_logistic(instance, op):
    if not isinstance(instance.zset, QuadraticStrongHierarchy):
        raise FormulationError(
            f"{op} expects the quadratic hierarchy support set, got "
            f"{type(instance.zset).__name__}")
    if len(instance.atoms) != 1 or not isinstance(instance.atoms[0],
                                                  ShiftedLogistic):
        raise FormulationError(
            f"{op} encodes the shifted logistic loss; pass that atom")
    if not instance.rows or len(instance.labels) != len(instance.rows):
        raise FormulationError(f"{op} needs labeled samples")


def _raw_active(instance, j):
    """Raw features present in sample j, read off the main monomials."""
    zset = instance.zset
    row = instance.rows[j]
    return tuple(k for k in range(zset.p) if row[zset.main_index(k)] != 0.0)


def _lifted_support(row):
    return tuple(i for i, c in enumerate(row) if c != 0.0)


def _common_variables(builder, instance):
    d = instance.d
    sign = set(instance.sign_constrained)
    x = [builder.add_variable(f"x{i + 1}",
                              lb=0.0 if i in sign else None, group="x")
         for i in range(d)]
    z = [builder.add_variable(f"z{i + 1}", kind="binary", group="z")
         for i in range(d)]
    r = [builder.add_variable(f"r{i + 1}", lb=0.0, group="r")
         for i in range(d)]
    return x, z, r

def _margin_expr(instance, x, j, t_idx):
    """-b_j a_j.x - t as the third exponential-cone argument."""
    b = instance.labels[j]
    terms = [(xi, -b * aji) for xi, aji in zip(x, instance.rows[j]) if aji]
    terms.append((t_idx, -1.0))
    return LinExpr(tuple(terms))


def _loss_pair(builder, u, v, w_expr, margin_expr, t_idx, exp_slack):
    builder.add_cone(Exp3(LinExpr.var(v), w_expr, LinExpr.var(t_idx, -1.0)))
    builder.add_cone(Exp3(LinExpr.var(u), w_expr, margin_expr))
    if exp_slack == "tightened":
        terms = [(u, 1.0), (v, 1.0)]
        terms += [(i, -2.0 * c) for i, c in w_expr.terms]
        builder.add_row(terms, "<=", 2.0 * w_expr.const)
    else:
        builder.add_row([(u, 1.0), (v, 1.0)], "<=", 2.0)


def _objective(instance, t_indices, z, r):
    n = len(instance.rows)
    terms = [(ti, 1.0 / n) for ti in t_indices]
    terms += [(zi, instance.lam) for zi in z]
    terms += [(ri, instance.mu) for ri in r]
    return LinExpr(tuple(terms), LOG2)


def build_logreg(instance, which, cuts=False, exp_slack="verbatim"):
    """One of the four log-loss displays as an immutable program.

    ``cuts`` appends the sample-to-indicator linking rows (marker
    variants only).  ``exp_slack`` picks the slack cap on each
    exponential-cone pair: "verbatim" keeps u + v <= 2, "tightened"
    scales the cap with the marker level, which keeps the perspective
    exact at fractional markers.
    """
    _check_logistic(instance, "build_logreg")
    if which not in VARIANTS:
        raise FormulationError(f"unknown variant {which!r}; pick from "
                               f"{VARIANTS}")
    if exp_slack not in SLACK_MODES:
        raise FormulationError(f"exp_slack must be one of {SLACK_MODES}")
    if which == "rank1_w" and exp_slack != "tightened":
        raise FormulationError(
            "the expression-marker form needs the tightened slack cap: its "
            "marker levels exceed one, where u + v <= 2 cuts off valid "
            "loss values")
    if cuts and which in ("separable", "rank1_w"):
        raise FormulationError(
            "linking cuts attach to free marker variables; this variant "
            "has none")
    n = len(instance.rows)
    d = instance.d
    b = ProgramBuilder()
    x, z, r = _common_variables(b, instance)
    splice_polytope(b, conv_z(instance.zset), z)
    for i in range(d):
        b.add_cone(RotatedSOC3(LinExpr.var(r[i]), LinExpr.var(z[i]),
                               LinExpr.var(x[i])))
    if which == "separable":
        t = _separable_losses(b, instance, x, exp_slack)
    elif which == "rank1":
        t = _rank1_losses(b, instance, x, z, cuts, exp_slack)
    elif which == "rank1_plus":
        t = _rank1_plus_losses(b, instance, x, z, cuts, exp_slack)
    else:
        t = _rank1_w_losses(b, instance, x, z, exp_slack)
    return b.build(_objective(instance, t, z, r))


def _separable_losses(builder, instance, x, exp_slack):
    n = len(instance.rows)
    t = [builder.add_variable(f"t{j + 1}", group="t") for j in range(n)]
    u = [builder.add_variable(f"u{j + 1}", lb=0.0, group="u") for j in range(n)]
    v = [builder.add_variable(f"v{j + 1}", lb=0.0, group="v") for j in range(n)]
    one = LinExpr((), 1.0)
    for j in range(n):
        _loss_pair(builder, u[j], v[j], one,
                   _margin_expr(instance, x, j, t[j]), t[j], exp_slack)
    return t


def _rank1_losses(builder, instance, x, z, cuts, exp_slack):
    n = len(instance.rows)
    t = [builder.add_variable(f"t{j + 1}", group="t") for j in range(n)]
    u = [builder.add_variable(f"u{j + 1}", lb=0.0, group="u") for j in range(n)]
    v = [builder.add_variable(f"v{j + 1}", lb=0.0, group="v") for j in range(n)]
    w = []
    for j in range(n):
        support = _lifted_support(instance.rows[j])
        ub = 1.0 if support else 0.0
        w.append(builder.add_variable(f"w{j + 1}", kind="binary", ub=ub,
                                      group="w"))
        if support:
            builder.add_row([(w[j], 1.0)] + [(z[i], -1.0) for i in support],
                            "<=", 0.0)
    for j in range(n):
        _loss_pair(builder, u[j], v[j], LinExpr.var(w[j]),
                   _margin_expr(instance, x, j, t[j]), t[j], exp_slack)
    if cuts:
        pattern = _activity_pattern(instance)
        poly = valid_cuts_logreg(instance.zset, pattern, "delta_v")
        splice_polytope(builder, poly, w + z)
    return t


def _rank1_plus_losses(builder, instance, x, z, cuts, exp_slack):
    n = len(instance.rows)
    d = instance.d
    t, u, v, w, s = [], [], [], [], []
    for j in range(n):
        row = instance.rows[j]
        for i in range(d):
            dead = row[i] == 0.0
            t.append(builder.add_variable(f"t{j + 1}_{i + 1}", group="t"))
            u.append(builder.add_variable(f"u{j + 1}_{i + 1}", lb=0.0,
                                          group="u"))
            v.append(builder.add_variable(f"v{j + 1}_{i + 1}", lb=0.0,
                                          group="v"))
            w.append(builder.add_variable(f"w{j + 1}_{i + 1}", kind="binary",
                                          ub=0.0 if dead else 1.0, group="w"))
            s.append(builder.add_variable(f"s{j + 1}_{i + 1}", lb=0.0,
                                          ub=0.0 if dead else None, group="s"))

    def at(j, i):
        return j * d + i

    for j in range(n):
        row = instance.rows[j]
        bj = instance.labels[j]
        if any(row):
            builder.add_row([(s[at(j, i)], row[i]) for i in range(d) if row[i]]
                            + [(xi, -c) for xi, c in zip(x, row) if c],
                            "=", 0.0)
        builder.add_row([(w[at(j, i)], 1.0) for i in range(d)], "<=", 1.0)
        for i in range(d):
            if row[i] == 0.0:
                continue
            builder.add_row([(s[at(j, i)], 1.0), (x[i], -1.0)], "<=", 0.0)
            builder.add_row([(w[at(j, i)], 1.0), (z[i], -1.0)], "<=", 0.0)
        for i in range(d):
            k = at(j, i)
            margin = LinExpr(((s[k], -bj * row[i]), (t[k], -1.0)))
            _loss_pair(builder, u[k], v[k], LinExpr.var(w[k]), margin, t[k],
                       exp_slack)
    if cuts:
        pattern = _activity_pattern(instance)
        poly = valid_cuts_logreg(instance.zset, pattern, "omega_v")
        splice_polytope(builder, poly, w + z)
    return t


def _rank1_w_losses(builder, instance, x, z, exp_slack):
    """Markers defined as explicit functions of z: a constant-one level,
    the lifted-support sum, the pairwise-activation sum, and the raw
    main sum.  The pairwise level exists only for samples with two or
    more raw features present, matching the span of the linking-cut
    pair family."""
    n = len(instance.rows)
    zset = instance.zset
    t = [builder.add_variable(f"t{j + 1}", group="t") for j in range(n)]
    for j in range(n):
        support = _lifted_support(instance.rows[j])
        active = _raw_active(instance, j)
        levels = [("one", (), 1.0),
                  ("supp", [(z[i], -1.0) for i in support], 0.0)]
        if len(active) >= 2:
            pair_terms = {}
            for a_pos, k in enumerate(active):
                for l in active[a_pos + 1:]:
                    for idx, coef in ((zset.main_index(k), 1.0),
                                      (zset.main_index(l), 1.0),
                                      (zset.cross_index(k, l), -1.0)):
                        pair_terms[idx] = pair_terms.get(idx, 0.0) + coef
            levels.append(("pair",
                           [(z[i], -c) for i, c in sorted(pair_terms.items())],
                           0.0))
        levels.append(("main",
                       [(z[zset.main_index(k)], -1.0) for k in active], 0.0))
        for role, zterms, rhs in levels:
            wk = builder.add_variable(f"w{role}{j + 1}", lb=0.0, group="w")
            uk = builder.add_variable(f"u{role}{j + 1}", lb=0.0, group="u")
            vk = builder.add_variable(f"v{role}{j + 1}", lb=0.0, group="v")
            builder.add_row([(wk, 1.0)] + list(zterms), "=", rhs)
            _loss_pair(builder, uk, vk, LinExpr.var(wk),
                       _margin_expr(instance, x, j, t[j]), t[j], exp_slack)
    return t


def _activity_pattern(instance):
    p = instance.zset.p
    out = []
    for j in range(len(instance.rows)):
        active = set(_raw_active(instance, j))
        out.append(tuple(1 if k in active else 0 for k in range(p)))
    return tuple(out)


def build_natural(instance):
    """Baseline without any support coupling on x: the ridge cone uses a
    constant second argument, so the relaxation drives z to zero."""
    _check_logistic(instance, "build_natural")
    b = ProgramBuilder()
    x, z, r = _common_variables(b, instance)
    splice_polytope(b, conv_z(instance.zset), z)
    one = LinExpr((), 1.0)
    for i in range(instance.d):
        b.add_cone(RotatedSOC3(LinExpr.var(r[i]), one, LinExpr.var(x[i])))
    t = _separable_losses(b, instance, x, "verbatim")
    return b.build(_objective(instance, t, z, r))


def build_bigM(instance, M):
    """Baseline coupling x to z through box rows of width M."""
    _check_logistic(instance, "build_bigM")
    if not M > 0:
        raise FormulationError("the box width M must be positive")
    b = ProgramBuilder()
    x, z, r = _common_variables(b, instance)
    splice_polytope(b, conv_z(instance.zset), z)
    one = LinExpr((), 1.0)
    sign = set(instance.sign_constrained)
    for i in range(instance.d):
        b.add_cone(RotatedSOC3(LinExpr.var(r[i]), one, LinExpr.var(x[i])))
        b.add_row([(x[i], 1.0), (z[i], -float(M))], "<=", 0.0)
        if i not in sign:
            b.add_row([(x[i], 1.0), (z[i], float(M))], ">=", 0.0)
    t = _separable_losses(b, instance, x, "verbatim")
    return b.build(_objective(instance, t, z, r))


def relax_markers(program):
    """Relax only the sample markers, keeping the support pattern binary."""
    return program.relax_subset(program.group("w"))


def regularized_loss(instance, x, z):
    """Exact objective at a support pattern: mean logistic loss plus the
    support and squared-norm penalties."""
    margins = [instance.labels[j] * sum(c * xi for c, xi in zip(row, x))
               for j, row in enumerate(instance.rows)]
    loss = sum(float(np.logaddexp(0.0, -m)) for m in margins)
    loss /= len(instance.rows)
    return (loss + instance.lam * sum(z)
            + instance.mu * sum(xi * xi for xi in x))


def _ridge_values(x, z):
    r = []
    for xi, zi in zip(x, z):
        if xi != 0.0 and zi == 0.0:
            raise FormulationError(
                "x is active where z is not; no finite witness")
        r.append(xi * xi / zi if xi != 0.0 else 0.0)
    return r


def _slack_pair(c, t, w):
    """(u, v) hitting both exponential-cone rows with u + v = 2w."""
    if w == 0.0:
        return 0.0, 0.0
    return w * math.exp((-c - t) / w), w * math.exp(-t / w)


def logreg_witness(program, instance, which, x, z):
    """Feasible full point at a binary support pattern.

    Needs z in the support set, x zero wherever z is, and x within its
    sign bounds.  The point attains the exact regularized loss, so it
    doubles as an incumbent certificate.
    """
    h = instance.atoms[0]
    d = instance.d
    n = len(instance.rows)
    point = [0.0] * program.nvars
    for idx, val in zip(program.group("x"), x):
        point[idx] = float(val)
    for idx, val in zip(program.group("z"), z):
        point[idx] = float(val)
    for idx, val in zip(program.group("r"), _ridge_values(x, z)):
        point[idx] = val
    margins = [instance.labels[j]
               * sum(c * xi for c, xi in zip(instance.rows[j], x))
               for j in range(n)]

    def put(name, value):
        point[program.variable_index(name)] = value

    if which == "separable":
        for j, c in enumerate(margins):
            t = h.value(c)
            u, v = _slack_pair(c, t, 1.0)
            put(f"t{j + 1}", t), put(f"u{j + 1}", u), put(f"v{j + 1}", v)
    elif which == "rank1":
        for j, c in enumerate(margins):
            support = _lifted_support(instance.rows[j])
            w = 1.0 if any(z[i] for i in support) else 0.0
            t = eval_perspective_closure(h, c, w)
            u, v = _slack_pair(c, t, w)
            put(f"w{j + 1}", w), put(f"t{j + 1}", t)
            put(f"u{j + 1}", u), put(f"v{j + 1}", v)
    elif which == "rank1_plus":
        for j, c in enumerate(margins):
            row = instance.rows[j]
            sigma = sum(ai * xi for ai, xi in zip(row, x))
            shares = [0.0] * d
            if sigma != 0.0:
                keep = [i for i in range(d) if row[i] * x[i] * sigma > 0]
                theta = sigma / sum(row[i] * x[i] for i in keep)
                for i in keep:
                    shares[i] = theta * x[i]
            for i in range(d):
                s = shares[i]
                w = row[i] * s / sigma if s else 0.0
                t = w * h.value(c)
                u, v = _slack_pair(w * c, t, w)
                put(f"s{j + 1}_{i + 1}", s), put(f"w{j + 1}_{i + 1}", w)
                put(f"t{j + 1}_{i + 1}", t)
                put(f"u{j + 1}_{i + 1}", u), put(f"v{j + 1}_{i + 1}", v)
    elif which == "rank1_w":
        zset = instance.zset
        for j, c in enumerate(margins):
            support = _lifted_support(instance.rows[j])
            active = _raw_active(instance, j)
            levels = {"one": 1.0,
                      "supp": float(sum(z[i] for i in support)),
                      "main": float(sum(z[zset.main_index(k)]
                                        for k in active))}
            if len(active) >= 2:
                total = 0.0
                for a_pos, k in enumerate(active):
                    for l in active[a_pos + 1:]:
                        total += (z[zset.main_index(k)]
                                  + z[zset.main_index(l)]
                                  - z[zset.cross_index(k, l)])
                levels["pair"] = total
            t = max(eval_perspective_closure(h, c, w) for w in levels.values())
            put(f"t{j + 1}", t)
            for role, w in levels.items():
                u, v = _slack_pair(c, t, w)
                put(f"w{role}{j + 1}", w)
                put(f"u{role}{j + 1}", u), put(f"v{role}{j + 1}", v)
    else:
        raise FormulationError(f"unknown variant {which!r}; pick from "
                               f"{VARIANTS}")
    return point

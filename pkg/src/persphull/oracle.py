"""Verification oracles that compare implementations against ground truth.

Each check runs many randomized or exhaustive trials and returns a
report carrying the trial count, the failures with concrete witnesses,
and the worst discrepancy seen.  A report passes exactly when it has no
failures, which by construction is the same as the worst discrepancy
lying within the check's tolerance.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .rationals import QQ, as_float


@dataclass(frozen=True)
class FailureWitness:
    """One concrete failing trial: what was checked, on what, how far off."""

    check: str
    objective: tuple | None
    point: tuple | None
    discrepancy: float
    note: str = ""


@dataclass(frozen=True)
class VerificationReport:
    name: str
    trials: int
    failures: tuple = ()
    tolerance: float = 0.0
    notes: tuple = ()

    @property
    def worst(self):
        if not self.failures:
            return 0.0
        return max(f.discrepancy for f in self.failures)

    @property
    def passed(self):
        return not self.failures

    def summary_line(self):
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{self.name}: {verdict} trials={self.trials} "
                f"failures={len(self.failures)} worst={self.worst:g} "
                f"tol={self.tolerance:g}")

    def detail_lines(self, limit=5):
        lines = [self.summary_line()]
        for note in self.notes:
            lines.append(f"  note: {note}")
        for f in self.failures[:limit]:
            lines.append(f"  {f.check}: obj={f.objective} point={f.point} "
                         f"disc={f.discrepancy:g} {f.note}".rstrip())
        if len(self.failures) > limit:
            lines.append(f"  ... {len(self.failures) - limit} more failures")
        return lines


def merge_reports(name, reports):
    """Combine several reports into one, keeping every witness."""
    failures = tuple(itertools.chain.from_iterable(r.failures for r in reports))
    tol = max((r.tolerance for r in reports), default=0.0)
    notes = tuple(itertools.chain.from_iterable(r.notes for r in reports))
    return VerificationReport(name, sum(r.trials for r in reports), failures,
                              tol, notes)


def polytope_exactness(poly, members, n_objectives=100, seed=0,
                       name="polytope_exactness"):
    """Exhaustive and LP-based equality check of a polytope vs a point list.

    Three sub-checks, all exact: every listed 0/1 point is contained;
    every contained 0/1 point is listed; and for random integer
    objectives the LP maximum equals the best listed point.  Tolerance
    is zero throughout.
    """
    member_set = {tuple(int(v) for v in m) for m in members}
    n = poly.n_main
    failures = []
    trials = 0
    for pt in itertools.product((0, 1), repeat=n):
        trials += 1
        inside = poly.contains(pt)
        listed = pt in member_set
        if listed and not inside:
            failures.append(FailureWitness("containment", None, pt, 1.0,
                                           "listed point not contained"))
        elif inside and not listed:
            failures.append(FailureWitness("integral_converse", None, pt, 1.0,
                                           "contained point not listed"))
    rng = np.random.Generator(np.random.PCG64(seed))
    for _ in range(n_objectives):
        trials += 1
        obj = tuple(int(v) for v in rng.integers(-3, 4, size=n))
        enum_best = max(sum(QQ(c) * m for c, m in zip(obj, pt))
                        for pt in member_set) if member_set else None
        res = poly.maximize(obj)
        if enum_best is None:
            continue
        if res.status != "optimal":
            failures.append(FailureWitness("lp_vs_enumeration", obj, None,
                                           float("inf"),
                                           f"lp status {res.status}"))
            continue
        if res.objective != enum_best:
            gap = abs(as_float(res.objective - enum_best))
            failures.append(FailureWitness(
                "lp_vs_enumeration", obj,
                tuple(as_float(v) for v in res.x[:n]), max(gap, 1e-300),
                f"lp={as_float(res.objective):g} enum={as_float(enum_best):g}"))
    return VerificationReport(name, trials, tuple(failures))

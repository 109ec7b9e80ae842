"""Binary support-pattern families and the activation sets built over them.

A support set collects the admissible 0/1 indicator vectors z of a fixed
dimension d; an entry z_i = 1 marks coordinate i as allowed to be active.
Three auxiliary binary sets over a support set Z appear downstream:

* delta-1: (w, z) with one extra binary w <= z_1 + ... + z_d,
* delta-p: (w, z) with one extra binary per block of the indicator graph,
* omega:   (w, z) with w in {0,1}^d, sum(w) <= 1 and w <= z componentwise.

Exact convex-hull descriptions of these sets live in ``polytopes``; this
module supplies the sets themselves, their enumeration, the indicator
graph, and normalized facet data for the hull of the nonzero members.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

from .rationals import QQ

ENUMERATION_LIMIT = 25


class BinarySetError(ValueError):
    """Invalid construction of, or query on, a binary support set."""


def _as_binary_vector(z, d):
    try:
        items = list(z)
    except TypeError as exc:
        raise BinarySetError(f"expected a sequence of 0/1 entries, got {z!r}") from exc
    if len(items) != d:
        raise BinarySetError(f"expected a vector of length {d}, got length {len(items)}")
    out = []
    for v in items:
        if v == 0:
            out.append(0)
        elif v == 1:
            out.append(1)
        else:
            raise BinarySetError(f"entries must be 0 or 1, got {v!r}")
    return tuple(out)


@dataclass(frozen=True)
class IndicatorGraph:
    """Graph on the d coordinates; an edge means both ends can be 1 together.

    Edges are 0-based pairs (i, j) with i < j; components are sorted tuples
    ordered by smallest element and cover every coordinate exactly once.
    """

    d: int
    edges: tuple
    components: tuple

    def is_complete(self) -> bool:
        return len(self.edges) == self.d * (self.d - 1) // 2


def _components_from_edges(d, edges):
    parent = list(range(d))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[rj] = ri
    groups = {}
    for i in range(d):
        groups.setdefault(find(i), []).append(i)
    return tuple(tuple(sorted(g)) for g in sorted(groups.values(), key=min))


class BinarySet:
    """Shared behavior of every support-set family.

    Concrete families are frozen dataclasses, so equality and hashing are
    structural; enumeration results are cached per set.
    """

    d: int

    # "complete" or "empty" when the edge set is known without enumeration.
    def _edge_form(self):
        return None

    def _holds(self, z) -> bool:
        raise NotImplementedError

    def membership(self, z) -> bool:
        """True iff the 0/1 vector z of length d belongs to the set."""
        return self._holds(_as_binary_vector(z, self.d))

    def members(self) -> tuple:
        """Every member as a tuple, in lexicographic order; requires d <= 25."""
        if self.d > ENUMERATION_LIMIT:
            raise BinarySetError(
                f"enumeration supports d <= {ENUMERATION_LIMIT}, got d={self.d}")
        return _members_cached(self)

    def indicator_graph(self) -> IndicatorGraph:
        """Graph with an edge {i, j} wherever some member has z_i = z_j = 1."""
        return _graph_cached(self)

    def is_connected(self) -> bool:
        form = self._edge_form()
        if form == "complete":
            return True
        if form == "empty":
            return self.d == 1
        return len(self.indicator_graph().components) == 1

    def has_pairwise_activation(self) -> bool:
        """True iff every pair of coordinates is active together in some member."""
        form = self._edge_form()
        if form == "complete":
            return True
        if form == "empty":
            return self.d == 1
        return self.indicator_graph().is_complete()


@lru_cache(maxsize=None)
def _members_cached(zset):
    return tuple(z for z in itertools.product((0, 1), repeat=zset.d)
                 if zset._holds(z))


@lru_cache(maxsize=None)
def _graph_cached(zset):
    d = zset.d
    form = zset._edge_form()
    if form == "complete":
        edges = tuple((i, j) for i in range(d) for j in range(i + 1, d))
    elif form == "empty":
        edges = ()
    else:
        seen = set()
        for z in zset.members():
            support = [i for i, v in enumerate(z) if v]
            for a in range(len(support)):
                for b in range(a + 1, len(support)):
                    seen.add((support[a], support[b]))
        edges = tuple(sorted(seen))
    return IndicatorGraph(d, edges, _components_from_edges(d, edges))


@dataclass(frozen=True)
class FullCube(BinarySet):
    """All 0/1 vectors of length d."""

    d: int

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise BinarySetError("dimension must be a positive integer")

    def _edge_form(self):
        return "complete"

    def _holds(self, z):
        return True


@dataclass(frozen=True)
class Cardinality(BinarySet):
    """Vectors with at most kappa active coordinates."""

    d: int
    kappa: int

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise BinarySetError("dimension must be a positive integer")
        if not isinstance(self.kappa, int) or not 1 <= self.kappa <= self.d:
            raise BinarySetError(f"kappa must be an integer in 1..{self.d}")

    def _edge_form(self):
        return "empty" if self.kappa == 1 else "complete"

    def _holds(self, z):
        return sum(z) <= self.kappa


@dataclass(frozen=True)
class WeakHierarchy(BinarySet):
    """The last coordinate may be active only if some earlier one is."""

    d: int

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 2:
            raise BinarySetError(
                "weak hierarchy needs d >= 2; with d = 1 the last coordinate "
                "could never be active")

    def _edge_form(self):
        return "complete"

    def _holds(self, z):
        return z[-1] <= sum(z[:-1])


@dataclass(frozen=True)
class StrongHierarchy(BinarySet):
    """The last coordinate may be active only if all earlier ones are."""

    d: int

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise BinarySetError("dimension must be a positive integer")

    def _edge_form(self):
        return "complete"

    def _holds(self, z):
        last = z[-1]
        return all(last <= v for v in z[:-1])


@dataclass(frozen=True)
class QuadraticStrongHierarchy(BinarySet):
    """Indicators for p main effects plus their squares and cross products.

    Coordinates are laid out as the p mains, then the p squares, then the
    p(p-1)/2 cross terms (k, l) with k < l in lexicographic order, for a
    total of d = p(p+3)/2.  A square or cross indicator may be active only
    if the involved main indicators are.
    """

    p: int

    def __post_init__(self):
        if not isinstance(self.p, int) or self.p < 1:
            raise BinarySetError("p must be a positive integer")

    @property
    def d(self):
        return self.p * (self.p + 3) // 2

    def main_index(self, k):
        if not 0 <= k < self.p:
            raise BinarySetError(f"main index {k} out of range 0..{self.p - 1}")
        return k

    def square_index(self, k):
        if not 0 <= k < self.p:
            raise BinarySetError(f"square index {k} out of range 0..{self.p - 1}")
        return self.p + k

    def cross_index(self, k, l):
        if not 0 <= k < l < self.p:
            raise BinarySetError(f"cross index ({k}, {l}) needs 0 <= k < l < p")
        return 2 * self.p + k * self.p - k * (k + 1) // 2 + (l - k - 1)

    def _edge_form(self):
        return "complete"

    def _holds(self, z):
        p = self.p
        for k in range(p):
            if z[p + k] > z[k]:
                return False
        idx = 2 * p
        for k in range(p):
            for l in range(k + 1, p):
                if z[idx] > z[k] or z[idx] > z[l]:
                    return False
                idx += 1
        return True


@dataclass(frozen=True)
class GenericLinear(BinarySet):
    """Vectors satisfying an explicit integer system F z <= f."""

    d: int
    F: tuple
    f: tuple

    def __post_init__(self):
        if not isinstance(self.d, int) or self.d < 1:
            raise BinarySetError("dimension must be a positive integer")
        if self.d > ENUMERATION_LIMIT:
            raise BinarySetError(
                f"generic sets support d <= {ENUMERATION_LIMIT} so the "
                "coverage invariant can be verified by enumeration")
        rows = []
        for row in self.F:
            vals = tuple(_as_exact_int(c) for c in row)
            if len(vals) != self.d:
                raise BinarySetError("every row of F must have length d")
            rows.append(vals)
        rhs = tuple(_as_exact_int(v) for v in self.f)
        if len(rhs) != len(rows):
            raise BinarySetError("F and f must have the same number of rows")
        object.__setattr__(self, "F", tuple(rows))
        object.__setattr__(self, "f", rhs)
        self._check_coverage()

    def _check_coverage(self):
        missing = set(range(self.d))
        for z in itertools.product((0, 1), repeat=self.d):
            if not missing:
                break
            if missing & {i for i, v in enumerate(z) if v} and self._holds(z):
                missing -= {i for i, v in enumerate(z) if v}
        if missing:
            coords = ", ".join(str(i + 1) for i in sorted(missing))
            raise BinarySetError(
                f"no member activates coordinate(s) {coords}; every coordinate "
                "must be active in at least one member")

    def _holds(self, z):
        return all(sum(c * v for c, v in zip(row, z)) <= b
                   for row, b in zip(self.F, self.f))


def _as_exact_int(value):
    iv = int(value)
    if iv != value:
        raise BinarySetError(f"matrix data must be integer, got {value!r}")
    return iv


def membership(zset, z) -> bool:
    """True iff the 0/1 vector z belongs to the support set."""
    return zset.membership(z)


def enumerate_members(zset) -> tuple:
    """Every member of the support set in lexicographic order (d <= 25)."""
    return zset.members()


def indicator_graph(zset) -> IndicatorGraph:
    """The coordinate co-activation graph of the support set."""
    return zset.indicator_graph()


def validate_partition(zset, partition) -> tuple:
    """Check that a block partition equals the indicator-graph components.

    Blocks are returned in caller order with coordinates sorted ascending;
    the set of blocks must equal the set of connected components.
    """
    blocks = []
    seen = set()
    for block in partition:
        b = tuple(sorted(int(i) for i in block))
        if not b:
            raise BinarySetError("partition blocks must be nonempty")
        for i in b:
            if not 0 <= i < zset.d:
                raise BinarySetError(f"coordinate {i} out of range 0..{zset.d - 1}")
            if i in seen:
                raise BinarySetError(f"coordinate {i} appears in two blocks")
            seen.add(i)
        blocks.append(b)
    if len(seen) != zset.d:
        raise BinarySetError("partition must cover every coordinate")
    components = zset.indicator_graph().components
    if set(blocks) != set(components):
        raise BinarySetError(
            "partition must match the indicator-graph components "
            f"{components}, got {tuple(blocks)}")
    return tuple(blocks)


def delta1_members(zset) -> tuple:
    """All (w, z) with w binary, z a member, and w <= sum(z)."""
    out = []
    for z in zset.members():
        out.append((0,) + z)
        if any(z):
            out.append((1,) + z)
    return tuple(sorted(out))


def delta_p_members(zset, partition) -> tuple:
    """All (w, z) with one binary w_i per block, w_i <= sum of z over block i."""
    blocks = validate_partition(zset, partition)
    p = len(blocks)
    out = []
    for z in zset.members():
        active = [i for i, b in enumerate(blocks) if any(z[j] for j in b)]
        for bits in itertools.product((0, 1), repeat=len(active)):
            w = [0] * p
            for i, bit in zip(active, bits):
                w[i] = bit
            out.append(tuple(w) + z)
    return tuple(sorted(out))


def omega_members(zset) -> tuple:
    """All (w, z) with w binary, sum(w) <= 1, w <= z, and z a member."""
    out = []
    d = zset.d
    for z in zset.members():
        out.append((0,) * d + z)
        for i in range(d):
            if z[i]:
                w = [0] * d
                w[i] = 1
                out.append(tuple(w) + z)
    return tuple(sorted(out))


@dataclass(frozen=True)
class NonzeroHullForm:
    """Normalized inequality data for the hull of the nonzero members.

    The hull of the members other than the origin is written as
    {z : c.z >= 0 for c in cone, f.z >= 1 for f in plus, g.z <= 1 for g
    in minus}; right-hand sides are scaled to 0 or 1 so the rows can be
    rescaled by an activation variable.
    """

    d: int
    cone: tuple
    plus: tuple
    minus: tuple

    def __post_init__(self):
        for name in ("cone", "plus", "minus"):
            rows = []
            for row in getattr(self, name):
                vals = tuple(QQ(c) for c in row)
                if len(vals) != self.d:
                    raise BinarySetError(f"{name} rows must have length {self.d}")
                if all(c == 0 for c in vals):
                    raise BinarySetError(f"{name} rows must be nonzero")
                rows.append(vals)
            object.__setattr__(self, name, tuple(rows))


def _unit_rows(d):
    rows = []
    for i in range(d):
        row = [0] * d
        row[i] = 1
        rows.append(tuple(row))
    return tuple(rows)


def nonzero_hull_normal_form(zset) -> NonzeroHullForm:
    """Closed-form facet data for the hull of the nonzero members.

    Available for the full cube, cardinality, and the two hierarchy
    families; other families must supply their own data.
    """
    d = zset.d
    units = _unit_rows(d)
    ones = (1,) * d
    if isinstance(zset, (FullCube, Cardinality)) or (
            isinstance(zset, StrongHierarchy) and d == 1):
        kappa = zset.kappa if isinstance(zset, Cardinality) else d
        if d == 1:
            return NonzeroHullForm(1, ((1,),), ((1,),), ((1,),))
        if kappa == 1:
            return NonzeroHullForm(d, units, (ones,), (ones,))
        minus = units
        if kappa < d:
            minus = units + (tuple(QQ(1, kappa) for _ in range(d)),)
        return NonzeroHullForm(d, units, (ones,), minus)
    if isinstance(zset, WeakHierarchy):
        head = (1,) * (d - 1)
        cone = units + (head + (-1,),)
        return NonzeroHullForm(d, cone, (head + (0,),), units)
    if isinstance(zset, StrongHierarchy):
        last = units[-1]
        cone = (last,) + tuple(tuple(u[j] - last[j] for j in range(d))
                               for u in units[:-1])
        plus = ((1,) * (d - 1) + (-(d - 2),),)
        minus = units[:-1]
        return NonzeroHullForm(d, cone, plus, minus)
    raise BinarySetError(
        f"no closed-form facet data for {type(zset).__name__}; supply a "
        "NonzeroHullForm explicitly")


def block_section(zset, block) -> tuple:
    """Members supported inside one block, restricted to its coordinates."""
    block = tuple(sorted(int(i) for i in block))
    others = [j for j in range(zset.d) if j not in block]
    out = set()
    for z in zset.members():
        if all(z[j] == 0 for j in others):
            out.add(tuple(z[j] for j in block))
    return tuple(sorted(out))


def detect_section_form(members, b) -> NonzeroHullForm:
    """Match a block section against the closed-form families.

    Returns facet data for the hull of the section's nonzero members, or
    raises when the section is none of the supported families.
    """
    target = set(members)
    candidates = [FullCube(b)]
    candidates += [Cardinality(b, k) for k in range(1, b)]
    if b >= 2:
        candidates += [WeakHierarchy(b), StrongHierarchy(b)]
    for cand in candidates:
        if set(cand.members()) == target:
            return nonzero_hull_normal_form(cand)
    raise BinarySetError(
        f"block section {sorted(target)} matches no supported family; "
        "supply its facet data explicitly")

import pytest

from persphull.atoms import Quadratic
from persphull.binsets import (
    Cardinality,
    FullCube,
    GenericLinear,
    QuadraticStrongHierarchy,
    StrongHierarchy,
    WeakHierarchy,
)
from persphull.formulations import (
    FormulationError,
    ProblemInstance,
    build_rank1_general,
    build_rank1_hull,
    build_rank1_plus,
    build_separable_hull,
    rank1_general_witness,
    rank1_plus_witness,
    rank1_witness,
    separable_witness,
)
from persphull.programs import PerspEpi

TOL = 1e-9

SPLIT_CUBE = GenericLinear(
    4,
    ((1, 0, 1, 0), (1, 0, 0, 1), (0, 1, 1, 0), (0, 1, 0, 1)),
    (1, 1, 1, 1),
)


def find_row(program, terms, sense, rhs):
    want = tuple(sorted((i, float(c)) for i, c in terms.items() if c))
    for row in program.rows:
        if row.expr.terms == want and row.sense == sense and row.rhs == rhs:
            return row
    raise AssertionError(f"no row {terms} {sense} {rhs}")


def supported_vectors(z, values=(0.6, -1.3)):
    """A few x vectors whose support lies inside supp(z)."""
    live = [i for i, v in enumerate(z) if v]
    out = [tuple(0.0 for _ in z)]
    for v in values:
        x = [0.0] * len(z)
        for i in live:
            x[i] = v
        out.append(tuple(x))
    if live:
        x = [0.0] * len(z)
        x[live[0]] = 0.8
        out.append(tuple(x))
    return out


class TestProblemInstance:
    def test_row_length_checked(self):
        with pytest.raises(FormulationError, match="length"):
            ProblemInstance((Quadratic(),), FullCube(2), rows=((1.0,),))

    def test_labels_checked(self):
        with pytest.raises(FormulationError, match="one label"):
            ProblemInstance((Quadratic(),), FullCube(2),
                            rows=((1.0, 1.0),), labels=(1.0, -1.0))
        with pytest.raises(FormulationError, match="-1 or"):
            ProblemInstance((Quadratic(),), FullCube(2),
                            rows=((1.0, 1.0),), labels=(2.0,))

    def test_sign_set_checked(self):
        with pytest.raises(FormulationError, match="indices"):
            ProblemInstance((Quadratic(),), FullCube(2), sign_constrained=(5,))

    def test_regularization_checked(self):
        with pytest.raises(FormulationError, match="nonnegative"):
            ProblemInstance((Quadratic(),), FullCube(2), lam=-1.0)

    def test_atoms_required(self):
        with pytest.raises(FormulationError, match="atom"):
            ProblemInstance((), FullCube(2))

    def test_normalization(self):
        inst = ProblemInstance((Quadratic(),), FullCube(2),
                               rows=((1, -2),), labels=(1,),
                               sign_constrained=(1, 0, 1))
        assert inst.rows == ((1.0, -2.0),)
        assert inst.sign_constrained == (0, 1)
        assert inst.d == 2


class TestSeparable:
    def instance(self, zset, sign=()):
        return ProblemInstance(tuple(Quadratic() for _ in range(zset.d)),
                               zset, sign_constrained=sign)

    def test_needs_one_atom_per_coordinate(self):
        with pytest.raises(FormulationError, match="one atom per coordinate"):
            build_separable_hull(ProblemInstance((Quadratic(),), FullCube(2)))

    def test_structure(self):
        prog = build_separable_hull(self.instance(Cardinality(2, 1), sign=(0,)))
        assert prog.group("z") == (3, 4)
        assert prog.kinds[3] == prog.kinds[4] == "binary"
        assert prog.lb[prog.variable_index("x1")] == 0.0
        assert prog.lb[prog.variable_index("x2")] is None
        find_row(prog, {prog.variable_index("t1"): 1,
                        prog.variable_index("t2"): 1,
                        prog.variable_index("tau"): -1}, "=", 0.0)
        find_row(prog, {3: 1, 4: 1}, "<=", 1.0)
        epis = [c for c in prog.cones if isinstance(c, PerspEpi)]
        assert len(epis) == 2
        assert epis[0].w.terms == ((3, 1.0),)

    def test_relaxation_flips_only_kinds(self):
        prog = build_separable_hull(self.instance(FullCube(2)))
        relaxed = prog.relax()
        assert set(relaxed.kinds) == {"continuous"}
        assert relaxed.rows == prog.rows

    def test_explicit_system_fallback(self):
        inst = ProblemInstance(tuple(Quadratic() for _ in range(4)), SPLIT_CUBE)
        prog = build_separable_hull(inst)
        zi = prog.group("z")
        find_row(prog, {zi[0]: 1, zi[2]: 1}, "<=", 1.0)

    @pytest.mark.parametrize("zset", [Cardinality(2, 1), WeakHierarchy(3)],
                             ids=str)
    def test_member_witnesses_feasible(self, zset):
        inst = self.instance(zset)
        prog = build_separable_hull(inst).relax()
        for z in zset.members():
            for x in supported_vectors(z):
                point = separable_witness(prog, inst, x, z)
                assert prog.constraint_violation(point) <= TOL

    def test_zero_x_feasible_for_every_member(self):
        zset = Cardinality(3, 2)
        inst = self.instance(zset)
        prog = build_separable_hull(inst).relax()
        for z in zset.members():
            point = separable_witness(prog, inst, (0.0,) * 3, z)
            assert point[prog.group("tau")[0]] == 0.0
            assert prog.constraint_violation(point) <= TOL

    def test_witness_rejects_uncovered_support(self):
        inst = self.instance(FullCube(2))
        prog = build_separable_hull(inst)
        with pytest.raises(FormulationError, match="active"):
            separable_witness(prog, inst, (1.0, 0.0), (0, 0))


class TestRank1:
    def instance(self, zset, a, sign=()):
        return ProblemInstance((Quadratic(),), zset, rows=(a,),
                               sign_constrained=sign)

    def test_needs_single_atom_and_row(self):
        with pytest.raises(FormulationError, match="one shared atom"):
            build_rank1_hull(ProblemInstance((Quadratic(), Quadratic()),
                                             FullCube(2), rows=((1, 1),)))
        with pytest.raises(FormulationError, match="one weight row"):
            build_rank1_hull(ProblemInstance((Quadratic(),), FullCube(2)))

    def test_needs_dense_weights(self):
        with pytest.raises(FormulationError, match="nonzero weights"):
            build_rank1_hull(self.instance(FullCube(2), (1.0, 0.0)))

    def test_needs_free_x(self):
        with pytest.raises(FormulationError, match="rank1_plus"):
            build_rank1_hull(self.instance(FullCube(2), (1.0, 1.0), sign=(0,)))

    def test_disconnected_directed_to_general(self):
        with pytest.raises(FormulationError, match="build_rank1_general"):
            build_rank1_hull(self.instance(SPLIT_CUBE, (1.0, 1.0, 1.0, 1.0)))

    def test_structure(self):
        prog = build_rank1_hull(self.instance(FullCube(2), (1.0, -2.0)))
        w = prog.variable_index("w1")
        s = prog.variable_index("s1")
        assert prog.kinds[w] == "binary"
        find_row(prog, {prog.variable_index("t1"): 1,
                        prog.variable_index("tau"): -1}, "=", 0.0)
        find_row(prog, {s: 1, prog.variable_index("x1"): -1,
                        prog.variable_index("x2"): 2}, "=", 0.0)
        zi = prog.group("z")
        find_row(prog, {w: 1, zi[0]: -1, zi[1]: -1}, "<=", 0.0)
        epi = [c for c in prog.cones if isinstance(c, PerspEpi)]
        assert len(epi) == 1
        assert epi[0].x.terms == ((s, 1.0),)

    def test_quadratic_family_falls_back_to_raw_rows(self):
        zset = QuadraticStrongHierarchy(2)
        prog = build_rank1_hull(self.instance(zset, (1.0,) * 5))
        w = prog.variable_index("w1")
        zi = prog.group("z")
        find_row(prog, {w: 1, **{i: -1 for i in zi}}, "<=", 0.0)
        find_row(prog, {zi[2]: 1, zi[0]: -1}, "<=", 0.0)

    def test_member_witnesses_feasible(self):
        zset = FullCube(3)
        inst = self.instance(zset, (1.0, -2.0, 3.0))
        prog = build_rank1_hull(inst).relax()
        for z in zset.members():
            for x in supported_vectors(z):
                point = rank1_witness(prog, inst, x, z)
                assert prog.constraint_violation(point) <= TOL

    def test_recession_shift_keeps_feasibility(self):
        inst = self.instance(FullCube(2), (1.0, 1.0))
        prog = build_rank1_hull(inst).relax()
        point = rank1_witness(prog, inst, (0.75, 0.25), (1, 1))
        xg = prog.group("x")
        for c in (0.5, -2.0, 10.0):
            shifted = list(point)
            shifted[xg[0]] += c
            shifted[xg[1]] -= c
            assert prog.constraint_violation(shifted) <= TOL


class TestRank1General:
    def instance(self, zset, a):
        return ProblemInstance((Quadratic(),), zset, rows=(a,))

    def test_partition_must_match_components(self):
        inst = self.instance(SPLIT_CUBE, (1.0, 1.0, 1.0, 1.0))
        with pytest.raises(FormulationError, match="components"):
            build_rank1_general(inst, ((0, 1, 2, 3),))

    def test_structure_two_blocks(self):
        inst = self.instance(SPLIT_CUBE, (1.0, 2.0, 3.0, 4.0))
        prog = build_rank1_general(inst, ((0, 1), (2, 3)))
        assert len(prog.group("w")) == 2
        assert prog.has_group("hull_aux")
        w = prog.group("w")
        find_row(prog, {w[0]: 1, w[1]: 1}, "<=", 1.0)
        xi = prog.group("x")
        find_row(prog, {prog.variable_index("s1"): 1, xi[0]: -1, xi[1]: -2},
                 "=", 0.0)
        find_row(prog, {prog.variable_index("s2"): 1, xi[2]: -3, xi[3]: -4},
                 "=", 0.0)

    def test_member_witnesses_feasible(self):
        inst = self.instance(SPLIT_CUBE, (1.0, 2.0, 3.0, 4.0))
        partition = ((0, 1), (2, 3))
        prog = build_rank1_general(inst, partition).relax()
        for z in SPLIT_CUBE.members():
            for x in supported_vectors(z):
                point = rank1_general_witness(prog, inst, partition, x, z)
                assert prog.constraint_violation(point) <= TOL

    def test_single_block_matches_rank1_shape(self):
        inst = self.instance(WeakHierarchy(3), (1.0, 1.0, 1.0))
        prog = build_rank1_general(inst, ((0, 1, 2),))
        assert len(prog.group("w")) == 1
        assert not prog.has_group("hull_aux")

    def test_blockwise_recession(self):
        inst = self.instance(SPLIT_CUBE, (1.0, 1.0, 1.0, 1.0))
        partition = ((0, 1), (2, 3))
        prog = build_rank1_general(inst, partition).relax()
        point = rank1_general_witness(prog, inst, partition,
                                      (0.5, 0.5, 0.0, 0.0), (1, 1, 0, 0))
        xg = prog.group("x")
        shifted = list(point)
        shifted[xg[0]] += 3.0
        shifted[xg[1]] -= 3.0
        assert prog.constraint_violation(shifted) <= TOL


class TestRank1Plus:
    def instance(self, zset, a, sign=None):
        sign = tuple(range(zset.d)) if sign is None else sign
        return ProblemInstance((Quadratic(),), zset, rows=(a,),
                               sign_constrained=sign)

    def test_one_active_coordinate_directed_to_separable(self):
        with pytest.raises(FormulationError, match="build_separable_hull"):
            build_rank1_plus(self.instance(Cardinality(3, 1), (1.0,) * 3))

    def test_pairwise_activation_required(self):
        with pytest.raises(FormulationError, match="jointly"):
            build_rank1_plus(self.instance(SPLIT_CUBE, (1.0,) * 4))

    def test_linear_atom_rejected(self):
        inst = ProblemInstance((Quadratic(quad=0.0, lin=1.0),), FullCube(2),
                               rows=((1.0, 1.0),))
        with pytest.raises(FormulationError, match="nonlinear"):
            build_rank1_plus(inst)

    def test_structure(self):
        prog = build_rank1_plus(self.instance(FullCube(2), (1.0, -2.0)))
        s = [prog.variable_index("s1"), prog.variable_index("s2")]
        x = prog.group("x")
        w = prog.group("w")
        assert prog.lb[s[0]] == prog.lb[s[1]] == 0.0
        find_row(prog, {s[0]: 1, s[1]: -2, x[0]: -1, x[1]: 2}, "=", 0.0)
        find_row(prog, {s[0]: 1, x[0]: -1}, "<=", 0.0)
        find_row(prog, {w[0]: 1, w[1]: 1}, "<=", 1.0)
        epis = [c for c in prog.cones if isinstance(c, PerspEpi)]
        assert epis[1].x.terms == ((s[1], -2.0),)

    def test_strong_hierarchy_lift_spliced(self):
        prog = build_rank1_plus(self.instance(StrongHierarchy(3), (1.0,) * 3))
        assert len(prog.group("hull_aux")) == 12

    def test_free_coordinates_leave_shares_free(self):
        prog = build_rank1_plus(self.instance(FullCube(2), (1.0, 1.0),
                                              sign=(0,)))
        assert prog.lb[prog.variable_index("s1")] == 0.0
        assert prog.lb[prog.variable_index("s2")] is None

    @pytest.mark.parametrize("zset", [FullCube(2), StrongHierarchy(3),
                                      Cardinality(3, 2)], ids=str)
    def test_member_witnesses_feasible(self, zset):
        d = zset.d
        a = tuple(float(2 * i + 1) for i in range(d))
        inst = self.instance(zset, a)
        prog = build_rank1_plus(inst).relax()
        for z in zset.members():
            for x in supported_vectors(z, values=(0.6, 1.4)):
                point = rank1_plus_witness(prog, inst, x, z)
                assert prog.constraint_violation(point) <= TOL, (z, x)

    def test_mixed_sign_witnesses(self):
        inst = self.instance(FullCube(2), (1.0, 1.0), sign=())
        prog = build_rank1_plus(inst).relax()
        cancel = rank1_plus_witness(prog, inst, (1.0, -1.0), (1, 1))
        assert prog.constraint_violation(cancel) <= TOL
        assert cancel[prog.group("tau")[0]] == 0.0
        partial = rank1_plus_witness(prog, inst, (2.0, -1.0), (1, 1))
        assert prog.constraint_violation(partial) <= TOL
        assert partial[prog.group("tau")[0]] == pytest.approx(1.0)

    def test_recession_shift_in_sign_cone(self):
        inst = self.instance(FullCube(2), (1.0, -1.0))
        prog = build_rank1_plus(inst).relax()
        point = rank1_plus_witness(prog, inst, (0.5, 0.25), (1, 1))
        xg = prog.group("x")
        shifted = list(point)
        shifted[xg[0]] += 2.0
        shifted[xg[1]] += 2.0
        assert prog.constraint_violation(shifted) <= TOL

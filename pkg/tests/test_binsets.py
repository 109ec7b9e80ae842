import itertools

import pytest

from persphull import binsets as B


def brute_edges(zset):
    seen = set()
    for z in zset.members():
        support = [i for i, v in enumerate(z) if v]
        for a, b in itertools.combinations(support, 2):
            seen.add((a, b))
    return tuple(sorted(seen))


class TestMembership:
    def test_cardinality_member(self):
        assert B.Cardinality(3, 2).membership((1, 1, 0))

    def test_cardinality_excess(self):
        assert not B.Cardinality(3, 2).membership((1, 1, 1))

    def test_strong_hierarchy_violation(self):
        assert not B.StrongHierarchy(3).membership((1, 0, 1))

    def test_weak_hierarchy_violation(self):
        assert not B.WeakHierarchy(3).membership((0, 0, 1))

    def test_weak_hierarchy_member(self):
        assert B.WeakHierarchy(3).membership((0, 1, 1))

    def test_wrong_length_raises(self):
        with pytest.raises(B.BinarySetError):
            B.FullCube(3).membership((1, 0))

    def test_non_binary_entry_raises(self):
        with pytest.raises(B.BinarySetError):
            B.FullCube(2).membership((1, 0.5))

    def test_module_level_alias(self):
        assert B.membership(B.FullCube(2), (1, 1))


class TestConstruction:
    def test_bad_kappa(self):
        with pytest.raises(B.BinarySetError):
            B.Cardinality(3, 0)
        with pytest.raises(B.BinarySetError):
            B.Cardinality(3, 4)

    def test_weak_hierarchy_needs_two_dims(self):
        with pytest.raises(B.BinarySetError):
            B.WeakHierarchy(1)

    def test_qsh_needs_positive_p(self):
        with pytest.raises(B.BinarySetError):
            B.QuadraticStrongHierarchy(0)

    def test_generic_rejects_float_data(self):
        with pytest.raises(B.BinarySetError):
            B.GenericLinear(2, [[1.5, 0]], [1])

    def test_generic_rejects_shape_mismatch(self):
        with pytest.raises(B.BinarySetError):
            B.GenericLinear(2, [[1, 0, 0]], [1])

    def test_generic_coverage_violation(self):
        # z1 <= 0 forces the first coordinate to stay inactive.
        with pytest.raises(B.BinarySetError):
            B.GenericLinear(2, [[1, 0]], [0])

    def test_coverage_error_names_coordinate(self):
        with pytest.raises(B.BinarySetError, match="coordinate"):
            B.GenericLinear(3, [[0, 1, 1]], [0])


class TestEnumeration:
    def test_full_cube(self):
        assert B.FullCube(2).members() == ((0, 0), (0, 1), (1, 0), (1, 1))

    def test_cardinality_one(self):
        assert B.Cardinality(2, 1).members() == ((0, 0), (0, 1), (1, 0))

    def test_strong_hierarchy(self):
        assert B.StrongHierarchy(2).members() == ((0, 0), (1, 0), (1, 1))

    def test_dimension_guard(self):
        with pytest.raises(B.BinarySetError):
            B.QuadraticStrongHierarchy(26).members()

    def test_qsh_count(self):
        assert len(B.QuadraticStrongHierarchy(3).members()) == 95

    def test_members_match_membership(self):
        for zset in (B.Cardinality(4, 2), B.WeakHierarchy(4),
                     B.StrongHierarchy(4), B.QuadraticStrongHierarchy(2)):
            listed = set(zset.members())
            for z in itertools.product((0, 1), repeat=zset.d):
                assert (z in listed) == zset.membership(z)


class TestQuadraticLayout:
    def test_dimension(self):
        assert B.QuadraticStrongHierarchy(2).d == 5
        assert B.QuadraticStrongHierarchy(50).d == 1325

    def test_index_helpers(self):
        qsh = B.QuadraticStrongHierarchy(3)
        assert [qsh.main_index(k) for k in range(3)] == [0, 1, 2]
        assert [qsh.square_index(k) for k in range(3)] == [3, 4, 5]
        assert qsh.cross_index(0, 1) == 6
        assert qsh.cross_index(0, 2) == 7
        assert qsh.cross_index(1, 2) == 8
        with pytest.raises(B.BinarySetError):
            qsh.cross_index(1, 1)

    def test_square_requires_main(self):
        qsh = B.QuadraticStrongHierarchy(2)
        z = [0] * qsh.d
        z[qsh.square_index(0)] = 1
        assert not qsh.membership(z)
        z[qsh.main_index(0)] = 1
        assert qsh.membership(z)

    def test_cross_requires_both_mains(self):
        qsh = B.QuadraticStrongHierarchy(2)
        z = [0] * qsh.d
        z[qsh.cross_index(0, 1)] = 1
        z[qsh.main_index(0)] = 1
        assert not qsh.membership(z)
        z[qsh.main_index(1)] = 1
        assert qsh.membership(z)


class TestIndicatorGraph:
    def test_full_cube_complete(self):
        g = B.FullCube(3).indicator_graph()
        assert g.is_complete()
        assert g.components == ((0, 1, 2),)

    def test_cardinality_one_disconnected(self):
        g = B.Cardinality(3, 1).indicator_graph()
        assert g.edges == ()
        assert g.components == ((0,), (1,), (2,))

    def test_generic_two_blocks(self):
        # First two coordinates tied together, third never joins them.
        zset = B.GenericLinear(3, [[1, -1, 0], [-1, 1, 0], [1, 0, 1]], [0, 0, 1])
        g = zset.indicator_graph()
        assert g.edges == ((0, 1),)
        assert g.components == ((0, 1), (2,))

    @pytest.mark.parametrize("zset", [
        B.FullCube(4),
        B.Cardinality(4, 1),
        B.Cardinality(4, 2),
        B.Cardinality(4, 3),
        B.WeakHierarchy(4),
        B.StrongHierarchy(4),
        B.QuadraticStrongHierarchy(2),
    ])
    def test_closed_forms_match_brute_force(self, zset):
        assert zset.indicator_graph().edges == brute_edges(zset)

    def test_connectivity_helpers(self):
        assert B.FullCube(3).is_connected()
        assert not B.Cardinality(3, 1).is_connected()
        assert B.Cardinality(3, 2).has_pairwise_activation()
        assert not B.Cardinality(3, 1).has_pairwise_activation()
        assert B.Cardinality(1, 1).has_pairwise_activation()


class TestPartition:
    def test_matching_partition_accepted(self):
        blocks = B.validate_partition(B.Cardinality(2, 1), [[1], [0]])
        assert blocks == ((1,), (0,))

    def test_connected_set_rejects_split(self):
        with pytest.raises(B.BinarySetError):
            B.validate_partition(B.Cardinality(3, 2), [[0], [1, 2]])

    def test_disconnected_set_rejects_merge(self):
        with pytest.raises(B.BinarySetError):
            B.validate_partition(B.Cardinality(2, 1), [[0, 1]])

    def test_missing_coordinate(self):
        with pytest.raises(B.BinarySetError):
            B.validate_partition(B.Cardinality(2, 1), [[0]])

    def test_duplicate_coordinate(self):
        with pytest.raises(B.BinarySetError):
            B.validate_partition(B.Cardinality(2, 1), [[0], [0, 1]])


class TestActivationSets:
    def test_delta1_full_cube_one(self):
        assert B.delta1_members(B.FullCube(1)) == ((0, 0), (0, 1), (1, 1))

    def test_delta1_counts(self):
        zset = B.Cardinality(3, 2)
        mem = B.delta1_members(zset)
        nonzero = sum(1 for z in zset.members() if any(z))
        assert len(mem) == len(zset.members()) + nonzero

    def test_delta_p_cardinality_one(self):
        mem = B.delta_p_members(B.Cardinality(2, 1), [[0], [1]])
        assert mem == (
            (0, 0, 0, 0),
            (0, 0, 0, 1),
            (0, 0, 1, 0),
            (0, 1, 0, 1),
            (1, 0, 1, 0),
        )

    def test_delta_p_single_block_matches_delta1(self):
        zset = B.WeakHierarchy(3)
        dp = B.delta_p_members(zset, [[0, 1, 2]])
        assert dp == B.delta1_members(zset)

    def test_omega_strong_hierarchy_two(self):
        mem = B.omega_members(B.StrongHierarchy(2))
        assert len(mem) == 6
        assert (0, 1, 1, 1) in mem
        assert (1, 0, 1, 0) in mem
        assert (1, 1, 1, 1) not in mem

    def test_omega_respects_budget(self):
        for point in B.omega_members(B.FullCube(3)):
            w, z = point[:3], point[3:]
            assert sum(w) <= 1
            assert all(wi <= zi for wi, zi in zip(w, z))


class TestNonzeroHullForm:
    def test_strong_hierarchy_two(self):
        form = B.nonzero_hull_normal_form(B.StrongHierarchy(2))
        assert form.plus == ((1, 0),)
        assert (0, 1) in form.cone and (1, -1) in form.cone

    def test_cardinality_scaled_row(self):
        from persphull.rationals import QQ
        form = B.nonzero_hull_normal_form(B.Cardinality(3, 2))
        assert (QQ(1, 2), QQ(1, 2), QQ(1, 2)) in form.minus

    def test_unsupported_family(self):
        with pytest.raises(B.BinarySetError):
            B.nonzero_hull_normal_form(B.QuadraticStrongHierarchy(2))

    def test_rejects_zero_row(self):
        with pytest.raises(B.BinarySetError):
            B.NonzeroHullForm(2, ((0, 0),), (), ())

    def test_hull_form_contains_exactly_nonzero_members(self):
        # Every nonzero member satisfies the rows; the origin violates a
        # plus row; non-members violate some row.
        for zset in (B.FullCube(3), B.Cardinality(3, 1), B.Cardinality(3, 2),
                     B.WeakHierarchy(3), B.StrongHierarchy(3),
                     B.StrongHierarchy(4)):
            form = B.nonzero_hull_normal_form(zset)
            members = set(zset.members())
            for z in itertools.product((0, 1), repeat=zset.d):
                ok = (all(sum(c * v for c, v in zip(row, z)) >= 0
                          for row in form.cone)
                      and all(sum(c * v for c, v in zip(row, z)) >= 1
                              for row in form.plus)
                      and all(sum(c * v for c, v in zip(row, z)) <= 1
                              for row in form.minus))
                assert ok == (z in members and any(z)), (zset, z)


class TestSections:
    def test_block_section_restricts(self):
        zset = B.GenericLinear(3, [[1, 0, 1], [0, 1, 1]], [1, 1])
        assert B.block_section(zset, [0, 1]) == ((0, 0), (0, 1), (1, 0), (1, 1))
        assert B.block_section(zset, [2]) == ((0,), (1,))

    def test_detects_full_cube(self):
        form = B.detect_section_form(((0, 0), (0, 1), (1, 0), (1, 1)), 2)
        assert form.plus == ((1, 1),)

    def test_detects_cardinality(self):
        form = B.detect_section_form(((0, 0), (0, 1), (1, 0)), 2)
        assert form.minus == ((1, 1),)

    def test_unrecognized_section(self):
        with pytest.raises(B.BinarySetError):
            B.detect_section_form(((0, 0), (1, 1)), 2)

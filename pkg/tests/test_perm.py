import itertools
import math

import numpy as np
import pytest

from copularank.perm import (
    EnumerationCapError,
    IncompleteRanking,
    Permutation,
    SizeMismatchError,
    anti_identity,
    compose,
    enumerate_compatible,
    identity,
    induced_subranking,
    inverse,
    is_compatible,
    kendall_distance,
    random_compatible,
    rank_of,
    to_star_form,
)
from conftest import all_perms


class TestPermutation:
    def test_validation(self):
        with pytest.raises(ValueError):
            Permutation((1, 1, 2))
        with pytest.raises(ValueError):
            Permutation((0, 1))
        with pytest.raises(ValueError):
            Permutation(())

    def test_round_trips(self):
        p = Permutation((3, 1, 2))
        assert Permutation.parse(str(p)) == p
        assert Permutation.from_zero_based(p.zero_based()) == p

    def test_compose_identity(self):
        p = Permutation((2, 4, 1, 3))
        e = identity(4)
        assert compose(e, p) == p
        assert compose(p, e) == p

    def test_compose_mutual_inverses(self):
        assert compose(Permutation((2, 3, 1)), Permutation((3, 1, 2))) == identity(3)

    def test_compose_is_function_composition(self):
        p = Permutation((2, 3, 1))
        q = Permutation((1, 3, 2))
        r = compose(p, q)
        for i in range(1, 4):
            assert r.values[i - 1] == p.values[q.values[i - 1] - 1]

    def test_compose_size_mismatch(self):
        with pytest.raises(SizeMismatchError):
            compose(identity(3), identity(4))

    def test_anti_identity_is_involution(self):
        for n in range(1, 8):
            a = anti_identity(n)
            assert compose(a, a) == identity(n)
            assert inverse(a) == a

    def test_inverse(self):
        assert inverse(identity(5)) == identity(5)
        assert inverse(Permutation((3, 1, 2))) == Permutation((2, 3, 1))
        rng = np.random.default_rng(7)
        for _ in range(50):
            p = Permutation.from_zero_based(rng.permutation(rng.integers(1, 10)))
            assert compose(p, inverse(p)) == identity(len(p))
            assert compose(inverse(p), p) == identity(len(p))


class TestRankOf:
    def test_ascending_convention(self):
        assert rank_of((0.2, 0.9, 0.5)) == Permutation((1, 3, 2))

    def test_ties_collapse_to_identity(self):
        assert rank_of((0.5, 0.5)) == Permutation((1, 2))
        assert rank_of((1.0, 2.0, 1.0)) == identity(3)

    def test_composition_instance(self):
        # rank(g o sigma) = rank(g) o sigma
        sigma = Permutation((2, 1, 3))
        g = (0.2, 0.9, 0.5)
        g_sigma = tuple(g[sigma.values[i] - 1] for i in range(3))
        assert g_sigma == (0.9, 0.2, 0.5)
        assert rank_of(g_sigma) == compose(rank_of(g), sigma)
        assert rank_of(g_sigma) == Permutation((3, 1, 2))

    def test_composition_property_random(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 11))
            g = rng.random(n)
            sigma = Permutation.from_zero_based(rng.permutation(n))
            g_sigma = g[sigma.zero_based()]
            assert rank_of(g_sigma) == compose(rank_of(g), sigma)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            rank_of(())
        with pytest.raises(ValueError):
            rank_of((1.0, float("nan")))


class TestKendall:
    def test_zero_on_equal(self):
        assert kendall_distance(identity(5), identity(5)) == 0

    def test_maximal(self):
        assert kendall_distance(identity(4), anti_identity(4)) == 6

    def test_paper_pair(self):
        s = Permutation((1, 4, 2, 3, 5, 6, 7))
        t = Permutation((1, 3, 4, 2, 5, 6, 7))
        assert kendall_distance(s, t) == 2
        assert t == inverse(s)

    def test_symmetric(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 9))
            s = Permutation.from_zero_based(rng.permutation(n))
            t = Permutation.from_zero_based(rng.permutation(n))
            assert kendall_distance(s, t) == kendall_distance(t, s)
            assert 0 <= kendall_distance(s, t) <= n * (n - 1) // 2

    def test_reversal_complement_exhaustive_n4(self):
        # d(s, a o t) = C(n,2) - d(s, t)
        a = anti_identity(4)
        for s in all_perms(4):
            for t in all_perms(4):
                assert kendall_distance(s, compose(a, t)) == 6 - kendall_distance(s, t)

    def test_size_mismatch(self):
        with pytest.raises(SizeMismatchError):
            kendall_distance(identity(3), identity(4))


class TestInducedSubranking:
    def test_identity_subranking(self):
        assert induced_subranking(identity(5), (2, 4)) == Permutation((1, 2))

    def test_paper_membership_example(self):
        assert induced_subranking(Permutation((3, 4, 1, 2)), (1, 3, 4)) == Permutation((3, 1, 2))

    def test_derived_value_with_membership_oracle(self):
        # oracle: (2,4,1,3) must be in the enumerated compatible set of the result
        r = Permutation((2, 4, 1, 3))
        sub = induced_subranking(r, (2, 3))
        assert sub == Permutation((2, 1))
        inc = IncompleteRanking(sub, (2, 3), 4)
        assert r in enumerate_compatible(inc)

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            induced_subranking(identity(3), (1, 4))


class TestStarForm:
    def test_identity_expert_is_noop(self):
        r_y_star = Permutation((2, 1, 3))
        inc = to_star_form(identity(6), r_y_star, (2, 4, 5))
        assert inc.sub_perm == r_y_star
        assert inc.indices == (2, 4, 5)

    def test_derived_example(self):
        inc = to_star_form(Permutation((2, 4, 1, 3)), Permutation((1, 2)), (2, 3))
        assert inc.sub_perm == Permutation((2, 1))
        assert inc.indices == (1, 4)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_compatibility_equivalence_exhaustive(self, n):
        # r_y extends (r_y*, M) iff r_y o r_x^{-1} extends (s*, M*)
        index_sets = [
            idx
            for m in range(1, n)
            for idx in itertools.combinations(range(1, n + 1), m)
        ]
        perms = all_perms(n)
        for r_x in perms:
            for indices in index_sets:
                for r_y in perms:
                    r_y_star = induced_subranking(r_y, indices)
                    star = to_star_form(r_x, r_y_star, indices)
                    s = compose(r_y, inverse(r_x))
                    assert is_compatible(s, star)
                # a ranking not inducing r_y_star must map outside
                r_y = perms[0]
                r_y_star = induced_subranking(r_y, indices)
                star = to_star_form(r_x, r_y_star, indices)
                for r_other in perms:
                    expected = induced_subranking(r_other, indices) == r_y_star
                    got = is_compatible(compose(r_other, inverse(r_x)), star)
                    assert got == expected

    def test_size_errors(self):
        with pytest.raises(SizeMismatchError):
            to_star_form(identity(4), Permutation((1, 2)), (1, 2, 3))
        with pytest.raises(ValueError):
            to_star_form(identity(4), Permutation((1, 2, 3, 4)), (1, 2, 3, 4))


class TestIncompleteRanking:
    def test_validation(self):
        with pytest.raises(ValueError):
            IncompleteRanking(Permutation((1, 2)), (2, 1), 4)  # not increasing
        with pytest.raises(ValueError):
            IncompleteRanking(Permutation((1, 2, 3, 4)), (1, 2, 3, 4), 4)  # m == n
        with pytest.raises(SizeMismatchError):
            IncompleteRanking(Permutation((1, 2)), (1, 2, 3), 5)

    def test_serialization_round_trip(self, toy_inc):
        assert str(toy_inc) == "s*=2,1,3; M*=2,4,5; n=7"
        assert IncompleteRanking.parse(str(toy_inc)) == toy_inc


class TestCompatibility:
    def test_paper_examples(self):
        inc = IncompleteRanking(Permutation((3, 1, 2)), (1, 3, 4), 4)
        assert is_compatible(Permutation((3, 4, 1, 2)), inc)
        assert not is_compatible(Permutation((1, 2, 3, 4)), inc)

    def test_increasing_pattern(self):
        inc = IncompleteRanking(identity(2), (2, 4), 5)
        assert is_compatible(Permutation((3, 1, 4, 2, 5)), inc)

    def test_paper_enumeration(self):
        inc = IncompleteRanking(Permutation((3, 1, 2)), (1, 3, 4), 4)
        got = {p.values for p in enumerate_compatible(inc)}
        assert got == {(3, 4, 1, 2), (4, 3, 1, 2), (4, 2, 1, 3), (4, 1, 2, 3)}

    def test_enumeration_sorted_lexicographically(self, toy_inc):
        out = enumerate_compatible(toy_inc)
        assert [p.values for p in out] == sorted(p.values for p in out)

    def test_toy_cardinality(self, toy_inc):
        assert len(enumerate_compatible(toy_inc)) == math.factorial(7) // math.factorial(3)

    def test_single_ranked_object_n2(self):
        inc = IncompleteRanking(Permutation((1,)), (1,), 2)
        got = {p.values for p in enumerate_compatible(inc)}
        assert got == {(1, 2), (2, 1)}

    def test_cardinality_exhaustive(self):
        # |C(s*, M*)| = n!/m! for every instance with n <= 6
        for n in range(2, 7):
            for m in range(1, n):
                for indices in itertools.combinations(range(1, n + 1), m):
                    for sub in itertools.permutations(range(1, m + 1)):
                        inc = IncompleteRanking(Permutation(sub), indices, n)
                        got = enumerate_compatible(inc)
                        assert len(got) == math.factorial(n) // math.factorial(m)
                        assert len({p.values for p in got}) == len(got)
                        assert all(is_compatible(p, inc) for p in got)

    def test_cap(self, toy_inc):
        with pytest.raises(EnumerationCapError):
            enumerate_compatible(toy_inc, cap=10)

    @pytest.mark.parametrize("n", [3, 4, 5])
    def test_reversal_leaves_compatible_set_when_m_ge_2(self, n):
        # a o s is never compatible when m >= 2
        a = anti_identity(n)
        for m in range(2, n):
            for indices in itertools.combinations(range(1, n + 1), m):
                for sub in itertools.permutations(range(1, m + 1)):
                    inc = IncompleteRanking(Permutation(sub), indices, n)
                    for s in enumerate_compatible(inc):
                        assert not is_compatible(compose(a, s), inc)


class TestRandomCompatible:
    def test_always_compatible(self, toy_inc, rng):
        for _ in range(200):
            assert is_compatible(random_compatible(toy_inc, rng), toy_inc)

    def test_uniform_n2(self, rng):
        inc = IncompleteRanking(Permutation((1,)), (1,), 2)
        draws = 20000
        hits = sum(
            random_compatible(inc, rng) == Permutation((1, 2)) for _ in range(draws)
        )
        # 3-sigma binomial band around 1/2
        sigma = math.sqrt(draws * 0.25)
        assert abs(hits - draws / 2) < 3 * sigma

    def test_uniform_chi_square_paper_instance(self, rng):
        inc = IncompleteRanking(Permutation((3, 1, 2)), (1, 3, 4), 4)
        support = enumerate_compatible(inc)
        counts = {p: 0 for p in support}
        draws = 100_000
        for _ in range(draws):
            counts[random_compatible(inc, rng)] += 1
        expected = draws / len(support)
        chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
        # 3 dof; chi2 > 16.27 has p < 0.001
        assert chi2 < 16.27

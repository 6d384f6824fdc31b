import unittest
import sys
import os

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal
from hypothesis import given, settings, strategies as st

# Add the repository root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.core.prob_core import (HccHull, concatenate, concatenation_identity_check, cond_expect,
                                ess_extremum, extended_add, extended_scale, hcc_hull, is_local,
                                local_agreement_check, local_sup_reduction_check, locality_samples,
                                pairing)
from src.models.space import FiniteProbSpace, FPartition, Indicator, SigmaAlgebra
from src.utils.errors import BudgetExceededError, ValidationError


class TestFiniteProbSpace(unittest.TestCase):
    """Test cases for the finite probability space and its block algebras."""

    def test_uniform_space(self):
        space = FiniteProbSpace.uniform(4)
        self.assertEqual(space.atom_count, 4)
        assert_allclose(space.probs, [0.25] * 4)

    def test_probabilities_must_sum_to_one(self):
        with self.assertRaises(ValidationError) as ctx:
            FiniteProbSpace([0.3, 0.3, 0.3])
        self.assertIn("sum to 1", str(ctx.exception))

    def test_zero_probability_rejected(self):
        with self.assertRaises(ValidationError):
            FiniteProbSpace([0.5, 0.5, 0.0])

    def test_block_reference_out_of_range(self):
        space = FiniteProbSpace.uniform(4)
        with self.assertRaises(ValidationError) as ctx:
            SigmaAlgebra.from_blocks(space, [[0, 1], [2, 7]])
        self.assertIn("atom 7", str(ctx.exception))

    def test_overlapping_and_missing_blocks(self):
        space = FiniteProbSpace.uniform(4)
        with self.assertRaises(ValidationError):
            SigmaAlgebra.from_blocks(space, [[0, 1], [1, 2, 3]])
        with self.assertRaises(ValidationError):
            SigmaAlgebra.from_blocks(space, [[0, 1], [2]])

    def test_trivial_and_finest(self):
        space = FiniteProbSpace.uniform(3)
        self.assertEqual(SigmaAlgebra.trivial(space).block_count, 1)
        self.assertEqual(SigmaAlgebra.finest(space).block_count, 3)
        self.assertTrue(SigmaAlgebra.trivial(space).is_coarser_than(SigmaAlgebra.finest(space)))

    def test_contiguous_requires_equal_blocks(self):
        space = FiniteProbSpace.uniform(6)
        assert_array_equal(SigmaAlgebra.contiguous(space, 3).labels, [0, 0, 1, 1, 2, 2])
        with self.assertRaises(ValidationError):
            SigmaAlgebra.contiguous(space, 4)

    def test_measurable_indicator_enforced(self):
        algebra = SigmaAlgebra(FiniteProbSpace.uniform(4), [0, 0, 1, 1])
        with self.assertRaises(ValidationError):
            Indicator(np.array([True, False, False, False]), algebra)


class TestConditionalExpectation(unittest.TestCase):
    """Test cases for conditional expectation and the extended arithmetic."""

    def setUp(self):
        self.space = FiniteProbSpace.uniform(4)
        self.algebra = SigmaAlgebra(self.space, [0, 0, 1, 1])

    def test_cond_expect_blockwise_mean(self):
        assert_allclose(cond_expect([1, 2, 3, 4], self.algebra), [1.5, 1.5, 3.5, 3.5])

    def test_cond_expect_weighted(self):
        space = FiniteProbSpace([0.1, 0.3, 0.2, 0.4])
        algebra = SigmaAlgebra(space, [0, 0, 1, 1])
        assert_allclose(cond_expect([4, 0, 3, 0], algebra), [1.0, 1.0, 1.0, 1.0])

    def test_trivial_algebra_gives_expectation(self):
        trivial = SigmaAlgebra.trivial(self.space)
        assert_allclose(cond_expect([1, 2, 3, 4], trivial), [2.5] * 4)

    def test_pairing(self):
        assert_allclose(pairing([1, 2, 3, 4], [-1, -1, -2, 0], self.algebra), [-1.5, -1.5, -3.0, -3.0])

    def test_extended_conventions(self):
        assert_array_equal(extended_add([np.inf, 1.0], [-np.inf, 2.0]), [np.inf, 3.0])
        assert_array_equal(extended_scale([0.0, 2.0], [np.inf, -np.inf]), [0.0, -np.inf])

    def test_ess_extremum(self):
        vectors = [np.array([1.0, 5.0, 0.0, 2.0]), np.array([3.0, 1.0, -1.0, 2.5])]
        assert_array_equal(ess_extremum(vectors, 'sup'), [3.0, 5.0, 0.0, 2.5])
        assert_array_equal(ess_extremum(vectors, 'inf'), [1.0, 1.0, -1.0, 2.0])
        with self.assertRaises(ValidationError):
            ess_extremum([])

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(min_value=-100, max_value=100), min_size=4, max_size=4))
    def test_tower_property(self, values):
        """Conditioning on a coarser algebra after a finer one equals the coarser conditioning."""
        fine = SigmaAlgebra(self.space, [0, 0, 1, 2])
        coarse = self.algebra
        assert_allclose(cond_expect(cond_expect(values, fine), coarse), cond_expect(values, coarse),
                        atol=1e-9)


class TestGluing(unittest.TestCase):
    """Test cases for concatenation, hulls and locality."""

    def setUp(self):
        self.algebra = SigmaAlgebra(FiniteProbSpace.uniform(4), [0, 0, 1, 1])
        self.a = Indicator.from_blocks(self.algebra, [0])
        self.b = self.a.complement()
        self.rng = np.random.default_rng(11)

    def test_concatenate(self):
        glued = concatenate([(self.a, [1, 2, 3, 4]), (self.b, [9, 9, 7, 7])])
        assert_array_equal(glued, [1, 2, 7, 7])

    def test_concatenate_rejects_overlap(self):
        with self.assertRaises(ValidationError):
            concatenate([(self.a, [1, 2, 3, 4]), (Indicator.whole(self.algebra), [0, 0, 0, 0])])

    def test_partition_refinement(self):
        p = FPartition.blockwise(self.algebra)
        q = FPartition.from_grouping(self.algebra, [[0, 1]])
        cells = p.refine(q)
        self.assertEqual(len(cells), 2)

    def test_hull_size_and_membership(self):
        hull = hcc_hull([np.array([1.0, 2.0, 3.0, 4.0]), np.array([0.0, 0.0, 5.0, 5.0])], self.algebra)
        self.assertEqual(hull.size, 4)
        self.assertTrue(hull.contains([1, 2, 5, 5]))
        self.assertFalse(hull.contains([1, 0, 5, 5]))
        self.assertEqual(len(hull.elements()), 4)

    def test_hull_is_idempotent(self):
        generators = [self.rng.normal(size=4) for _ in range(3)]
        hull = hcc_hull(generators, self.algebra)
        again = hcc_hull(hull.elements(), self.algebra)
        self.assertTrue(hull.same_as(again))

    def test_hull_budget(self):
        generators = [self.rng.normal(size=4) for _ in range(3)]
        with self.assertRaises(BudgetExceededError):
            hcc_hull(generators, self.algebra).elements(budget=2)

    def test_empty_hull_rejected(self):
        with self.assertRaises(ValidationError):
            HccHull((), self.algebra)

    def test_locality_of_conditional_mean(self):
        f = lambda x: -cond_expect(x, self.algebra)
        result = is_local(f, locality_samples(self.algebra, self.rng, 50), name='mean')
        self.assertTrue(result.passed)

    def test_unconditional_mean_is_not_local(self):
        space = self.algebra.space
        f = lambda x: np.full(4, -space.expectation(x))
        samples = [(np.array([1.0, 1.0, 5.0, 5.0]), self.a)]
        result = is_local(f, samples, name='unconditional')
        self.assertFalse(result.passed)
        self.assertEqual(result.check_id, 'locality/unconditional')
        self.assertTrue(result.witnesses)

    def test_gluing_identity(self):
        f = lambda x: -cond_expect(x, self.algebra) ** 3
        result = concatenation_identity_check(f, self.algebra, self.rng, 30, name='cube')
        self.assertTrue(result.passed)
        self.assertEqual(result.check_id, 'gluing/cube')

    def test_local_sup_reduction(self):
        f = lambda x: np.repeat([np.max(x[:2]), np.min(x[2:])], 2)
        generators = [np.array([1.0, 0.5, -1.0, 0.0]), np.array([0.0, 1.0, 0.5, 2.0])]
        result = local_sup_reduction_check(f, generators, self.algebra, name='blockmax')
        self.assertTrue(result.passed)
        assert_allclose(result.details['sup'], [1.0, 1.0, 0.5, 0.5])

    def test_local_agreement(self):
        f = lambda x: -cond_expect(x, self.algebra)
        g = lambda x: -cond_expect(x, self.algebra) + 0.0
        generators = [np.array([1.0, 0.5, -1.0, 0.0]), np.array([0.0, 1.0, 0.5, 2.0])]
        self.assertTrue(local_agreement_check(f, g, generators, self.algebra).passed)


if __name__ == '__main__':
    unittest.main()

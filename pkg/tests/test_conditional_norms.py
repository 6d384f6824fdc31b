import unittest
import sys
import os

import numpy as np
from numpy.testing import assert_allclose

# Add the repository root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.core.bodies import ConvexBody
from src.core.conditional_norms import (ConditionalNorm, ball_membership, cond_norm, holder_check,
                                        p_monotonicity_check, random_distance, rnm_axiom_check)
from src.models.space import FiniteProbSpace, SigmaAlgebra
from src.utils.errors import ValidationError


class TestConditionalNorm(unittest.TestCase):
    """Test cases for conditional L^p norms."""

    def setUp(self):
        self.algebra = SigmaAlgebra(FiniteProbSpace.uniform(4), [0, 0, 1, 1])
        self.x = np.array([1.0, 2.0, 3.0, 4.0])
        self.rng = np.random.default_rng(3)

    def test_sup_norm(self):
        assert_allclose(cond_norm(self.x, ConditionalNorm(np.inf, self.algebra)), [2, 2, 4, 4])

    def test_one_norm(self):
        assert_allclose(cond_norm(-self.x, ConditionalNorm(1, self.algebra)), [1.5, 1.5, 3.5, 3.5])

    def test_two_norm(self):
        expected = [np.sqrt(2.5), np.sqrt(2.5), np.sqrt(12.5), np.sqrt(12.5)]
        assert_allclose(cond_norm(self.x, ConditionalNorm(2, self.algebra)), expected)

    def test_exponent_below_one_rejected(self):
        with self.assertRaises(ValidationError):
            ConditionalNorm(0.5, self.algebra)

    def test_dual_exponent(self):
        self.assertEqual(ConditionalNorm(1, self.algebra).dual_exponent, np.inf)
        self.assertEqual(ConditionalNorm(np.inf, self.algebra).dual_exponent, 1.0)
        self.assertAlmostEqual(ConditionalNorm(3, self.algebra).dual_exponent, 1.5)

    def test_module_norm_axioms(self):
        for p in (1, 2, 3.5, np.inf):
            results = rnm_axiom_check(ConditionalNorm(p, self.algebra), 100, self.rng)
            for result in results:
                self.assertTrue(result.passed, result.check_id)
        ids = [r.check_id for r in rnm_axiom_check(ConditionalNorm(2, self.algebra), 5, self.rng)]
        self.assertEqual(ids, ['norm/2/homogeneity', 'norm/2/triangle', 'norm/2/definiteness'])

    def test_holder_and_monotonicity(self):
        for p in (1, 2, 4, np.inf):
            self.assertTrue(holder_check(p, self.algebra, 100, self.rng).passed)
        self.assertTrue(p_monotonicity_check([1, 2, 4, np.inf], self.algebra, 100, self.rng).passed)


class TestNeighborhoods(unittest.TestCase):
    """Test cases for ball membership in both topologies."""

    def setUp(self):
        self.algebra = SigmaAlgebra(FiniteProbSpace.uniform(4), [0, 0, 1, 1])
        self.norm = ConditionalNorm(np.inf, self.algebra)
        self.x = np.array([1.0, 2.0, 3.0, 4.0])

    def test_tc_ball(self):
        self.assertFalse(ball_membership(self.x, 3.0, self.norm, 'Tc'))
        self.assertTrue(ball_membership(self.x, [2, 2, 4, 4], self.norm, 'Tc'))

    def test_tc_radius_must_be_measurable_and_positive(self):
        with self.assertRaises(ValidationError):
            ball_membership(self.x, [1, 2, 3, 4], self.norm, 'Tc')
        with self.assertRaises(ValidationError):
            ball_membership(self.x, 0.0, self.norm, 'Tc')

    def test_epslambda_ball(self):
        self.assertTrue(ball_membership(self.x, None, self.norm, 'epslambda', eps=3.0, lam=0.6))
        self.assertFalse(ball_membership(self.x, None, self.norm, 'epslambda', eps=3.0, lam=0.4))

    def test_epslambda_parameters(self):
        with self.assertRaises(ValidationError):
            ball_membership(self.x, None, self.norm, 'epslambda', eps=3.0, lam=1.0)
        with self.assertRaises(ValidationError):
            ball_membership(self.x, None, self.norm, 'other')


class TestRandomDistance(unittest.TestCase):
    """Test cases for the random distance to a convex body."""

    def setUp(self):
        self.algebra = SigmaAlgebra(FiniteProbSpace.uniform(4), [0, 0, 1, 1])
        self.box = ConvexBody.box(self.algebra, 0.0, 1.0, name='unit_box')

    def test_distance_sup_norm(self):
        d = random_distance([2.0, 0.5, 0.5, 0.5], self.box, ConditionalNorm(np.inf, self.algebra))
        assert_allclose(d, [1.0, 1.0, 0.0, 0.0])

    def test_distance_two_norm(self):
        d = random_distance([2.0, 0.5, 0.5, 0.5], self.box, ConditionalNorm(2, self.algebra))
        assert_allclose(d, [np.sqrt(0.5), np.sqrt(0.5), 0.0, 0.0])

    def test_distance_is_zero_inside(self):
        d = random_distance([0.2, 0.5, 1.0, 0.0], self.box, ConditionalNorm(1, self.algebra))
        assert_allclose(d, np.zeros(4))

    def test_algebra_mismatch(self):
        other = SigmaAlgebra(FiniteProbSpace.uniform(4), [0, 1, 1, 1])
        with self.assertRaises(ValidationError):
            random_distance(np.zeros(4), self.box, ConditionalNorm(2, other))


if __name__ == '__main__':
    unittest.main()

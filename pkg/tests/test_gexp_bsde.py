import unittest
import sys
import os

import numpy as np
from numpy.testing import assert_allclose

# Add the repository root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.core.gexp_bsde import (backward_solve, comparison_check, convergence_study, driver_check,
                                gexp_axiom_suite, lipschitz_constant, recursion_check, rho,
                                terminal_payoff, time_consistency_check, zero_driver_check)
from src.core.prob_core import cond_expect
from src.models.tree import BinaryTree, Driver
from src.utils.errors import PreconditionError, ValidationError


class TestBinaryTree(unittest.TestCase):
    """Test cases for the binary Brownian tree."""

    def test_leaves_and_filtration(self):
        tree = BinaryTree(3)
        self.assertEqual(tree.leaf_count, 8)
        self.assertAlmostEqual(tree.dt, 1 / 3)
        self.assertEqual(tree.algebra(0).block_count, 1)
        self.assertEqual(tree.algebra(2).block_count, 4)
        self.assertTrue(tree.algebra(1).is_coarser_than(tree.algebra(2)))

    def test_brownian_paths(self):
        tree = BinaryTree(2, horizon=2.0)
        assert_allclose(tree.brownian(2), [2, 0, 0, -2])
        assert_allclose(tree.increments(1), [1, 1, -1, -1])

    def test_invalid_trees(self):
        for steps in (0, 15, 2.5):
            with self.assertRaises(ValidationError):
                BinaryTree(steps)
        with self.assertRaises(ValidationError):
            BinaryTree(2, horizon=0.0)
        with self.assertRaises(ValidationError):
            BinaryTree(2).nodes_at(3)

    def test_named_drivers(self):
        self.assertEqual(Driver.named('zero').name, 'zero')
        self.assertEqual(Driver.named('abs', 0.5).name, 'abs(mu=0.5)')
        assert_allclose(Driver.named('smooth', 1.0)(0.0, [0.0, 1.0]), [0.0, np.sqrt(2) - 1])
        with self.assertRaises(ValidationError):
            Driver.named('quadratic', 1.0)
        with self.assertRaises(ValidationError):
            Driver.named('abs', -1.0)


class TestBackwardSolve(unittest.TestCase):
    """Test cases for the backward recursion."""

    def test_one_step_abs_driver(self):
        tree = BinaryTree(1)
        solution = backward_solve(tree, Driver.named('abs', 0.5), [-1.0, 1.0])
        assert_allclose(solution.Z[0], [-1.0])
        assert_allclose(solution.Y[0], [0.5])

    def test_one_step_zero_driver(self):
        tree = BinaryTree(1)
        solution = backward_solve(tree, Driver.named('zero'), [1.0, -1.0])
        assert_allclose(solution.Z[0], [1.0])
        assert_allclose(solution.Y[0], [0.0])

    def test_constant_terminal(self):
        tree = BinaryTree(4)
        solution = backward_solve(tree, Driver.named('smooth', 2.0), np.full(16, 3.5))
        for t in range(5):
            assert_allclose(solution.Y[t], 3.5)
        for t in range(4):
            assert_allclose(solution.Z[t], 0.0)

    def test_rho_is_conditional_expectation_for_zero_driver(self):
        tree = BinaryTree(3)
        x = np.arange(8, dtype=float)
        for t in range(4):
            assert_allclose(rho(tree, Driver.named('zero'), x, t), -cond_expect(x, tree.algebra(t)))

    def test_lipschitz_constant(self):
        tree = BinaryTree(4)
        driver = Driver.named('abs', 0.5)
        self.assertAlmostEqual(lipschitz_constant(tree, driver, 0), np.exp(10.0))
        self.assertAlmostEqual(lipschitz_constant(tree, driver, 4), 1.0)

    def test_payoffs(self):
        tree = BinaryTree(2)
        b = tree.brownian(2)
        assert_allclose(terminal_payoff(tree, 'call', 0.5), np.maximum(b - 0.5, 0))
        assert_allclose(terminal_payoff(tree, 'put'), np.maximum(-b, 0))
        assert_allclose(terminal_payoff(tree, 'digital'), [1, 0, 0, 0])
        with self.assertRaises(ValidationError):
            terminal_payoff(tree, 'asian')


class TestGexpChecks(unittest.TestCase):
    """Test cases for g-expectation verification."""

    def setUp(self):
        self.tree = BinaryTree(3)
        self.rng = np.random.default_rng(53)

    def test_convex_driver_suite_passes(self):
        results = gexp_axiom_suite(self.tree, Driver.named('abs', 0.5), 50, self.rng, t=1)
        for result in results:
            self.assertTrue(result.passed, result.check_id)
        ids = [r.check_id for r in results]
        self.assertIn('axioms/rho1-abs(mu=0.5)-N3/l2-lipschitz', ids)
        self.assertIn('gexp/abs(mu=0.5)/driver-convex', ids)

    def test_concave_driver_is_reported(self):
        results = {r.check_id: r for r in gexp_axiom_suite(self.tree, Driver.named('concave', 0.5), 50, self.rng)}
        self.assertFalse(results['gexp/concave(mu=0.5)/driver-convex'].passed)
        self.assertFalse(results['axioms/rho0-concave(mu=0.5)-N3/l0-convex'].passed)
        self.assertTrue(results['axioms/rho0-concave(mu=0.5)-N3/monotone'].passed)

    def test_driver_preconditions(self):
        shifted = Driver('shifted', 1.0, lambda t, z: 1.0 + 0.0 * z)
        with self.assertRaises(PreconditionError):
            gexp_axiom_suite(self.tree, shifted, 5, self.rng)
        steep = Driver('steep', 0.1, lambda t, z: np.abs(z))
        self.assertFalse(driver_check(self.tree, steep, self.rng)[1].passed)

    def test_dynamic_checks(self):
        driver = Driver.named('smooth', 1.0)
        self.assertTrue(comparison_check(self.tree, Driver.named('zero'), driver, 30, self.rng).passed)
        self.assertTrue(comparison_check(self.tree, driver, Driver.named('abs', 1.0), 30, self.rng).passed)
        self.assertTrue(time_consistency_check(self.tree, driver, 30, self.rng).passed)
        self.assertTrue(zero_driver_check(self.tree, 10, self.rng).passed)
        self.assertTrue(recursion_check(self.tree, driver, 10, self.rng).passed)

    def test_comparison_fails_in_reverse(self):
        result = comparison_check(self.tree, Driver.named('abs', 1.0), Driver.named('zero'), 10, self.rng)
        self.assertFalse(result.passed)
        self.assertEqual(result.check_id, 'gexp/comparison/abs(mu=1)<=zero/N3')

    def test_convergence_study(self):
        table = convergence_study(Driver.named('zero'), 'abs', [1, 2])
        self.assertEqual(list(table.columns), ['steps', 'dt', 'rho0', 'change'])
        assert_allclose(table['rho0'], [-1.0, -np.sqrt(0.5)])
        self.assertTrue(np.isnan(table['change'].iloc[0]))
        table = convergence_study(Driver.named('zero'), 'brownian', [1, 2, 4, 8])
        assert_allclose(table['rho0'], 0.0, atol=1e-12)


if __name__ == '__main__':
    unittest.main()

import unittest
import sys
import os

import numpy as np
from numpy.testing import assert_allclose
from hypothesis import given, settings, strategies as st

# Add the repository root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.core.prob_core import cond_expect
from src.core.risk_library import (avar_feasibility_check, avar_solution, axiom_check, evaluate,
                                   family_ordering_check, oracle_axiom_check, risk_oracle)
from src.models.risk import DualDensity, RiskFamily, RiskMeasureSpec, is_feasible_density
from src.models.space import FiniteProbSpace, SigmaAlgebra
from src.utils.errors import ValidationError

ENTROPIC_BLOCK_A = float(np.log(0.5 * (np.exp(-1.0) + np.exp(-2.0))))


class TestRiskEvaluation(unittest.TestCase):
    """Test cases for the shipped risk families."""

    def setUp(self):
        self.algebra = SigmaAlgebra(FiniteProbSpace.uniform(4), [0, 0, 1, 1])
        self.x = np.array([1.0, 2.0, 3.0, 4.0])

    def test_negative_conditional_mean(self):
        spec = RiskMeasureSpec(RiskFamily.NEG_COND_EXPECT, self.algebra)
        assert_allclose(evaluate(spec, self.x), [-1.5, -1.5, -3.5, -3.5])

    def test_entropic_values(self):
        spec = RiskMeasureSpec(RiskFamily.ENTROPIC, self.algebra, beta=1.0)
        expected = [ENTROPIC_BLOCK_A, ENTROPIC_BLOCK_A, ENTROPIC_BLOCK_A - 2, ENTROPIC_BLOCK_A - 2]
        assert_allclose(evaluate(spec, self.x), expected, rtol=1e-10)

    def test_entropic_large_beta_is_stable(self):
        spec = RiskMeasureSpec(RiskFamily.ENTROPIC, self.algebra, beta=1e4)
        value = evaluate(spec, self.x)
        self.assertTrue(np.all(np.isfinite(value)))
        assert_allclose(value, [-1, -1, -3, -3], atol=1e-3)

    def test_avar_values(self):
        spec = RiskMeasureSpec(RiskFamily.AVAR, self.algebra, lam=0.5)
        assert_allclose(evaluate(spec, self.x), [-1, -1, -3, -3])

    def test_avar_greedy_density(self):
        value, y_prime = avar_solution(self.x, np.full(4, 0.5), self.algebra)
        assert_allclose(y_prime, [2, 0, 2, 0])
        assert_allclose(value, [-1, -1, -3, -3])

    def test_avar_ties_fill_lower_atom_first(self):
        _, y_prime = avar_solution(np.array([1.0, 1.0, 0.0, 0.0]), np.full(4, 0.5), self.algebra)
        assert_allclose(y_prime, [2, 0, 2, 0])

    def test_avar_level_one_is_mean(self):
        spec = RiskMeasureSpec(RiskFamily.AVAR, self.algebra, lam=1.0)
        assert_allclose(evaluate(spec, self.x), -cond_expect(self.x, self.algebra))

    def test_worst_case(self):
        spec = RiskMeasureSpec(RiskFamily.WORST_CASE, self.algebra)
        assert_allclose(evaluate(spec, self.x), [-1, -1, -3, -3])

    def test_scenario_robust(self):
        measures = [[0.4, 0.1, 0.25, 0.25], [0.25, 0.25, 0.1, 0.4]]
        densities = [DualDensity.from_measure(self.algebra, q) for q in measures]
        spec = RiskMeasureSpec(RiskFamily.SCENARIO_ROBUST, self.algebra, densities=densities)
        assert_allclose(evaluate(spec, self.x), [-1.2, -1.2, -3.5, -3.5])

    def test_parameter_validation(self):
        with self.assertRaises(ValidationError):
            RiskMeasureSpec(RiskFamily.ENTROPIC, self.algebra, beta=0.0)
        with self.assertRaises(ValidationError):
            RiskMeasureSpec(RiskFamily.AVAR, self.algebra, lam=1.5)
        with self.assertRaises(ValidationError):
            RiskMeasureSpec(RiskFamily.AVAR, self.algebra, lam=[0.5, 0.2, 0.5, 0.5])
        with self.assertRaises(ValidationError):
            RiskMeasureSpec('not_a_family', self.algebra)
        with self.assertRaises(ValidationError):
            RiskMeasureSpec(RiskFamily.SCENARIO_ROBUST, self.algebra)

    def test_labels(self):
        self.assertEqual(RiskMeasureSpec(RiskFamily.ENTROPIC, self.algebra, beta=2).name, 'entropic(beta=2)')
        self.assertEqual(RiskMeasureSpec(RiskFamily.AVAR, self.algebra, lam=0.5).name, 'avar(lambda=0.5)')


class TestDualDensity(unittest.TestCase):
    """Test cases for dual densities."""

    def setUp(self):
        self.algebra = SigmaAlgebra(FiniteProbSpace.uniform(4), [0, 0, 1, 1])

    def test_uniform_density(self):
        density = DualDensity.uniform(self.algebra)
        assert_allclose(density.measure(), self.algebra.space.probs)

    def test_positive_density_rejected(self):
        with self.assertRaises(ValidationError):
            DualDensity(np.array([0.5, -2.5, -1.0, -1.0]), self.algebra)

    def test_wrong_block_mean_rejected(self):
        with self.assertRaises(ValidationError):
            DualDensity(np.array([-2.0, -1.0, -1.0, -1.0]), self.algebra)

    def test_feasibility_per_block(self):
        feasible = is_feasible_density([-2.0, 0.0, -0.5, -0.5], self.algebra)
        self.assertEqual(feasible.tolist(), [True, False])


class TestAxiomSuite(unittest.TestCase):
    """Test cases for randomized axiom verification."""

    def setUp(self):
        self.algebra = SigmaAlgebra(FiniteProbSpace([0.1, 0.2, 0.3, 0.15, 0.25]), [0, 0, 1, 1, 1])
        self.rng = np.random.default_rng(2024)

    def test_shipped_families_pass(self):
        specs = [
            RiskMeasureSpec(RiskFamily.NEG_COND_EXPECT, self.algebra),
            RiskMeasureSpec(RiskFamily.ENTROPIC, self.algebra, beta=1.5),
            RiskMeasureSpec(RiskFamily.AVAR, self.algebra, lam=[0.3, 0.3, 0.7, 0.7, 0.7]),
            RiskMeasureSpec(RiskFamily.WORST_CASE, self.algebra),
        ]
        for spec in specs:
            for result in axiom_check(spec, 100, self.rng):
                self.assertTrue(result.passed, result.check_id)

    def test_check_ids(self):
        spec = RiskMeasureSpec(RiskFamily.WORST_CASE, self.algebra)
        ids = [r.check_id for r in axiom_check(spec, 5, self.rng)]
        self.assertEqual(ids, ['axioms/worst_case/monotone', 'axioms/worst_case/cash-invariance',
                               'axioms/worst_case/local', 'axioms/worst_case/l0-convex',
                               'axioms/worst_case/convex', 'axioms/worst_case/convex-local-equivalence',
                               'axioms/worst_case/fatou'])

    def test_broken_square_fails_with_witness(self):
        spec = RiskMeasureSpec(RiskFamily.BROKEN_SQUARE, self.algebra)
        results = {r.check_id: r for r in axiom_check(spec, 100, self.rng)}
        self.assertFalse(results['axioms/broken_square/convex'].passed)
        self.assertFalse(results['axioms/broken_square/l0-convex'].passed)
        self.assertTrue(results['axioms/broken_square/local'].passed)
        witness = results['axioms/broken_square/convex'].witnesses[0]
        self.assertEqual(len(witness.rows), 5)
        self.assertTrue(any(row['gap'] > 0 for row in witness.rows))

    def test_unconditional_mean_is_not_local(self):
        spec = RiskMeasureSpec(RiskFamily.UNCONDITIONAL_MEAN, self.algebra)
        results = {r.check_id: r for r in axiom_check(spec, 100, self.rng)}
        self.assertFalse(results['axioms/unconditional_mean/local'].passed)
        self.assertTrue(results['axioms/unconditional_mean/convex'].passed)

    def test_oracle_suite_requires_trials(self):
        with self.assertRaises(ValidationError):
            oracle_axiom_check(lambda x: -x, self.algebra, 'id', 0, self.rng)

    def test_family_ordering(self):
        for result in family_ordering_check(self.algebra, [0.5, 1.0, 4.0], 100, self.rng):
            self.assertTrue(result.passed, result.check_id)

    def test_avar_feasibility(self):
        spec = RiskMeasureSpec(RiskFamily.AVAR, self.algebra, lam=[0.2, 0.2, 0.9, 0.9, 0.9])
        self.assertTrue(avar_feasibility_check(spec, 200, self.rng).passed)
        with self.assertRaises(ValidationError):
            avar_feasibility_check(RiskMeasureSpec(RiskFamily.WORST_CASE, self.algebra), 1, self.rng)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.floats(min_value=-50, max_value=50), min_size=5, max_size=5),
           st.floats(min_value=0.05, max_value=1.0))
    def test_avar_between_mean_and_worst_case(self, values, lam):
        x = np.array(values)
        avar = evaluate(RiskMeasureSpec(RiskFamily.AVAR, self.algebra, lam=lam), x)
        mean = evaluate(RiskMeasureSpec(RiskFamily.NEG_COND_EXPECT, self.algebra), x)
        worst = risk_oracle(RiskMeasureSpec(RiskFamily.WORST_CASE, self.algebra))(x)
        self.assertTrue(np.all(avar >= mean - 1e-9))
        self.assertTrue(np.all(avar <= worst + 1e-9))


if __name__ == '__main__':
    unittest.main()

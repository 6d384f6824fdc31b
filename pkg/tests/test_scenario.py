import json
import unittest
import sys
import os
import tempfile

import numpy as np
from numpy.testing import assert_allclose

# Add the repository root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.models.risk import RiskFamily
from src.models.scenario import COMMANDS, Scenario
from src.utils.errors import ValidationError
from src.utils.validators import ScenarioValidator, load_scenario, parse_scenario

SCENARIOS = os.path.join(os.path.dirname(__file__), '..', 'scenarios')


def document(**overrides):
    doc = {
        'schema': 'rca-scenario/1',
        'name': 'small',
        'space': {'uniform': 4},
        'algebra': {'labels': [0, 0, 1, 1]},
    }
    doc.update(overrides)
    return doc


class TestScenarioLoading(unittest.TestCase):
    """Test cases for loading the bundled scenario fixtures."""

    def test_load_f1(self):
        scenario = load_scenario(os.path.join(SCENARIOS, 'f1.json'))
        self.assertEqual(scenario.name, 'F1')
        self.assertEqual(scenario.algebra.block_count, 2)
        self.assertEqual(scenario.norm_p, np.inf)
        self.assertEqual(scenario.seed, 7)
        self.assertEqual(scenario.suites, COMMANDS)
        self.assertEqual(sorted(scenario.risks), ['avar', 'ent', 'neg', 'robust', 'worst'])
        self.assertEqual(scenario.risks['ent'].family, RiskFamily.ENTROPIC)
        self.assertEqual(scenario.risks['ent'].beta, 1.0)
        self.assertEqual(scenario.risks['ent'].name, 'ent')
        assert_allclose(scenario.risks['avar'].lam, 0.5)
        assert_allclose(scenario.risks['robust'].densities[0].y, [-1.6, -0.4, -1.0, -1.0])
        self.assertTrue(scenario.bodies['cross'].claims_balanced)
        self.assertFalse(scenario.bodies['unit_box'].claims_balanced)
        self.assertEqual(scenario.trees['abs4'].study, (1, 2, 4, 8))
        self.assertEqual(scenario.trees['abs4'].driver.name, 'abs(mu=0.5)')

    def test_all_fixtures_load(self):
        for filename in sorted(os.listdir(SCENARIOS)):
            if filename.endswith('.json'):
                self.assertIsInstance(load_scenario(os.path.join(SCENARIOS, filename)), Scenario)

    def test_convex_risks_exclude_controls(self):
        scenario = load_scenario(os.path.join(SCENARIOS, 'broken_control.json'))
        self.assertEqual(scenario.convex_risks(), {})

    def test_missing_file(self):
        with self.assertRaises(ValidationError) as ctx:
            load_scenario(os.path.join(SCENARIOS, 'does_not_exist.json'))
        self.assertIn('cannot read scenario', str(ctx.exception))

    def test_load_from_temporary_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'tmp_scenario.json')
            with open(path, 'w', encoding='utf-8') as fh:
                json.dump(document(vectors={'x': 1.5}), fh)
            scenario = load_scenario(path)
        assert_allclose(scenario.vector('x'), [1.5] * 4)
        with self.assertRaises(ValidationError):
            scenario.vector('y')


class TestScenarioValidation(unittest.TestCase):
    """Test cases for scenario input errors."""

    def assertRejected(self, doc, fragment):
        with self.assertRaises(ValidationError) as ctx:
            ScenarioValidator.validate_scenario(doc)
        self.assertIn(fragment, str(ctx.exception))
        return str(ctx.exception)

    def test_probabilities_must_sum_to_one(self):
        message = self.assertRejected(document(space={'probs': [0.3, 0.3, 0.2, 0.1]}), 'sum to 1')
        self.assertTrue(message.startswith('space.probs'))

    def test_block_references_unknown_atom(self):
        message = self.assertRejected(document(algebra={'blocks': [[0, 1], [2, 7]]}), 'atom 7')
        self.assertTrue(message.startswith('algebra'))

    def test_invalid_json_position(self):
        with self.assertRaises(ValidationError) as ctx:
            parse_scenario('{\n  "schema": "rca-scenario/1",\n  "space": {"uniform": 4,}\n}', 'broken')
        self.assertIn('line 3', str(ctx.exception))
        self.assertIn('column', str(ctx.exception))

    def test_schema_required(self):
        self.assertRejected(document(schema='rca-scenario/0'), 'schema')

    def test_vector_length(self):
        self.assertRejected(document(vectors={'x': [1, 2, 3]}), 'vectors.x')

    def test_risk_text(self):
        scenario = ScenarioValidator.validate_scenario(document(risks={'e': 'entropic(beta=2.5)'}))
        self.assertEqual(scenario.risks['e'].beta, 2.5)
        self.assertRejected(document(risks={'e': 'entropic(beta=x)'}), 'risks.e')
        self.assertRejected(document(risks={'e': 'mystery'}), 'risks.e.family')
        self.assertRejected(document(risks={'e': 'entropic(beta=-1)'}), 'beta > 0')

    def test_non_measurable_avar_level(self):
        self.assertRejected(document(risks={'a': {'family': 'avar', 'lambda': [0.5, 0.2, 0.5, 0.5]}}), 'risks.a')

    def test_infeasible_measure(self):
        doc = document(risks={'r': {'family': 'scenario_robust', 'measures': [[0.5, 0.5, 0.0, 0.0]]}})
        self.assertRejected(doc, 'risks.r')

    def test_body_errors(self):
        self.assertRejected(document(bodies={'b': {'type': 'sphere'}}), 'bodies.b.type')
        self.assertRejected(document(bodies={'b': {'type': 'box', 'lower': 1, 'upper': 0}}), 'bodies.b')
        self.assertRejected(document(bodies={'b': {'type': 'generators', 'set': 'missing'}}), 'bodies.b.set')
        self.assertRejected(document(bodies={'b': {'type': 'block_points', 'points': [[[0, 0]]]}}),
                            'bodies.b.points')

    def test_generator_body_by_reference(self):
        doc = document(generator_sets={'A': [[1, 0, 0, 0], [0, 1, 1, 0]]},
                       bodies={'hull': {'type': 'generators', 'set': 'A'}})
        scenario = ScenarioValidator.validate_scenario(doc)
        self.assertTrue(scenario.bodies['hull'].contains([0.5, 0.5, 0.5, 0.0]))

    def test_tree_errors(self):
        self.assertRejected(document(trees={'t': {'steps': 0}}), 'trees.t.steps')
        self.assertRejected(document(trees={'t': {'steps': 2, 'time': 3}}), 'trees.t.time')
        self.assertRejected(document(trees={'t': {'steps': 2, 'payoff': 'asian'}}), 'trees.t.payoff')
        self.assertRejected(document(trees={'t': {'steps': 2, 'driver': 'cubic'}}), 'trees.t')
        self.assertRejected(document(trees={'t': {'steps': 20}}), 'trees.t')

    def test_norm_and_tolerances(self):
        self.assertRejected(document(norm={'p': 0.5}), 'norm.p')
        self.assertRejected(document(tolerances={'oracle': -1}), 'tolerances.oracle')
        self.assertRejected(document(tolerances={'guess': 1e-3}), 'tolerances.guess')
        scenario = ScenarioValidator.validate_scenario(document(norm={'p': 2}, tolerances={'oracle': 1e-8}))
        self.assertEqual(scenario.norm_p, 2.0)
        self.assertEqual(scenario.tolerances, {'oracle': 1e-8})

    def test_suites_and_counts(self):
        self.assertRejected(document(suites=['verify-axioms', 'dance']), 'dance')
        self.assertRejected(document(trials=0), 'trials')
        self.assertRejected(document(seed=-1), 'seed')


if __name__ == '__main__':
    unittest.main()

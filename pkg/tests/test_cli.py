import json
import unittest
import sys
import os
import tempfile
from unittest.mock import patch

import numpy as np
from click.testing import CliRunner
from numpy.testing import assert_allclose

# Add the repository root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from app import main
from src.cli.commands import ALL_COMMANDS, run
from src.models.report import WITNESS_COLUMNS
from src.utils.config import get_config, reset_config
from src.utils.validators import load_scenario

SCENARIOS = os.path.join(os.path.dirname(__file__), '..', 'scenarios')


def scenario_path(name):
    return os.path.join(SCENARIOS, name)


class TestCommandLine(unittest.TestCase):
    """Test cases for the rca-verify entry point."""

    def setUp(self):
        self.runner = CliRunner()

    def invoke(self, *args):
        return self.runner.invoke(main, list(args))

    def test_help_lists_commands(self):
        result = self.invoke('--help')
        self.assertEqual(result.exit_code, 0)
        self.assertIn('--scenario', result.output)

    def test_unknown_command_is_usage_error(self):
        result = self.invoke('dance', '--scenario', scenario_path('f1.json'))
        self.assertEqual(result.exit_code, 2)

    def test_missing_scenario_file(self):
        result = self.invoke('verify-axioms', '--scenario', scenario_path('nowhere.json'))
        self.assertEqual(result.exit_code, 2)
        self.assertIn('cannot read scenario', result.output)

    def test_invalid_scenario(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'bad.json')
            with open(path, 'w', encoding='utf-8') as fh:
                json.dump({'schema': 'rca-scenario/1', 'space': {'probs': [0.5, 0.4]}}, fh)
            result = self.invoke('verify-axioms', '--scenario', path)
        self.assertEqual(result.exit_code, 2)
        self.assertIn('space.probs', result.output)

    def test_broken_control_fails(self):
        result = self.invoke('verify-axioms', '--scenario', scenario_path('broken_control.json'),
                             '--trials', '50')
        self.assertEqual(result.exit_code, 1)
        report = json.loads(result.stdout)
        self.assertEqual(report['status'], 'fail')
        failed = {r['check_id'] for r in report['records'] if r['status'] == 'fail'}
        self.assertIn('axioms/broken/convex', failed)
        self.assertNotIn('axioms/broken/local', failed)

    def test_nonlocal_control_fails_locality(self):
        result = self.invoke('verify-axioms', '--scenario', scenario_path('nonlocal_control.json'),
                             '--trials', '50')
        self.assertEqual(result.exit_code, 1)
        report = json.loads(result.stdout)
        failed = {r['check_id'] for r in report['records'] if r['status'] == 'fail'}
        self.assertIn('axioms/mean/local', failed)

    def test_f1_verify_axioms_passes(self):
        result = self.invoke('verify-axioms', '--scenario', scenario_path('f1.json'), '--trials', '30')
        self.assertEqual(result.exit_code, 0, result.output)
        report = json.loads(result.stdout)
        self.assertEqual(report['seed'], 7)
        values = report['outputs']['verify-axioms']['risk_values']
        self.assertAlmostEqual(values['avar']['x'][0], -1.0)
        self.assertAlmostEqual(values['ent']['x'][0], np.log(0.5 * (np.exp(-1.0) + np.exp(-2.0))), places=9)
        norms = report['outputs']['verify-axioms']['cond_norms']
        assert_allclose(norms['x']['value'], [2.0, 2.0, 4.0, 4.0])
        self.assertFalse(norms['x']['in_unit_ball'])

    def test_csv_columns(self):
        result = self.invoke('verify-axioms', '--scenario', scenario_path('broken_control.json'),
                             '--trials', '20', '--format', 'csv')
        self.assertEqual(result.exit_code, 1)
        header = result.stdout.splitlines()[0]
        self.assertEqual(header.split(','), ['atom', 'block', 'lhs', 'rhs', 'gap'])
        self.assertEqual(header.split(','), WITNESS_COLUMNS)
        self.assertGreater(len(result.stdout.splitlines()), 1)

    def test_output_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = os.path.join(tmp, 'report.json')
            result = self.invoke('separate', '--scenario', scenario_path('f1.json'), '--trials', '10',
                                 '--output', out)
            self.assertEqual(result.exit_code, 0, result.output)
            with open(out, encoding='utf-8') as fh:
                report = json.load(fh)
        certificate = report['outputs']['separate']['unit_box']['outside']
        self.assertEqual(certificate['strict_set'], [0, 1])
        assert_allclose(certificate['distance'], [1.0, 1.0, 0.0, 0.0], atol=1e-9)

    def test_report_is_deterministic(self):
        args = ('verify-axioms', '--scenario', scenario_path('f1.json'), '--trials', '20', '--seed', '42')
        first = self.invoke(*args)
        second = self.invoke(*args, '--workers', '3')
        self.assertEqual(first.exit_code, 0)
        self.assertEqual(first.stdout, second.stdout)

    def test_concave_driver_fails(self):
        result = self.invoke('gexp', '--scenario', scenario_path('concave_driver.json'), '--trials', '30')
        self.assertEqual(result.exit_code, 1)
        report = json.loads(result.stdout)
        failed = {r['check_id'] for r in report['records'] if r['status'] == 'fail'}
        self.assertIn('gexp/concave(mu=0.5)/driver-convex', failed)

    def test_timing_flag(self):
        result = self.invoke('polar', '--scenario', scenario_path('f1.json'), '--trials', '20', '--timing')
        self.assertEqual(result.exit_code, 0, result.output)
        report = json.loads(result.stdout)
        self.assertTrue(all('elapsed_s' in r for r in report['records']))


class TestRunDispatch(unittest.TestCase):
    """Test cases for command dispatch without the click layer."""

    def setUp(self):
        self.scenario = load_scenario(scenario_path('f1.json'))

    def test_unknown_command(self):
        report = run('dance', self.scenario)
        self.assertEqual(report.exit_code, 2)
        self.assertIn('unknown command', report.error)

    def test_overrides_do_not_leak(self):
        before = get_config().tolerance.oracle
        report = run('bipolar', self.scenario, {'trials': 50, 'tol': 1e-7})
        self.assertEqual(report.exit_code, 0)
        self.assertEqual(report.outputs['config']['tolerance']['oracle'], 1e-7)
        self.assertEqual(get_config().tolerance.oracle, before)

    def test_budget_error_exit_code(self):
        report = run('bipolar', self.scenario, {'trials': 10, 'budget': 1})
        self.assertEqual(report.exit_code, 3)
        self.assertIsNotNone(report.error)

    def test_gauge_skips_unflagged_bodies(self):
        report = run('gauge', self.scenario, {'trials': 15})
        self.assertEqual(report.exit_code, 0)
        self.assertEqual(sorted(report.outputs['gauge']), ['ball', 'cross'])
        assert_allclose(report.outputs['gauge']['ball']['x'], [2.0, 2.0, 4.0, 4.0], rtol=1e-9)

    def test_gexp_outputs(self):
        report = run('gexp', self.scenario, {'trials': 20})
        self.assertEqual(report.exit_code, 0)
        outputs = report.outputs['gexp']
        self.assertEqual([row['steps'] for row in outputs['abs4']['convergence']], [1, 2, 4, 8])
        self.assertEqual(outputs['smooth1']['tree']['steps'], 1)

    def test_every_command_is_dispatchable(self):
        self.assertEqual(set(ALL_COMMANDS) - {'suite-all'}, set(self.scenario.suites))


class TestWorkerCap(unittest.TestCase):
    """Test cases for RCA_WORKERS capping the --workers flag."""

    def setUp(self):
        self.scenario = load_scenario(scenario_path('f1.json'))
        self.addCleanup(reset_config)

    def run_with_environment(self, cap, workers):
        with patch.dict(os.environ, {'RCA_WORKERS': str(cap)}):
            reset_config()
        with patch('src.cli.commands.ThreadPoolExecutor') as pool:
            run('polar', self.scenario, {'trials': 5, 'workers': workers})
        return pool

    def test_flag_above_cap_is_clamped(self):
        pool = self.run_with_environment(2, 4)
        pool.assert_called_once_with(max_workers=2)

    def test_cap_of_one_runs_serially(self):
        pool = self.run_with_environment(1, 4)
        pool.assert_not_called()

    def test_flag_below_cap_is_kept(self):
        pool = self.run_with_environment(8, 3)
        pool.assert_called_once_with(max_workers=3)


if __name__ == '__main__':
    unittest.main()

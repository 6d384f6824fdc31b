import unittest
import sys
import os
from unittest.mock import patch

# Add the repository root to path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.utils.config import Config
from src.utils.errors import (BudgetExceededError, ConvergenceError, PreconditionError, RCAError,
                              SolverError, ValidationError)
from src.utils.performance import TimingMetric, TimingMonitor


class TestConfig(unittest.TestCase):
    """Test cases for configuration loading and overrides."""

    def test_defaults(self):
        config = Config()
        self.assertEqual(config.tolerance.oracle, 1e-9)
        self.assertEqual(config.tolerance.optimization, 1e-6)
        self.assertTrue(config.validate())

    @patch.dict(os.environ, {'RCA_WORKERS': '4', 'RCA_TRIALS': '25', 'RCA_SEED': '9'})
    def test_environment(self):
        config = Config()
        self.assertEqual(config.run.workers, 4)
        self.assertEqual(config.run.default_trials, 25)
        self.assertEqual(config.run.default_seed, 9)

    @patch.dict(os.environ, {'RCA_WORKERS': '0'})
    def test_invalid_environment(self):
        self.assertFalse(Config().validate())

    def test_overrides_are_restored(self):
        config = Config()
        with config.overridden({'optimization': 1e-4}, tol=1e-7, budget=50, workers=3) as cfg:
            self.assertEqual(cfg.tolerance.oracle, 1e-7)
            self.assertEqual(cfg.tolerance.optimization, 1e-4)
            self.assertEqual(cfg.solver.hull_budget, 50)
            self.assertEqual(cfg.run.workers, 3)
        self.assertEqual(config.tolerance.oracle, 1e-9)
        self.assertEqual(config.tolerance.optimization, 1e-6)
        self.assertEqual(config.solver.hull_budget, Config().solver.hull_budget)

    def test_overrides_restored_after_error(self):
        config = Config()
        with self.assertRaises(BudgetExceededError):
            with config.overridden(tol=1e-3):
                raise BudgetExceededError("too many")
        self.assertEqual(config.tolerance.oracle, 1e-9)

    @patch.dict(os.environ, {'RCA_WORKERS': '2'})
    def test_workers_flag_is_capped_by_environment(self):
        config = Config()
        self.assertEqual(config.run.max_workers, 2)
        with config.overridden(workers=8) as cfg:
            self.assertEqual(cfg.run.workers, 2)
        with config.overridden(workers=1) as cfg:
            self.assertEqual(cfg.run.workers, 1)
        self.assertEqual(config.run.workers, 2)

    def test_workers_flag_uncapped_without_environment(self):
        with patch.dict(os.environ):
            os.environ.pop('RCA_WORKERS', None)
            config = Config()
        self.assertIsNone(config.run.max_workers)
        with config.overridden(workers=6) as cfg:
            self.assertEqual(cfg.run.workers, 6)

    def test_budget_caps_iteration_limits(self):
        config = Config()
        with config.overridden(budget=7) as cfg:
            self.assertEqual(cfg.solver.projection_max_iter, 7)
            self.assertEqual(cfg.solver.generic_p_max_iter, 7)
        self.assertEqual(config.solver.projection_max_iter, 10_000)

    def test_snapshot_excludes_workers(self):
        snapshot = Config().snapshot()
        self.assertEqual(sorted(snapshot), ['run', 'solver', 'tolerance'])
        self.assertNotIn('workers', snapshot['run'])


class TestErrors(unittest.TestCase):
    """Test cases for the exit code of each error class."""

    def test_exit_codes(self):
        self.assertEqual(ValidationError.exit_code, 2)
        self.assertEqual(PreconditionError.exit_code, 1)
        for cls in (BudgetExceededError, ConvergenceError, SolverError):
            self.assertEqual(cls.exit_code, 3)
            self.assertTrue(issubclass(cls, RCAError))


class TestTimingMonitor(unittest.TestCase):
    """Test cases for the timing monitor."""

    def setUp(self):
        self.monitor = TimingMonitor(slow_threshold=0.5)

    def test_measure_records(self):
        with self.monitor.measure('job') as timer:
            pass
        self.assertGreaterEqual(timer.elapsed, 0.0)
        stats = self.monitor.get_statistics('job')
        self.assertEqual(stats['count'], 1)
        self.assertEqual(stats['errors'], 0)

    def test_measure_records_errors(self):
        with self.assertRaises(ValueError):
            with self.monitor.measure('bad'):
                raise ValueError("boom")
        self.assertEqual(self.monitor.get_statistics('bad')['errors'], 1)
        self.assertEqual(self.monitor.summary()['errors'], 1)

    def test_decorator(self):
        @self.monitor.monitor('double')
        def double(x):
            return 2 * x

        self.assertEqual(double(4), 8)
        self.assertEqual(self.monitor.get_statistics('double')['count'], 1)

    def test_slow_calls_and_summary(self):
        self.monitor.record(TimingMetric('fast', 0.1, True))
        self.monitor.record(TimingMetric('slow', 2.0, True))
        self.assertEqual([m.name for m in self.monitor.get_slow_calls()], ['slow'])
        self.assertEqual(len(self.monitor.get_slow_calls(threshold=0.05)), 2)
        summary = self.monitor.summary()
        self.assertEqual(summary['total_calls'], 2)
        self.assertAlmostEqual(summary['total_time'], 2.1)
        self.assertEqual(summary['slowest'][0]['name'], 'slow')

    def test_clear_history(self):
        self.monitor.record(TimingMetric('job', 0.1, True))
        self.monitor.clear_history()
        self.assertEqual(self.monitor.summary()['total_calls'], 0)


if __name__ == '__main__':
    unittest.main()

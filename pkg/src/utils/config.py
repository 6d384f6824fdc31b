import os
import logging
from contextlib import contextmanager
from typing import Dict, Any, Iterator, Optional
from dataclasses import dataclass, asdict, replace


@dataclass
class ToleranceConfig:
    """Numeric tolerance hierarchy."""
    linear: float = 1e-12          # linear-algebraic identities
    oracle: float = 1e-9           # oracle comparisons
    optimization: float = 1e-6     # optimization-derived quantities
    zero_distance: float = 1e-9    # distances below this are reported as 0
    feasibility: float = 1e-9      # dual density feasibility


@dataclass
class SolverConfig:
    """Budgets and step sizes for the numerical procedures."""
    conjugate_radius_base: float = 8.0
    conjugate_refinements: int = 3
    conjugate_grid_points: int = 17
    conjugate_max_expansions: int = 40
    divergence_threshold: float = 1e6
    dual_iterations: int = 1000
    dual_step: float = 0.1
    dual_restarts: int = 2
    dual_patience: int = 3
    projection_max_iter: int = 10_000
    generic_p_max_iter: int = 100_000
    hull_budget: int = 1_000_000
    bisection_ceiling: float = 1e9
    bisection_width: float = 1e-11


@dataclass
class RunConfig:
    """Configuration for verification runs."""
    workers: int = 1
    max_workers: Optional[int] = None  # RCA_WORKERS, when set
    default_trials: int = 1000
    default_seed: int = 0
    subgradient_samples: int = 100


@dataclass
class LoggingConfig:
    """Configuration for logging."""
    level: str = "WARNING"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    file: Optional[str] = None


class Config:
    """Main configuration class that manages all toolkit settings."""

    def __init__(self):
        self.tolerance = ToleranceConfig()
        self.solver = SolverConfig()
        self.run = RunConfig()
        self.logging = LoggingConfig()
        self._load_from_environment()
        self._setup_logging()

    def _load_from_environment(self):
        """Load configuration from environment variables."""
        if 'RCA_WORKERS' in os.environ:
            self.run.workers = self.run.max_workers = int(os.environ['RCA_WORKERS'])
        self.run.default_trials = int(os.environ.get('RCA_TRIALS', self.run.default_trials))
        self.run.default_seed = int(os.environ.get('RCA_SEED', self.run.default_seed))
        self.solver.hull_budget = int(os.environ.get('RCA_HULL_BUDGET', self.solver.hull_budget))

        self.logging.level = os.environ.get('RCA_LOG_LEVEL', self.logging.level)
        self.logging.file = os.environ.get('RCA_LOG_FILE', self.logging.file)

    def _setup_logging(self):
        """Setup logging configuration."""
        handlers = [logging.StreamHandler()]

        if self.logging.file:
            try:
                handlers.append(logging.FileHandler(self.logging.file))
            except Exception as e:
                logging.warning(f"Could not setup file logging: {e}")

        logging.basicConfig(
            level=getattr(logging, self.logging.level.upper(), logging.WARNING),
            format=self.logging.format,
            handlers=handlers
        )

    def validate(self) -> bool:
        """Validate configuration values."""
        errors = []

        if self.run.workers < 1:
            errors.append("RCA_WORKERS must be at least 1")

        if self.run.default_trials < 1:
            errors.append("RCA_TRIALS must be at least 1")

        if self.solver.hull_budget < 1:
            errors.append("RCA_HULL_BUDGET must be positive")

        if not (0 < self.tolerance.oracle < 1):
            errors.append("oracle tolerance must be between 0 and 1")

        if self.tolerance.linear > self.tolerance.oracle:
            errors.append("linear tolerance must not exceed oracle tolerance")

        if errors:
            for error in errors:
                logging.error(f"Configuration error: {error}")
            return False

        return True

    def apply_overrides(self, tol: Optional[float] = None, budget: Optional[int] = None,
                        seed: Optional[int] = None, workers: Optional[int] = None):
        """Apply command-line overrides on top of the environment settings."""
        if tol is not None:
            self.tolerance.oracle = float(tol)
        if budget is not None:
            self.solver.hull_budget = int(budget)
            self.solver.projection_max_iter = int(budget)
            self.solver.generic_p_max_iter = int(budget)
        if seed is not None:
            self.run.default_seed = int(seed)
        if workers is not None:
            cap = self.run.max_workers
            self.run.workers = int(workers) if cap is None else min(int(workers), cap)

    @contextmanager
    def overridden(self, tolerances: Optional[Dict[str, float]] = None, **overrides) -> Iterator['Config']:
        """Apply scenario tolerances and ``apply_overrides`` arguments for the duration of a run."""
        saved = (replace(self.tolerance), replace(self.solver), replace(self.run))
        try:
            for key, value in (tolerances or {}).items():
                setattr(self.tolerance, key, float(value))
            self.apply_overrides(**overrides)
            yield self
        finally:
            self.tolerance, self.solver, self.run = saved

    def snapshot(self) -> Dict[str, Any]:
        """Get the effective configuration as a dictionary (logged with each report)."""
        return {
            'tolerance': asdict(self.tolerance),
            'solver': asdict(self.solver),
            'run': {'default_trials': self.run.default_trials, 'default_seed': self.run.default_seed},
        }


# Global configuration instance
config = Config()


def get_config() -> Config:
    """Get the global configuration instance."""
    return config


def reset_config() -> Config:
    """Rebuild the global configuration from the environment (used by tests)."""
    global config
    config = Config()
    return config

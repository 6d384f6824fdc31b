"""The validated scenario a command runs against."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..utils.errors import ValidationError
from .risk import RiskMeasureSpec
from .space import FiniteProbSpace, SigmaAlgebra
from .tree import BinaryTree, Driver

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 'rca-scenario/1'

COMMANDS = ('verify-axioms', 'conjugate', 'dual-rep', 'biconjugate', 'separate', 'gauge',
            'polar', 'bipolar', 'extend', 'gexp')


@dataclass
class TreeSpec:
    """A g-expectation run: tree, driver, terminal payoff and optional refinement study."""

    name: str
    tree: BinaryTree
    driver: Driver
    payoff: str = 'brownian'
    strike: float = 0.0
    time: int = 0
    study: Tuple[int, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            'steps': self.tree.steps,
            'horizon': self.tree.horizon,
            'driver': self.driver.name,
            'mu': self.driver.mu,
            'payoff': self.payoff,
            'strike': self.strike,
            'time': self.time,
            'study': list(self.study),
        }


@dataclass
class Scenario:
    """A fully validated scenario: one space and algebra plus every named object a command can use."""

    name: str
    space: FiniteProbSpace
    algebra: SigmaAlgebra
    norm_p: float = float('inf')
    vectors: Dict[str, np.ndarray] = field(default_factory=dict)
    duals: Dict[str, np.ndarray] = field(default_factory=dict)
    bodies: Dict[str, Any] = field(default_factory=dict)
    generator_sets: Dict[str, List[np.ndarray]] = field(default_factory=dict)
    risks: Dict[str, RiskMeasureSpec] = field(default_factory=dict)
    trees: Dict[str, TreeSpec] = field(default_factory=dict)
    suites: Tuple[str, ...] = COMMANDS
    seed: Optional[int] = None
    trials: Optional[int] = None
    tolerances: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        unknown = [s for s in self.suites if s not in COMMANDS]
        if unknown:
            raise ValidationError(f"suites: unknown command(s) {unknown}; expected a subset of {list(COMMANDS)}")
        if self.trials is not None and self.trials < 1:
            raise ValidationError("trials must be at least 1")

    def vector(self, name: str) -> np.ndarray:
        try:
            return self.vectors[name]
        except KeyError:
            raise ValidationError(f"unknown vector {name!r}")

    def convex_risks(self) -> Dict[str, RiskMeasureSpec]:
        return {k: r for k, r in self.risks.items() if r.family.is_convex}

    def summary(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'atoms': self.space.atom_count,
            'blocks': self.algebra.block_count,
            'norm_p': self.norm_p,
            'vectors': sorted(self.vectors),
            'bodies': sorted(self.bodies),
            'generator_sets': sorted(self.generator_sets),
            'risks': {k: r.to_dict() for k, r in sorted(self.risks.items())},
            'trees': {k: t.to_dict() for k, t in sorted(self.trees.items())},
        }

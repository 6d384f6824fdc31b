"""Binary Brownian trees, drivers and g-expectation solutions."""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, List

import numpy as np

from ..utils.errors import ValidationError
from .space import FiniteProbSpace, SigmaAlgebra

logger = logging.getLogger(__name__)

MAX_STEPS = 14


@dataclass(frozen=True, eq=False)
class BinaryTree:
    """Non-recombining binary tree of Brownian increments +-sqrt(dt).

    Leaves are atoms with probability 2^-N. The node of leaf w at depth t is
    w >> (N - t); node k has children 2k (up move) and 2k + 1 (down move).
    """

    steps: int
    horizon: float = 1.0

    def __post_init__(self):
        if not isinstance(self.steps, (int, np.integer)) or not (1 <= self.steps <= MAX_STEPS):
            raise ValidationError(f"tree steps must be an integer in [1, {MAX_STEPS}] (got {self.steps})")
        if not (np.isfinite(self.horizon) and self.horizon > 0):
            raise ValidationError("tree horizon must be positive")

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def leaf_count(self) -> int:
        return 2 ** self.steps

    @cached_property
    def space(self) -> FiniteProbSpace:
        return FiniteProbSpace.uniform(self.leaf_count)

    def nodes_at(self, t: int) -> np.ndarray:
        """Depth-t node index of every leaf."""
        self.check_time(t)
        return np.arange(self.leaf_count) >> (self.steps - t)

    def algebra(self, t: int) -> SigmaAlgebra:
        return self._algebras[t]

    @cached_property
    def _algebras(self) -> List[SigmaAlgebra]:
        return [SigmaAlgebra(self.space, self.nodes_at(t)) for t in range(self.steps + 1)]

    def increments(self, t: int) -> np.ndarray:
        """Brownian increment of step t (1 <= t <= N) on every leaf."""
        if not (1 <= t <= self.steps):
            raise ValidationError(f"increment step must lie in [1, {self.steps}]")
        down = (np.arange(self.leaf_count) >> (self.steps - t)) & 1
        return np.where(down == 1, -1.0, 1.0) * np.sqrt(self.dt)

    def brownian(self, t: int) -> np.ndarray:
        """B at time t * dt on every leaf."""
        self.check_time(t)
        path = np.zeros(self.leaf_count)
        for s in range(1, t + 1):
            path += self.increments(s)
        return path

    def check_time(self, t: int):
        if not (0 <= t <= self.steps):
            raise ValidationError(f"time index {t} outside [0, {self.steps}]")


DriverFn = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class Driver:
    """Generator g(t, z) of the backward recursion, with its Lipschitz constant mu."""

    name: str
    mu: float
    g: DriverFn

    def __post_init__(self):
        if not (np.isfinite(self.mu) and self.mu >= 0):
            raise ValidationError(f"driver Lipschitz constant must be >= 0 (got {self.mu})")

    def __call__(self, t: float, z) -> np.ndarray:
        return self.g(t, np.asarray(z, dtype=float))

    @classmethod
    def named(cls, name: str, mu: float = 0.0) -> 'Driver':
        factories: Dict[str, DriverFn] = {
            'zero': lambda t, z: np.zeros_like(z),
            'abs': lambda t, z: mu * np.abs(z),
            'smooth': lambda t, z: mu * (np.sqrt(1 + z ** 2) - 1),
            'concave': lambda t, z: -mu * np.abs(z),
        }
        if name not in factories:
            raise ValidationError(f"unknown driver {name!r}; expected one of {sorted(factories)}")
        return cls(name if name == 'zero' else f'{name}(mu={mu:g})', 0.0 if name == 'zero' else float(mu),
                   factories[name])


@dataclass
class GSolution:
    """Y per node at every depth (2^t values) and Z per non-leaf node (depths 0..N-1)."""

    tree: BinaryTree
    Y: List[np.ndarray] = field(default_factory=list)
    Z: List[np.ndarray] = field(default_factory=list)

    def y_at(self, t: int) -> np.ndarray:
        """Y_t broadcast to the leaves."""
        return self.Y[t][self.tree.nodes_at(t)]

    def recursion_residual(self, driver: Driver) -> float:
        """Largest deviation from the recursion identity over all non-leaf nodes."""
        dt = self.tree.dt
        worst = 0.0
        for t in range(self.tree.steps):
            up, down = self.Y[t + 1][0::2], self.Y[t + 1][1::2]
            z = (up - down) / (2 * np.sqrt(dt))
            y = 0.5 * (up + down) + driver(t * dt, z) * dt
            worst = max(worst, float(np.max(np.abs(z - self.Z[t]))), float(np.max(np.abs(y - self.Y[t]))))
        return worst

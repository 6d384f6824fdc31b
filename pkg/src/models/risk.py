"""Risk measure specs, dual densities and conjugate result types."""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..utils.errors import ValidationError
from .space import Indicator, SigmaAlgebra

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-12


class RiskFamily(Enum):
    NEG_COND_EXPECT = 'neg_cond_expect'
    ENTROPIC = 'entropic'
    AVAR = 'avar'
    WORST_CASE = 'worst_case'
    SCENARIO_ROBUST = 'scenario_robust'
    # negative controls
    BROKEN_SQUARE = 'broken_square'
    UNCONDITIONAL_MEAN = 'unconditional_mean'

    @property
    def is_convex(self) -> bool:
        return self not in (RiskFamily.BROKEN_SQUARE, RiskFamily.UNCONDITIONAL_MEAN)


def _block_means(y: np.ndarray, algebra: SigmaAlgebra) -> np.ndarray:
    return np.bincount(algebra.labels, weights=algebra.conditional_probs * y,
                       minlength=algebra.block_count)


@dataclass(frozen=True, eq=False)
class DualDensity:
    """A dual variable y <= 0 with E[y | F] = -1; y = -dQ/dP for a measure Q agreeing with P on F."""

    y: np.ndarray
    algebra: SigmaAlgebra

    def __post_init__(self):
        y = self.algebra.space.check_vector(self.y)
        if np.any(y > FEASIBILITY_TOL):
            raise ValidationError(f"dual density must be nonpositive (atom {int(np.argmax(y))})")
        means = _block_means(y, self.algebra)
        if np.any(np.abs(means + 1) > 1e-9):
            bad = int(np.argmax(np.abs(means + 1)))
            raise ValidationError(f"dual density must have E[y|F] = -1 (block {bad} has {means[bad]:.12g})")
        y = np.minimum(y, 0.0)
        y.setflags(write=False)
        object.__setattr__(self, 'y', y)

    @classmethod
    def uniform(cls, algebra: SigmaAlgebra) -> 'DualDensity':
        return cls(-np.ones(algebra.atom_count), algebra)

    @classmethod
    def from_measure(cls, algebra: SigmaAlgebra, q) -> 'DualDensity':
        """y = -dQ/dP for atom probabilities ``q`` of a measure agreeing with P on F."""
        q = np.asarray(q, dtype=float)
        return cls(-q / algebra.space.probs, algebra)

    @classmethod
    def from_block_weights(cls, algebra: SigmaAlgebra, w) -> 'DualDensity':
        """y = -w / P(atom | block) for weights summing to 1 on every block."""
        return cls(-np.asarray(w, dtype=float) / algebra.conditional_probs, algebra)

    @classmethod
    def random(cls, algebra: SigmaAlgebra, rng: np.random.Generator,
               concentration: float = 1.0) -> 'DualDensity':
        w = np.empty(algebra.atom_count)
        for atoms in algebra.blocks:
            w[atoms] = rng.dirichlet(np.full(atoms.size, concentration))
        return cls.from_block_weights(algebra, w)

    def measure(self) -> np.ndarray:
        """Atom probabilities of Q = -y dP."""
        return -self.y * self.algebra.space.probs

    def max_violation(self) -> float:
        return float(max(np.max(self.y), np.max(np.abs(_block_means(self.y, self.algebra) + 1))))


def is_feasible_density(y, algebra: SigmaAlgebra, tol: float = 1e-9) -> np.ndarray:
    """Per-block feasibility of y (y <= 0 and E[y|F] = -1), as a boolean per block."""
    y = np.asarray(y, dtype=float)
    nonpositive = np.array([np.all(y[atoms] <= tol) for atoms in algebra.blocks])
    return nonpositive & (np.abs(_block_means(y, algebra) + 1) <= tol)


@dataclass
class RiskMeasureSpec:
    """A conditional risk measure by family name and parameters."""

    family: RiskFamily
    algebra: SigmaAlgebra
    beta: Optional[float] = None
    lam: Optional[np.ndarray] = None
    densities: Tuple[DualDensity, ...] = ()
    name: str = ''

    def __post_init__(self):
        if isinstance(self.family, str):
            try:
                self.family = RiskFamily(self.family)
            except ValueError:
                raise ValidationError(f"unknown risk family {self.family!r}")
        if self.family is RiskFamily.ENTROPIC:
            if self.beta is None or not np.isfinite(self.beta) or self.beta <= 0:
                raise ValidationError(f"entropic risk needs beta > 0 (got {self.beta})")
            self.beta = float(self.beta)
        if self.family is RiskFamily.AVAR:
            if self.lam is None:
                raise ValidationError("avar needs a level lambda")
            lam = np.broadcast_to(np.asarray(self.lam, dtype=float), (self.algebra.atom_count,)).copy()
            self.algebra.require_measurable(lam, "avar level lambda")
            if np.any(lam <= 0) or np.any(lam > 1):
                raise ValidationError("avar level lambda must lie in (0, 1] on every block")
            self.lam = lam
        if self.family is RiskFamily.SCENARIO_ROBUST:
            if not self.densities:
                raise ValidationError("scenario_robust needs at least one density")
            self.densities = tuple(d if isinstance(d, DualDensity) else DualDensity(d, self.algebra)
                                   for d in self.densities)
        if not self.name:
            self.name = self.label()

    def label(self) -> str:
        if self.family is RiskFamily.ENTROPIC:
            return f'entropic(beta={self.beta:g})'
        if self.family is RiskFamily.AVAR:
            levels = sorted(set(np.round(self.lam, 12).tolist()))
            return f"avar(lambda={','.join(f'{v:g}' for v in levels)})"
        if self.family is RiskFamily.SCENARIO_ROBUST:
            return f'scenario_robust(n={len(self.densities)})'
        return self.family.value

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {'family': self.family.value, 'name': self.name}
        if self.beta is not None:
            data['beta'] = self.beta
        if self.lam is not None:
            data['lambda'] = self.lam.tolist()
        if self.densities:
            data['densities'] = [d.y.tolist() for d in self.densities]
        return data


@dataclass
class ConjugateValue:
    """A conjugate or biconjugate value with its attaining argument when one was found."""

    value: np.ndarray
    maximizer: Optional[np.ndarray] = None
    method: str = 'closed-form'


@dataclass
class DomainClassification:
    """MI (some probe hits -inf), PI (all probes +inf) and BP (the rest), as F-measurable events."""

    MI: Indicator
    PI: Indicator
    BP: Indicator

    def __post_init__(self):
        coverage = self.MI.member.astype(int) + self.PI.member.astype(int) + self.BP.member.astype(int)
        if np.any(coverage != 1):
            raise ValidationError("MI, PI and BP must partition the atoms")

    def to_dict(self) -> Dict[str, Any]:
        return {key: np.flatnonzero(getattr(self, key).member).tolist() for key in ('MI', 'PI', 'BP')}


@dataclass
class Subgradient:
    """A dual vector u acting by x -> E[x u | F]."""

    u: np.ndarray
    verified: bool = False
    details: Dict[str, Any] = field(default_factory=dict)


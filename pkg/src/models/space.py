"""Finite probability spaces, partition algebras, indicators and F-partitions.

Random variables are plain float ``numpy`` arrays of length ``atom_count``;
``+inf``/``-inf`` entries stand for extended values. Every atom carries
strictly positive mass, so equivalence classes are literal vectors.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..utils.errors import ValidationError

logger = logging.getLogger(__name__)

PROB_SUM_TOL = 1e-12


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FiniteProbSpace:
    """Atoms of a finite sample space with strictly positive probabilities."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 1 or probs.size == 0:
            raise ValidationError("probabilities must be a nonempty one-dimensional list")
        if not np.all(np.isfinite(probs)):
            raise ValidationError("probabilities must be finite")
        if np.any(probs <= 0):
            bad = int(np.flatnonzero(probs <= 0)[0])
            raise ValidationError(f"probabilities must be strictly positive (atom {bad})")
        if abs(probs.sum() - 1.0) > PROB_SUM_TOL:
            raise ValidationError(f"probabilities must sum to 1 (got {probs.sum():.15g})")
        object.__setattr__(self, 'probs', _frozen_array(probs))

    @classmethod
    def uniform(cls, atom_count: int) -> 'FiniteProbSpace':
        """Uniform space on ``atom_count`` atoms."""
        if atom_count < 1:
            raise ValidationError("atom_count must be positive")
        return cls(np.full(atom_count, 1.0 / atom_count))

    @property
    def atom_count(self) -> int:
        return int(self.probs.size)

    def expectation(self, x: np.ndarray) -> float:
        """Unconditional expectation of a finite vector."""
        return float(np.dot(self.probs, self.check_vector(x)))

    def check_vector(self, x, allow_infinite: bool = False) -> np.ndarray:
        """Coerce ``x`` to a float vector on this space."""
        arr = np.asarray(x, dtype=float)
        if arr.shape != (self.atom_count,):
            raise ValidationError(
                f"vector has shape {arr.shape}, expected ({self.atom_count},)")
        if np.any(np.isnan(arr)):
            raise ValidationError("vector contains NaN")
        if not allow_infinite and not np.all(np.isfinite(arr)):
            raise ValidationError("vector must be finite")
        return arr


@dataclass(frozen=True, eq=False)
class SigmaAlgebra:
    """A sub-algebra of the finest algebra, given by a block label per atom."""

    space: FiniteProbSpace
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.size != self.space.atom_count:
            raise ValidationError(
                f"block labels must list one block per atom "
                f"({self.space.atom_count} atoms, got {labels.size} labels)")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.equal(np.mod(labels, 1), 0)):
                raise ValidationError("block labels must be integers")
            labels = labels.astype(int)
        if np.any(labels < 0):
            raise ValidationError("block labels must be nonnegative")
        used = np.unique(labels)
        if not np.array_equal(used, np.arange(used.size)):
            raise ValidationError("block labels must be contiguous from 0 with no empty block")
        object.__setattr__(self, 'labels', _frozen_array(labels, dtype=int))

    @classmethod
    def trivial(cls, space: FiniteProbSpace) -> 'SigmaAlgebra':
        return cls(space, np.zeros(space.atom_count, dtype=int))

    @classmethod
    def finest(cls, space: FiniteProbSpace) -> 'SigmaAlgebra':
        return cls(space, np.arange(space.atom_count))

    @classmethod
    def contiguous(cls, space: FiniteProbSpace, block_count: int) -> 'SigmaAlgebra':
        """Equal-sized blocks of consecutive atoms."""
        if block_count < 1 or space.atom_count % block_count:
            raise ValidationError(
                f"{space.atom_count} atoms cannot be split into {block_count} equal blocks")
        return cls(space, np.repeat(np.arange(block_count), space.atom_count // block_count))

    @classmethod
    def from_blocks(cls, space: FiniteProbSpace, blocks: Sequence[Sequence[int]]) -> 'SigmaAlgebra':
        """Build the algebra from explicit lists of atom indices."""
        labels = np.full(space.atom_count, -1, dtype=int)
        for b, block in enumerate(blocks):
            for atom in block:
                if not (0 <= int(atom) < space.atom_count):
                    raise ValidationError(
                        f"block {b} references atom {atom} of a {space.atom_count}-atom space")
                if labels[int(atom)] != -1:
                    raise ValidationError(f"atom {atom} appears in more than one block")
                labels[int(atom)] = b
        if np.any(labels < 0):
            missing = np.flatnonzero(labels < 0).tolist()
            raise ValidationError(f"atoms {missing} are not covered by any block")
        return cls(space, labels)

    @property
    def atom_count(self) -> int:
        return self.space.atom_count

    @property
    def block_count(self) -> int:
        return int(self.labels.max()) + 1

    @cached_property
    def blocks(self) -> Tuple[np.ndarray, ...]:
        """Atom indices of every block, ascending."""
        return tuple(_frozen_array(np.flatnonzero(self.labels == b), dtype=int)
                     for b in range(self.block_count))

    @cached_property
    def block_probs(self) -> np.ndarray:
        return _frozen_array(np.bincount(self.labels, weights=self.space.probs,
                                         minlength=self.block_count))

    @cached_property
    def conditional_probs(self) -> np.ndarray:
        """P(atom | its block), the weights of the block-wise pairing."""
        return _frozen_array(self.space.probs / self.block_probs[self.labels])

    def block_weights(self, b: int) -> np.ndarray:
        return self.conditional_probs[self.blocks[b]]

    def broadcast(self, block_values) -> np.ndarray:
        """Lift one value per block to an F-measurable vector."""
        values = np.asarray(block_values, dtype=float)
        if values.shape != (self.block_count,):
            raise ValidationError(f"expected {self.block_count} block values, got {values.shape}")
        return values[self.labels]

    def block_values(self, x: np.ndarray) -> np.ndarray:
        """One value per block of an F-measurable vector (first atom of each block)."""
        x = np.asarray(x, dtype=float)
        return np.array([x[block[0]] for block in self.blocks])

    def is_measurable(self, x, tol: float = 0.0) -> bool:
        """True iff ``x`` is constant on every block (up to ``tol``)."""
        x = np.asarray(x, dtype=float)
        for block in self.blocks:
            vals = x[block]
            if np.all(vals == vals[0]):
                continue
            if not np.all(np.isfinite(vals)) or np.ptp(vals) > tol:
                return False
        return True

    def require_measurable(self, x, what: str = "vector", tol: float = 1e-12) -> np.ndarray:
        arr = np.asarray(x, dtype=float)
        if not self.is_measurable(arr, tol):
            raise ValidationError(f"{what} is not measurable with respect to the block algebra")
        return arr

    def is_coarser_than(self, other: 'SigmaAlgebra') -> bool:
        """True iff every block of ``other`` sits inside one block of ``self``."""
        if other.atom_count != self.atom_count:
            return False
        return all(np.all(self.labels[block] == self.labels[block[0]]) for block in other.blocks)

    def random_measurable(self, rng: np.random.Generator, low: float = -1.0,
                          high: float = 1.0) -> np.ndarray:
        return self.broadcast(rng.uniform(low, high, size=self.block_count))

    def random_event(self, rng: np.random.Generator) -> 'Indicator':
        chosen = rng.random(self.block_count) < 0.5
        return Indicator.from_blocks(self, np.flatnonzero(chosen))


@dataclass(frozen=True, eq=False)
class Indicator:
    """Indicator vector of an event; ``algebra`` is set when the event is F-measurable."""

    member: np.ndarray
    algebra: Optional[SigmaAlgebra] = None

    def __post_init__(self):
        member = np.asarray(self.member, dtype=bool)
        if member.ndim != 1:
            raise ValidationError("indicator must be one-dimensional")
        if self.algebra is not None:
            if member.size != self.algebra.atom_count:
                raise ValidationError("indicator length does not match the space")
            if not self.algebra.is_measurable(member.astype(float)):
                raise ValidationError("indicator flagged F-measurable is not constant on blocks")
        object.__setattr__(self, 'member', _frozen_array(member, dtype=bool))

    @classmethod
    def from_blocks(cls, algebra: SigmaAlgebra, block_ids: Iterable[int]) -> 'Indicator':
        block_ids = np.asarray(list(block_ids), dtype=int)
        return cls(np.isin(algebra.labels, block_ids), algebra)

    @classmethod
    def whole(cls, algebra: SigmaAlgebra) -> 'Indicator':
        return cls(np.ones(algebra.atom_count, dtype=bool), algebra)

    @property
    def blocks(self) -> List[int]:
        """Blocks contained in the event (requires an algebra)."""
        if self.algebra is None:
            raise ValidationError("indicator is not attached to an algebra")
        return sorted(set(self.algebra.labels[self.member].tolist()))

    def apply(self, x) -> np.ndarray:
        """Indicator times ``x``: zero off the event, including for infinite entries."""
        return np.where(self.member, np.asarray(x, dtype=float), 0.0)

    def complement(self) -> 'Indicator':
        return Indicator(~self.member, self.algebra)

    def intersect(self, other: 'Indicator') -> 'Indicator':
        return Indicator(self.member & other.member, self.algebra or other.algebra)

    def is_empty(self) -> bool:
        return not bool(self.member.any())

    def probability(self, space: FiniteProbSpace) -> float:
        return float(space.probs[self.member].sum())


@dataclass(frozen=True, eq=False)
class FPartition:
    """Finite partition of the atoms into F-measurable events."""

    parts: Tuple[Indicator, ...]
    algebra: SigmaAlgebra = field(default=None)

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValidationError("partition must have at least one part")
        algebra = self.algebra or parts[0].algebra
        if algebra is None:
            raise ValidationError("partition parts must be F-measurable indicators")
        coverage = np.zeros(algebra.atom_count, dtype=int)
        for part in parts:
            if part.algebra is None or part.member.size != algebra.atom_count:
                raise ValidationError("partition parts must be F-measurable indicators on one space")
            if not algebra.is_measurable(part.member.astype(float)):
                raise ValidationError("partition part is not F-measurable")
            coverage += part.member
        if np.any(coverage > 1):
            raise ValidationError(
                f"partition parts overlap on atoms {np.flatnonzero(coverage > 1).tolist()}")
        if np.any(coverage == 0):
            raise ValidationError(
                f"partition does not cover atoms {np.flatnonzero(coverage == 0).tolist()}")
        object.__setattr__(self, 'parts', parts)
        object.__setattr__(self, 'algebra', algebra)

    @classmethod
    def from_grouping(cls, algebra: SigmaAlgebra, groups: Sequence[Sequence[int]]) -> 'FPartition':
        """Partition whose parts are unions of the listed blocks."""
        return cls(tuple(Indicator.from_blocks(algebra, g) for g in groups), algebra)

    @classmethod
    def blockwise(cls, algebra: SigmaAlgebra) -> 'FPartition':
        return cls.from_grouping(algebra, [[b] for b in range(algebra.block_count)])

    @classmethod
    def random(cls, algebra: SigmaAlgebra, rng: np.random.Generator,
               max_parts: Optional[int] = None) -> 'FPartition':
        """Random grouping of the blocks into nonempty parts."""
        k = algebra.block_count
        n_parts = int(rng.integers(1, (max_parts or k) + 1))
        n_parts = min(n_parts, k)
        assignment = rng.integers(0, n_parts, size=k)
        assignment[rng.permutation(k)[:n_parts]] = np.arange(n_parts)
        groups = [np.flatnonzero(assignment == j) for j in range(n_parts)]
        return cls.from_grouping(algebra, groups)

    def __len__(self) -> int:
        return len(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def refine(self, other: 'FPartition') -> List[Tuple[int, int, Indicator]]:
        """Nonempty cells A_i ∩ B_j of the common refinement, with their indices."""
        cells = []
        for i, a in enumerate(self.parts):
            for j, b in enumerate(other.parts):
                cell = a.intersect(b)
                if not cell.is_empty():
                    cells.append((i, j, cell))
        return cells

"""Conditional expectation, stratified extrema, gluing and the locality calculus."""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..models.report import CheckResult, Witness
from ..models.space import FPartition, Indicator, SigmaAlgebra
from ..utils.config import get_config
from ..utils.errors import BudgetExceededError, ValidationError

logger = logging.getLogger(__name__)

Oracle = Callable[[np.ndarray], np.ndarray]


def extended_add(a, b) -> np.ndarray:
    """Atomwise sum with the convention +inf + (-inf) = +inf."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid='ignore'):
        out = a + b
    out[np.isnan(out)] = np.inf
    return out


def extended_scale(xi, x) -> np.ndarray:
    """Atomwise product with the convention 0 * (+-inf) = 0."""
    xi = np.asarray(xi, dtype=float)
    x = np.asarray(x, dtype=float)
    with np.errstate(invalid='ignore'):
        out = xi * x
    return np.where(xi == 0, 0.0, out)


def extended_close(a, b, tol: float) -> np.ndarray:
    """Atomwise comparison treating equal infinities as equal."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    same_inf = np.isinf(a) & np.isinf(b) & (np.sign(a) == np.sign(b))
    with np.errstate(invalid='ignore'):
        close = np.abs(a - b) <= tol
    return same_inf | close


def cond_expect(x, algebra: SigmaAlgebra) -> np.ndarray:
    """Conditional expectation E[x | F] of a finite vector, as an F-measurable vector."""
    x = algebra.space.check_vector(x)
    sums = np.bincount(algebra.labels, weights=algebra.space.probs * x,
                       minlength=algebra.block_count)
    return (sums / algebra.block_probs)[algebra.labels]


def pairing(x, y, algebra: SigmaAlgebra) -> np.ndarray:
    """The conditional pairing E[x * y | F]."""
    return cond_expect(np.asarray(x, dtype=float) * np.asarray(y, dtype=float), algebra)


def ess_extremum(vectors: Sequence[np.ndarray], mode: str = 'sup') -> np.ndarray:
    """Atomwise supremum or infimum of a nonempty finite family."""
    if len(vectors) == 0:
        raise ValidationError("ess_extremum needs a nonempty family")
    stack = np.vstack([np.asarray(v, dtype=float) for v in vectors])
    if mode == 'sup':
        return stack.max(axis=0)
    if mode == 'inf':
        return stack.min(axis=0)
    raise ValidationError(f"mode must be 'sup' or 'inf', got {mode!r}")


def concatenate(parts: Sequence[Tuple[Indicator, np.ndarray]]) -> np.ndarray:
    """Glue ``x_n`` along the F-partition formed by the indicators."""
    if not parts:
        raise ValidationError("concatenate needs at least one part")
    partition = FPartition(tuple(ind for ind, _ in parts))
    out = np.zeros(partition.algebra.atom_count)
    for ind, x in parts:
        out = np.where(ind.member, np.asarray(x, dtype=float), out)
    return out


@dataclass
class HccHull:
    """Concatenation hull of a finite family: all gluings along F-partitions.

    On a finite space every partition is finite and the hull is the product,
    over blocks, of the distinct block restrictions of the generators.
    """

    generators: Tuple[np.ndarray, ...]
    algebra: SigmaAlgebra
    tol: float = 1e-12
    block_choices: List[np.ndarray] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.generators) == 0:
            raise ValidationError("concatenation hull needs at least one generator")
        self.generators = tuple(self.algebra.space.check_vector(g, allow_infinite=True)
                                for g in self.generators)
        self.block_choices = []
        for block in self.algebra.blocks:
            restrictions = np.unique(np.vstack([g[block] for g in self.generators]), axis=0)
            self.block_choices.append(restrictions)

    @property
    def size(self) -> int:
        return int(np.prod([len(c) for c in self.block_choices], dtype=float))

    def elements(self, budget: Optional[int] = None) -> List[np.ndarray]:
        """Enumerate the hull (deduplicated, in lexicographic block order)."""
        budget = budget if budget is not None else get_config().solver.hull_budget
        if self.size > budget:
            raise BudgetExceededError(
                f"concatenation hull has {self.size} elements, budget is {budget}")
        out = []
        for choice in itertools.product(*[range(len(c)) for c in self.block_choices]):
            z = np.empty(self.algebra.atom_count)
            for b, k in enumerate(choice):
                z[self.algebra.blocks[b]] = self.block_choices[b][k]
            out.append(z)
        return out

    def contains(self, x) -> bool:
        """Blockwise membership: each block restriction matches some generator's."""
        x = np.asarray(x, dtype=float)
        for b, block in enumerate(self.algebra.blocks):
            rows = self.block_choices[b]
            target = np.broadcast_to(x[block], rows.shape)
            if not np.any(np.all(extended_close(rows, target, self.tol), axis=1)):
                return False
        return True

    def same_as(self, other: 'HccHull') -> bool:
        if len(self.block_choices) != len(other.block_choices):
            return False
        for mine, theirs in zip(self.block_choices, other.block_choices):
            if mine.shape != theirs.shape or not np.allclose(mine, theirs, atol=self.tol, rtol=0):
                return False
        return True


def hcc_hull(generators: Sequence[np.ndarray], algebra: SigmaAlgebra) -> HccHull:
    """Concatenation hull of ``generators`` with respect to ``algebra``."""
    return HccHull(tuple(generators), algebra)


def _block_witness(description: str, lhs: np.ndarray, rhs: np.ndarray, algebra: SigmaAlgebra,
                   inputs: dict, tol: float) -> Witness:
    return Witness.atomwise(description, lhs, rhs, algebra, inputs=inputs, tol=tol)


def is_local(f: Oracle, samples: Sequence[Tuple[np.ndarray, Indicator]],
             tol: Optional[float] = None, name: str = 'oracle') -> CheckResult:
    """Sample-based check of the identity I_A f(x) = I_A f(I_A x) on the event."""
    tol = tol if tol is not None else get_config().tolerance.oracle
    result = CheckResult(check_id=f'locality/{name}', anchor='F-locality',
                         trials=len(samples))
    for x, event in samples:
        x = np.asarray(x, dtype=float)
        lhs = event.apply(f(x))
        rhs = event.apply(f(event.apply(x)))
        ok = extended_close(lhs, rhs, tol)[event.member]
        if not np.all(ok):
            algebra = event.algebra
            result.add_violation(_block_witness(
                'I_A f(x) differs from I_A f(I_A x)', lhs, rhs, algebra,
                {'x': x, 'event': event.member.astype(int)}, tol))
            logger.warning(f"Locality violation for {name} on event {np.flatnonzero(event.member).tolist()}")
    return result.finish()


def locality_samples(algebra: SigmaAlgebra, rng: np.random.Generator, count: int,
                     scale: float = 2.0) -> List[Tuple[np.ndarray, Indicator]]:
    """Random (vector, F-measurable event) pairs for locality tests."""
    return [(rng.normal(scale=scale, size=algebra.atom_count), algebra.random_event(rng))
            for _ in range(count)]


def local_sup_reduction_check(f: Oracle, generators: Sequence[np.ndarray], algebra: SigmaAlgebra,
                              tol: Optional[float] = None, budget: Optional[int] = None,
                              name: str = 'oracle') -> CheckResult:
    """Supremum of a local oracle over G equals its supremum over the concatenation hull of G."""
    tol = tol if tol is not None else get_config().tolerance.oracle
    hull = hcc_hull(generators, algebra)
    elements = hull.elements(budget)
    result = CheckResult(check_id=f'hull-sup/{name}', anchor='local supremum over concatenation hull',
                         trials=len(elements))

    events = [Indicator.from_blocks(algebra, [b]) for b in range(algebra.block_count)]
    pre = is_local(f, [(g, e) for g in list(hull.generators) + elements[:50] for e in events],
                   tol, name)
    if not pre.passed:
        result.details['precheck'] = 'oracle is not local on the sampled hull'
        result.witnesses.extend(pre.witnesses)
        result.passed = False
        return result.finish()

    sup_g = ess_extremum([f(g) for g in hull.generators], 'sup')
    sup_h = ess_extremum([f(z) for z in elements], 'sup')
    if not np.all(extended_close(sup_g, sup_h, tol)):
        result.add_violation(_block_witness('sup over G differs from sup over hull',
                                            sup_g, sup_h, algebra, {}, tol))
    result.details['sup'] = sup_g.tolist()
    return result.finish()


def concatenation_identity_check(f: Oracle, algebra: SigmaAlgebra, rng: np.random.Generator,
                                 trials: int, tol: float = 1e-12, name: str = 'oracle') -> CheckResult:
    """For local f: f(sum I_An x_n) = sum I_An f(x_n) over random partitions and pieces."""
    result = CheckResult(check_id=f'gluing/{name}', anchor='evaluation commutes with gluing',
                         trials=trials)
    for _ in range(trials):
        partition = FPartition.random(algebra, rng)
        pieces = [rng.normal(scale=2.0, size=algebra.atom_count) for _ in partition]
        glued = concatenate(list(zip(partition.parts, pieces)))
        lhs = f(glued)
        rhs = concatenate([(part, f(piece)) for part, piece in zip(partition.parts, pieces)])
        if not np.all(extended_close(lhs, rhs, tol)):
            result.add_violation(_block_witness('f(glued) differs from glued f', lhs, rhs, algebra,
                                                {'glued': glued}, tol))
    return result.finish()


def local_agreement_check(f: Oracle, g: Oracle, generators: Sequence[np.ndarray],
                          algebra: SigmaAlgebra, tol: float = 1e-12,
                          budget: Optional[int] = None) -> CheckResult:
    """Two local oracles that agree on G agree on every element of the concatenation hull."""
    hull = hcc_hull(generators, algebra)
    elements = hull.elements(budget)
    result = CheckResult(check_id='hull-agreement', anchor='agreement extends to concatenation hull',
                         trials=len(elements))
    for gen in hull.generators:
        if not np.all(extended_close(f(gen), g(gen), tol)):
            raise ValidationError("oracles do not agree on the generators")
    for z in elements:
        lhs, rhs = f(z), g(z)
        if not np.all(extended_close(lhs, rhs, tol)):
            result.add_violation(_block_witness('oracles disagree on a hull element', lhs, rhs,
                                                algebra, {'z': z}, tol))
    return result.finish()

"""Extension of risk oracles from base points by gluing along canonical representations.

On a finite space every vector is already a base point, so the content of
the extension lies in two facts: the glued value does not depend on the
representation, and the axioms survive the gluing. Both are checked here.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..models.report import CheckResult, Witness
from ..models.risk import DualDensity, RiskMeasureSpec, is_feasible_density
from ..models.space import FPartition, SigmaAlgebra
from ..utils.config import get_config
from ..utils.errors import PreconditionError, ValidationError
from .conditional_norms import ConditionalNorm, cond_norm
from .conjugation import brute_force_conjugate, closed_form_conjugate
from .prob_core import cond_expect, concatenate, extended_close, local_agreement_check
from .risk_library import oracle_axiom_check, risk_oracle

logger = logging.getLogger(__name__)

Oracle = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True, eq=False)
class CanonicalRep:
    """sum_n I_{A_n} x_n: an F-partition with one base point per part."""

    partition: FPartition
    pieces: Tuple[np.ndarray, ...]

    def __post_init__(self):
        pieces = tuple(self.partition.algebra.space.check_vector(p) for p in self.pieces)
        if len(pieces) != len(self.partition):
            raise ValidationError(
                f"representation has {len(self.partition)} parts but {len(pieces)} pieces")
        object.__setattr__(self, 'pieces', pieces)

    @property
    def algebra(self) -> SigmaAlgebra:
        return self.partition.algebra

    @classmethod
    def trivial(cls, algebra: SigmaAlgebra, x) -> 'CanonicalRep':
        return cls(FPartition.from_grouping(algebra, [list(range(algebra.block_count))]), (x,))

    @classmethod
    def blockwise(cls, algebra: SigmaAlgebra, x) -> 'CanonicalRep':
        partition = FPartition.blockwise(algebra)
        return cls(partition, tuple(np.asarray(x, dtype=float) for _ in partition))

    @classmethod
    def random(cls, x, algebra: SigmaAlgebra, rng: np.random.Generator,
               noise: float = 5.0) -> 'CanonicalRep':
        """A random representation of x whose pieces carry noise off their own part."""
        x = np.asarray(x, dtype=float)
        partition = FPartition.random(algebra, rng)
        pieces = tuple(np.where(part.member, x, rng.normal(scale=noise, size=x.size))
                       for part in partition)
        return cls(partition, pieces)

    def glue(self) -> np.ndarray:
        return concatenate(list(zip(self.partition.parts, self.pieces)))

    def split(self, index: int, groups: Sequence[Sequence[int]]) -> 'CanonicalRep':
        """Refine part ``index`` into the given block groups, repeating its piece."""
        part = self.partition.parts[index]
        covered = sorted(b for g in groups for b in g)
        if covered != part.blocks:
            raise ValidationError("split groups must cover exactly the blocks of the part")
        new = FPartition.from_grouping(self.algebra, groups).parts
        parts = (list(self.partition.parts[:index]) + list(new)
                 + list(self.partition.parts[index + 1:]))
        pieces = (list(self.pieces[:index]) + [self.pieces[index]] * len(new)
                  + list(self.pieces[index + 1:]))
        return CanonicalRep(FPartition(tuple(parts), self.algebra), tuple(pieces))


def extend_eval(f_base: Oracle, rep: CanonicalRep) -> np.ndarray:
    """sum_n I_{A_n} f(x_n)."""
    return concatenate([(part, f_base(piece)) for part, piece in zip(rep.partition.parts, rep.pieces)])


class ExtendedOracle:
    """The glued extension of f_base, evaluated through a fresh random representation per call."""

    def __init__(self, f_base: Oracle, algebra: SigmaAlgebra, rng: np.random.Generator):
        self.f_base = f_base
        self.algebra = algebra
        self.rng = rng
        self.__name__ = f"extension-of-{getattr(f_base, '__name__', 'oracle')}"

    def __call__(self, x) -> np.ndarray:
        return extend_eval(self.f_base, CanonicalRep.random(x, self.algebra, self.rng))


def representation_independence_check(f_base: Oracle, reps: Sequence[CanonicalRep],
                                      tol: float = 1e-12, name: str = 'oracle') -> CheckResult:
    """All representations of one point give the same glued value; failures name a refinement cell."""
    if not reps:
        raise ValidationError("need at least one representation")
    point = reps[0].glue()
    for rep in reps[1:]:
        if not np.array_equal(rep.glue(), point):
            raise ValidationError("representations glue to different points")
    result = CheckResult(f'extension/{name}/independence', 'extension is independent of the representation',
                         trials=len(reps) - 1)
    reference = extend_eval(f_base, reps[0])
    for rep in reps[1:]:
        value = extend_eval(f_base, rep)
        if np.all(extended_close(value, reference, tol)):
            continue
        for i, j, cell in reps[0].partition.refine(rep.partition):
            if not np.all(extended_close(value, reference, tol)[cell.member]):
                result.add_violation(Witness.atomwise(
                    f'glued values differ on refinement cell A_{i} & B_{j} (blocks {cell.blocks})',
                    reference, value, reps[0].algebra,
                    {'point': point, 'piece_a': reps[0].pieces[i], 'piece_b': rep.pieces[j]}))
                break
    return result.finish()


def independence_suite(f_base: Oracle, algebra: SigmaAlgebra, trials: int, rng: np.random.Generator,
                       name: str = 'oracle', tol: float = 1e-12) -> CheckResult:
    """Representation independence over random pairs of representations of random points."""
    result = CheckResult(f'extension/{name}/independence', 'extension is independent of the representation',
                         trials=trials)
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=algebra.atom_count)
        reps = [CanonicalRep.random(x, algebra, rng), CanonicalRep.random(x, algebra, rng)]
        single = representation_independence_check(f_base, reps, tol, name)
        for witness in single.witnesses:
            result.add_violation(witness)
    return result.finish()


def linf_lipschitz_check(f_base: Oracle, algebra: SigmaAlgebra, trials: int, rng: np.random.Generator,
                         name: str = 'oracle', tol: Optional[float] = None) -> List[CheckResult]:
    """|f(x) - f(y)| <= |||x - y|||_inf for the glued extension, plus uniqueness of local extensions."""
    tol = tol if tol is not None else get_config().tolerance.oracle
    pre = oracle_axiom_check(f_base, algebra, name, min(trials, 200), rng, tol)
    monotone, cash = pre[0], pre[1]
    if not (monotone.passed and cash.passed):
        raise PreconditionError(f"{name} is not monotone and cash invariant; the L-infinity bound does not apply")

    extended = ExtendedOracle(f_base, algebra, rng)
    norm = ConditionalNorm(np.inf, algebra)
    bound = CheckResult(f'extension/{name}/linf-lipschitz', 'extension is 1-Lipschitz for the conditional sup norm',
                        trials=trials)
    worst = 0.0
    for k in range(trials):
        x = rng.normal(scale=2.0, size=algebra.atom_count)
        if k % 4 == 0:
            y = x + algebra.random_measurable(rng, -2.0, 2.0)
        else:
            y = x + rng.normal(scale=rng.uniform(0.01, 2.0), size=x.size)
        lhs = np.abs(extended(x) - extended(y))
        rhs = cond_norm(x - y, norm)
        ratio = np.divide(lhs, rhs, out=np.zeros_like(lhs), where=rhs > 0)
        worst = max(worst, float(ratio.max()))
        if np.any(lhs > rhs + tol * (1 + rhs)):
            bound.add_violation(Witness.atomwise('|f(x) - f(y)| > |||x - y|||_inf', lhs, rhs, algebra,
                                                 {'x': x, 'y': y}))
    bound.details['max_ratio'] = worst

    other = ExtendedOracle(f_base, algebra, np.random.default_rng(rng.integers(2**32)))
    base_points = [rng.normal(scale=2.0, size=algebra.atom_count) for _ in range(3)]
    unique = local_agreement_check(extended, other, base_points, algebra, tol)
    unique.check_id = f'extension/{name}/uniqueness'
    return [bound, unique]


def extension_axiom_check(f_base: Oracle, algebra: SigmaAlgebra, trials: int, rng: np.random.Generator,
                          name: str = 'oracle') -> List[CheckResult]:
    """Monotonicity, cash invariance, locality and L0(F)-convexity of the glued extension."""
    results = oracle_axiom_check(ExtendedOracle(f_base, algebra, rng), algebra, f'extension-{name}',
                                 trials, rng)
    for r in results:
        r.check_id = r.check_id.replace('axioms/', 'extension/', 1)
    return results


def extension_conjugate_check(spec: RiskMeasureSpec, trials: int, rng: np.random.Generator,
                              tol: float = 1e-5) -> CheckResult:
    """The extension has the same conjugate as its base measure on random feasible densities."""
    algebra = spec.algebra
    extended = ExtendedOracle(risk_oracle(spec), algebra, rng)
    result = CheckResult(f'extension/{spec.name}/conjugate', 'extension keeps the conjugate', trials=trials)
    for _ in range(trials):
        y = DualDensity.random(algebra, rng, concentration=4.0).y
        base = closed_form_conjugate(spec, y)
        ext = brute_force_conjugate(extended, y, algebra).value
        if not np.all(extended_close(base, ext, tol * (1 + np.abs(np.where(np.isfinite(base), base, 0))))):
            result.add_violation(Witness.atomwise('conjugate of the extension differs', ext, base, algebra,
                                                  {'y': y}))
    return result.finish()


def round_trip_check(algebra: SigmaAlgebra, trials: int, rng: np.random.Generator) -> CheckResult:
    """Every vector is a gluing of base points: rep -> glue -> rep -> glue is the identity."""
    result = CheckResult('extension/round-trip', 'every position is a gluing of base points', trials=trials)
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=algebra.atom_count)
        rep = CanonicalRep.random(x, algebra, rng)
        glued = rep.glue()
        again = CanonicalRep.blockwise(algebra, glued).glue()
        trivial = CanonicalRep.trivial(algebra, x).glue()
        if not (np.array_equal(glued, x) and np.array_equal(again, x) and np.array_equal(trivial, x)):
            result.add_violation(Witness.atomwise('gluing round trip changed the vector', again, x, algebra,
                                                  {'x': x}))
    return result.finish()


def _bounded_density(algebra: SigmaAlgebra, rng: np.random.Generator, bound_mode: str,
                     q: float, gamma: float, cap: float) -> np.ndarray:
    for _ in range(1000):
        y = DualDensity.random(algebra, rng, concentration=rng.uniform(0.5, 4.0)).y
        if bound_mode == 'linf' and np.any(-y > cap):
            continue
        if bound_mode == 'lgamma' and np.any(cond_expect(np.abs(y) ** q, algebra) > gamma):
            continue
        return y
    return -np.ones(algebra.atom_count)


def feasible_hull_identity(algebra: SigmaAlgebra, q: float, bound_mode: str, trials: int,
                           rng: np.random.Generator, gamma: float = 4.0,
                           cap: Optional[float] = None) -> CheckResult:
    """Gluing feasible densities along F-partitions stays feasible, with any blockwise bound preserved."""
    if bound_mode not in ('none', 'linf', 'lgamma'):
        raise ValidationError(f"unknown bound mode {bound_mode!r}")
    if q < 1:
        raise ValidationError("moment exponent q must be at least 1")
    cap = cap if cap is not None else 2.0 / float(algebra.conditional_probs.min())
    tol = get_config().tolerance.feasibility
    result = CheckResult(f'extension/feasible-hull/{bound_mode}', 'feasible densities are closed under gluing',
                         trials=trials)
    for _ in range(trials):
        partition = FPartition.random(algebra, rng)
        pieces = [_bounded_density(algebra, rng, bound_mode, q, gamma, cap) for _ in partition]
        glued = concatenate(list(zip(partition.parts, pieces)))
        ok = bool(is_feasible_density(glued, algebra, tol).all())
        if bound_mode == 'linf':
            ok &= bool(np.all(-glued <= cap + tol))
        if bound_mode == 'lgamma':
            ok &= bool(np.all(cond_expect(np.abs(glued) ** q, algebra) <= gamma + tol))
        if not ok:
            result.add_violation(Witness.atomwise('glued density is infeasible', cond_expect(glued, algebra),
                                                  -np.ones(algebra.atom_count), algebra, {'glued': glued}))
    return result.finish()

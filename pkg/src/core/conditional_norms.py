"""Conditional L^p norms, their module-norm axioms, neighborhoods and the random distance."""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..models.report import CheckResult, Witness
from ..models.space import Indicator, SigmaAlgebra
from ..utils.config import get_config
from ..utils.errors import ValidationError
from .bodies import ConvexBody
from .prob_core import cond_expect

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConditionalNorm:
    """|||x|||_p = E[|x|^p | F]^(1/p); p = inf gives the per-block maximum of |x|."""

    p: float
    algebra: SigmaAlgebra

    def __post_init__(self):
        p = float(self.p)
        if np.isnan(p) or p < 1:
            raise ValidationError(f"norm exponent must satisfy p >= 1 (got {self.p})")
        object.__setattr__(self, 'p', p)

    @property
    def dual_exponent(self) -> float:
        if self.p == 1:
            return float('inf')
        if np.isinf(self.p):
            return 1.0
        return self.p / (self.p - 1)

    def __call__(self, x) -> np.ndarray:
        return cond_norm(x, self)

    def label(self) -> str:
        return 'inf' if np.isinf(self.p) else f'{self.p:g}'


def cond_norm(x, norm: ConditionalNorm) -> np.ndarray:
    algebra = norm.algebra
    ax = np.abs(algebra.space.check_vector(x))
    if np.isinf(norm.p):
        block_max = np.array([ax[atoms].max() for atoms in algebra.blocks])
        return block_max[algebra.labels]
    if norm.p == 1:
        return cond_expect(ax, algebra)
    return cond_expect(ax ** norm.p, algebra) ** (1.0 / norm.p)


def rnm_axiom_check(norm: ConditionalNorm, trials: int, rng: np.random.Generator,
                    tol: Optional[float] = None) -> List[CheckResult]:
    """Homogeneity under F-measurable scalars, triangle inequality and definiteness."""
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    tol = tol if tol is not None else get_config().tolerance.oracle
    algebra = norm.algebra
    n = algebra.atom_count
    label = norm.label()
    homogeneity = CheckResult(f'norm/{label}/homogeneity', 'module homogeneity |||xi x||| = |xi| |||x|||',
                              trials=trials)
    triangle = CheckResult(f'norm/{label}/triangle', 'triangle inequality', trials=trials)
    definite = CheckResult(f'norm/{label}/definiteness', 'definiteness |||x||| = 0 iff x = 0',
                           trials=trials + 1)

    for _ in range(trials):
        x = rng.normal(scale=2.0, size=n)
        y = rng.normal(scale=2.0, size=n)
        xi = algebra.random_measurable(rng, -3.0, 3.0)
        if rng.random() < 0.25:
            xi = Indicator.from_blocks(algebra, np.flatnonzero(rng.random(algebra.block_count) < 0.5)) \
                .member.astype(float)

        lhs, rhs = norm(xi * x), np.abs(xi) * norm(x)
        if np.any(np.abs(lhs - rhs) > tol * (1 + np.abs(rhs))):
            homogeneity.add_violation(Witness.atomwise('|||xi x||| != |xi| |||x|||', lhs, rhs, algebra,
                                                       {'x': x, 'xi': xi}))

        lhs, rhs = norm(x + y), norm(x) + norm(y)
        if np.any(lhs > rhs + tol * (1 + np.abs(rhs))):
            triangle.add_violation(Witness.atomwise('|||x + y||| > |||x||| + |||y|||', lhs, rhs, algebra,
                                                    {'x': x, 'y': y}))

        # zero the vector on a random event; the norm must vanish exactly there
        event = algebra.random_event(rng)
        z = event.complement().apply(x)
        value = norm(z)
        zero_blocks = event.member
        if np.any(value[zero_blocks] != 0) or np.any(value[~zero_blocks] <= 0):
            definite.add_violation(Witness.atomwise('norm zero pattern differs from vector zero pattern',
                                                    value, np.where(zero_blocks, 0.0, value), algebra,
                                                    {'x': z}))

    if np.any(norm(np.zeros(n)) != 0):
        definite.add_violation(Witness.atomwise('norm of zero is not zero', norm(np.zeros(n)),
                                                np.zeros(n), algebra))
    return [homogeneity.finish(), triangle.finish(), definite.finish()]


def ball_membership(x, radius, norm: ConditionalNorm, mode: str = 'Tc',
                    eps: Optional[float] = None, lam: Optional[float] = None) -> bool:
    """Membership in a neighborhood of 0 for the locally L0-convex or the (eps, lambda) topology."""
    value = cond_norm(x, norm)
    if mode == 'Tc':
        radius = np.broadcast_to(np.asarray(radius, dtype=float), value.shape)
        norm.algebra.require_measurable(radius, "radius")
        if np.any(radius <= 0):
            raise ValidationError("radius must be strictly positive on every block")
        return bool(np.all(value <= radius))
    if mode == 'epslambda':
        if eps is None or lam is None or eps <= 0 or not (0 < lam < 1):
            raise ValidationError("epslambda mode needs eps > 0 and 0 < lambda < 1")
        probability = float(norm.algebra.space.probs[value < eps].sum())
        return probability > 1 - lam
    raise ValidationError(f"unknown neighborhood mode {mode!r}")


def random_distance(x, body: ConvexBody, norm: ConditionalNorm) -> np.ndarray:
    """d*(x, M): per-block infimum of |||x - m||| over the body, with tiny values snapped to 0."""
    algebra = norm.algebra
    if body.algebra.atom_count != algebra.atom_count or not np.array_equal(body.algebra.labels,
                                                                            algebra.labels):
        raise ValidationError("body and norm must live on the same block algebra")
    x = algebra.space.check_vector(x)
    zero_tol = get_config().tolerance.zero_distance
    out = np.zeros(algebra.block_count)
    for b, block_set in enumerate(body.blocks):
        xb = x[algebra.blocks[b]]
        if block_set.contains(xb):
            continue
        d = block_set.distance(xb, algebra.block_weights(b), norm.p)
        out[b] = 0.0 if d < zero_tol else d
    return algebra.broadcast(out)


def holder_check(p: float, algebra: SigmaAlgebra, trials: int, rng: np.random.Generator,
                 tol: Optional[float] = None) -> CheckResult:
    """Conditional Hoelder inequality E[|xy| | F] <= |||x|||_p |||y|||_q."""
    tol = tol if tol is not None else get_config().tolerance.oracle
    norm_p = ConditionalNorm(p, algebra)
    norm_q = ConditionalNorm(norm_p.dual_exponent, algebra)
    result = CheckResult(f'norm/{norm_p.label()}/holder', 'conditional Hoelder inequality', trials=trials)
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=algebra.atom_count)
        y = rng.normal(scale=2.0, size=algebra.atom_count)
        lhs = cond_expect(np.abs(x * y), algebra)
        rhs = norm_p(x) * norm_q(y)
        if np.any(lhs > rhs + tol * (1 + rhs)):
            result.add_violation(Witness.atomwise('E[|xy| | F] exceeds the Hoelder bound', lhs, rhs,
                                                  algebra, {'x': x, 'y': y}))
    return result.finish()


def p_monotonicity_check(exponents, algebra: SigmaAlgebra, trials: int, rng: np.random.Generator,
                         tol: Optional[float] = None) -> CheckResult:
    """p <= q implies |||x|||_p <= |||x|||_q (conditional Jensen)."""
    tol = tol if tol is not None else get_config().tolerance.oracle
    norms = [ConditionalNorm(p, algebra) for p in sorted(exponents)]
    result = CheckResult('norm/p-monotonicity', 'conditional norms increase with p', trials=trials)
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=algebra.atom_count)
        values = [nm(x) for nm in norms]
        for low, high, a, b in zip(norms, norms[1:], values, values[1:]):
            if np.any(a > b + tol * (1 + b)):
                result.add_violation(Witness.atomwise(f'|||x|||_{low.label()} > |||x|||_{high.label()}',
                                                      a, b, algebra, {'x': x}))
    return result.finish()

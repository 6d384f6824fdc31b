"""Shipped conditional risk measures and the axiom-verification suite."""

import logging
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from ..models.report import CheckResult, Witness
from ..models.risk import RiskFamily, RiskMeasureSpec
from ..models.space import SigmaAlgebra
from ..utils.config import get_config
from ..utils.errors import ValidationError
from .prob_core import cond_expect, is_local, locality_samples, pairing

logger = logging.getLogger(__name__)

Oracle = Callable[[np.ndarray], np.ndarray]


def avar_solution(x: np.ndarray, lam: np.ndarray, algebra: SigmaAlgebra) -> Tuple[np.ndarray, np.ndarray]:
    """Greedy solution of sup{E[-x y'|F] : 0 <= y' <= 1/lambda, E[y'|F] = 1}.

    Atoms are filled in ascending order of x (stable, so ties go to the
    lower atom index). Returns the F-measurable value and the optimal y'.
    """
    y_prime = np.zeros(algebra.atom_count)
    for b, atoms in enumerate(algebra.blocks):
        cap = 1.0 / lam[atoms[0]]
        weights = algebra.block_weights(b)
        order = np.argsort(x[atoms], kind='stable')
        remaining = 1.0
        for k in order:
            if remaining <= 0:
                break
            mass = min(weights[k] * cap, remaining)
            y_prime[atoms[k]] = mass / weights[k]
            remaining -= mass
    return pairing(-x, y_prime, algebra), y_prime


def _entropic(x: np.ndarray, beta: float, algebra: SigmaAlgebra) -> np.ndarray:
    # weighted log-sum-exp is shifted by the block max internally
    values = np.array([logsumexp(-beta * x[atoms], b=algebra.block_weights(b)) / beta
                       for b, atoms in enumerate(algebra.blocks)])
    return algebra.broadcast(values)


def evaluate(spec: RiskMeasureSpec, x) -> np.ndarray:
    """Evaluate the conditional risk measure at a finite position x."""
    algebra = spec.algebra
    x = algebra.space.check_vector(x)
    family = spec.family
    if family is RiskFamily.NEG_COND_EXPECT:
        return -cond_expect(x, algebra)
    if family is RiskFamily.ENTROPIC:
        return _entropic(x, spec.beta, algebra)
    if family is RiskFamily.AVAR:
        value, _ = avar_solution(x, spec.lam, algebra)
        return value
    if family is RiskFamily.WORST_CASE:
        return algebra.broadcast([np.max(-x[atoms]) for atoms in algebra.blocks])
    if family is RiskFamily.SCENARIO_ROBUST:
        return np.max(np.vstack([pairing(x, d.y, algebra) for d in spec.densities]), axis=0)
    if family is RiskFamily.BROKEN_SQUARE:
        return -cond_expect(x, algebra) ** 2
    if family is RiskFamily.UNCONDITIONAL_MEAN:
        return np.full(algebra.atom_count, -algebra.space.expectation(x))
    raise ValidationError(f"no evaluator for family {family}")


def risk_oracle(spec: RiskMeasureSpec) -> Oracle:
    return lambda x: evaluate(spec, x)


def _close(lhs, rhs, tol) -> bool:
    return bool(np.all(np.abs(lhs - rhs) <= tol * (1 + np.abs(rhs))))


def oracle_axiom_check(f: Oracle, algebra: SigmaAlgebra, name: str, trials: int,
                       rng: np.random.Generator, tol: Optional[float] = None,
                       scale: float = 2.0) -> List[CheckResult]:
    """Monotonicity, cash invariance, F-locality and L0(F)-convexity of an arbitrary oracle.

    L0(F)-convexity is tested directly with random F-measurable weights and
    cross-checked against ordinary convexity plus locality.
    """
    if trials < 1:
        raise ValidationError("trials must be at least 1")
    tol = tol if tol is not None else get_config().tolerance.oracle
    n = algebra.atom_count

    monotone = CheckResult(f'axioms/{name}/monotone', 'monotonicity', trials=trials)
    cash = CheckResult(f'axioms/{name}/cash-invariance', 'cash invariance', trials=trials)
    l0_convex = CheckResult(f'axioms/{name}/l0-convex', 'L0(F)-convexity', trials=trials)
    convex = CheckResult(f'axioms/{name}/convex', 'ordinary convexity', trials=trials)

    for _ in range(trials):
        y = rng.normal(scale=scale, size=n)
        x = y + np.abs(rng.normal(scale=scale, size=n)) * (rng.random(n) < 0.5)
        fx, fy = f(x), f(y)
        if np.any(fx > fy + tol * (1 + np.abs(fy))):
            monotone.add_violation(Witness.atomwise('x >= y but f(x) > f(y)', fx, fy, algebra,
                                                    {'x': x, 'y': y}))

        m = algebra.random_measurable(rng, -3.0, 3.0)
        lhs, rhs = f(x + m), fx - m
        if not _close(lhs, rhs, tol):
            cash.add_violation(Witness.atomwise('f(x + m) != f(x) - m', lhs, rhs, algebra,
                                                {'x': x, 'm': m}))

        xi = algebra.random_measurable(rng, 0.0, 1.0)
        lhs = f(xi * x + (1 - xi) * y)
        rhs = xi * fx + (1 - xi) * fy
        if np.any(lhs > rhs + tol * (1 + np.abs(rhs))):
            l0_convex.add_violation(Witness.atomwise('f(xi x + (1-xi) y) > xi f(x) + (1-xi) f(y)',
                                                     lhs, rhs, algebra, {'x': x, 'y': y, 'xi': xi}))

        t = float(rng.uniform())
        lhs = f(t * x + (1 - t) * y)
        rhs = t * fx + (1 - t) * fy
        if np.any(lhs > rhs + tol * (1 + np.abs(rhs))):
            convex.add_violation(Witness.atomwise('f(t x + (1-t) y) > t f(x) + (1-t) f(y)',
                                                  lhs, rhs, algebra, {'x': x, 'y': y, 't': t}))

    local = is_local(f, locality_samples(algebra, rng, trials, scale), tol, name)
    local.check_id = f'axioms/{name}/local'

    cross = CheckResult(f'axioms/{name}/convex-local-equivalence',
                        'convex and F-local iff L0(F)-convex', trials=trials)
    both = convex.passed and local.passed
    cross.details = {'convex': convex.passed, 'local': local.passed, 'l0_convex': l0_convex.passed}
    if both != l0_convex.passed:
        cross.passed = False
        logger.warning(f"{name}: convex+local={both} but L0-convex={l0_convex.passed}")

    return [monotone.finish(), cash.finish(), local, l0_convex.finish(), convex.finish(), cross.finish()]


def axiom_check(spec: RiskMeasureSpec, trials: int, rng: np.random.Generator,
                tol: Optional[float] = None) -> List[CheckResult]:
    results = oracle_axiom_check(risk_oracle(spec), spec.algebra, spec.name, trials, rng, tol)
    results.append(finiteness_note(spec))
    return results


def finiteness_note(spec: RiskMeasureSpec) -> CheckResult:
    """Continuity from above and the Fatou property hold automatically on a finite space."""
    result = CheckResult(f'axioms/{spec.name}/fatou', 'Fatou property and continuity from above')
    result.details['status'] = 'satisfied by finiteness'
    return result.finish()


def family_ordering_check(algebra: SigmaAlgebra, betas, trials: int, rng: np.random.Generator,
                          tol: Optional[float] = None) -> List[CheckResult]:
    """-E[x|F] <= entropic <= worst case, entropic increasing in beta, and avar(1) = -E[x|F]."""
    tol = tol if tol is not None else get_config().tolerance.oracle
    betas = sorted(betas)
    neg = RiskMeasureSpec(RiskFamily.NEG_COND_EXPECT, algebra)
    worst = RiskMeasureSpec(RiskFamily.WORST_CASE, algebra)
    avar_one = RiskMeasureSpec(RiskFamily.AVAR, algebra, lam=1.0)
    entropics = [RiskMeasureSpec(RiskFamily.ENTROPIC, algebra, beta=b) for b in betas]

    ordering = CheckResult('families/ordering', 'mean <= entropic <= worst case', trials=trials)
    beta_mono = CheckResult('families/entropic-beta', 'entropic risk increases with beta', trials=trials)
    avar_mean = CheckResult('families/avar-one', 'avar at level 1 equals the negative mean', trials=trials)
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=algebra.atom_count)
        low, high = evaluate(neg, x), evaluate(worst, x)
        values = [evaluate(s, x) for s in entropics]
        for v in values:
            if np.any(low > v + tol) or np.any(v > high + tol):
                ordering.add_violation(Witness.atomwise('entropic outside [mean, worst case]', v, low,
                                                        algebra, {'x': x}))
        for a, b in zip(values, values[1:]):
            if np.any(a > b + tol):
                beta_mono.add_violation(Witness.atomwise('entropic decreased in beta', a, b, algebra,
                                                         {'x': x}))
        av = evaluate(avar_one, x)
        if np.any(np.abs(av - low) > 1e-12 * (1 + np.abs(low))):
            avar_mean.add_violation(Witness.atomwise('avar(1) != -E[x|F]', av, low, algebra, {'x': x}))
    return [ordering.finish(), beta_mono.finish(), avar_mean.finish()]


def avar_feasibility_check(spec: RiskMeasureSpec, trials: int, rng: np.random.Generator) -> CheckResult:
    """The greedy avar density satisfies 0 <= y' <= 1/lambda and E[y'|F] = 1."""
    if spec.family is not RiskFamily.AVAR:
        raise ValidationError("avar_feasibility_check needs an avar spec")
    algebra = spec.algebra
    result = CheckResult(f'families/{spec.name}/density', 'avar density feasibility', trials=trials)
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=algebra.atom_count)
        if rng.random() < 0.3:
            x = np.round(x)
        _, y_prime = avar_solution(x, spec.lam, algebra)
        mean = cond_expect(y_prime, algebra)
        ok = (np.all(y_prime >= 0) and np.all(y_prime <= 1 / spec.lam + 1e-12)
              and np.all(np.abs(mean - 1) <= 1e-12))
        if not ok:
            result.add_violation(Witness.atomwise('avar density infeasible', mean, np.ones_like(mean),
                                                  algebra, {'x': x, 'y_prime': y_prime}))
    return result.finish()

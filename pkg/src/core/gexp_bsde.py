"""Discrete g-expectations on binary trees and the dynamic risk measures they generate."""

import logging
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from ..models.report import CheckResult, Witness
from ..models.tree import BinaryTree, Driver, GSolution
from ..utils.config import get_config
from ..utils.errors import PreconditionError, ValidationError
from .conditional_norms import ConditionalNorm, cond_norm
from .prob_core import cond_expect
from .risk_library import oracle_axiom_check

logger = logging.getLogger(__name__)

PAYOFFS = ('brownian', 'call', 'put', 'abs', 'digital')


def backward_solve(tree: BinaryTree, driver: Driver, terminal) -> GSolution:
    """One-pass backward induction Z = (Yu - Yd) / (2 sqrt(dt)), Y = (Yu + Yd) / 2 + g(t, Z) dt."""
    terminal = tree.space.check_vector(terminal)
    dt = tree.dt
    Y: List[np.ndarray] = [None] * (tree.steps + 1)
    Z: List[np.ndarray] = [None] * tree.steps
    Y[tree.steps] = terminal.copy()
    for t in range(tree.steps - 1, -1, -1):
        up, down = Y[t + 1][0::2], Y[t + 1][1::2]
        Z[t] = (up - down) / (2 * np.sqrt(dt))
        Y[t] = 0.5 * (up + down) + driver(t * dt, Z[t]) * dt
    return GSolution(tree, Y, Z)


def rho(tree: BinaryTree, driver: Driver, x, t: int) -> np.ndarray:
    """rho_t(x) = E_g[-x | F_t], broadcast to the leaves."""
    tree.check_time(t)
    return backward_solve(tree, driver, -np.asarray(x, dtype=float)).y_at(t)


def lipschitz_constant(tree: BinaryTree, driver: Driver, t: int) -> float:
    return float(np.exp(8 * (1 + driver.mu ** 2) * (tree.horizon - t * tree.dt)))


def terminal_payoff(tree: BinaryTree, name: str, strike: float = 0.0) -> np.ndarray:
    """Named functional of B_T on the leaves."""
    b = tree.brownian(tree.steps)
    if name == 'brownian':
        return b
    if name == 'call':
        return np.maximum(b - strike, 0.0)
    if name == 'put':
        return np.maximum(strike - b, 0.0)
    if name == 'abs':
        return np.abs(b - strike)
    if name == 'digital':
        return (b > strike).astype(float)
    raise ValidationError(f"unknown payoff {name!r}; expected one of {list(PAYOFFS)}")


def driver_check(tree: BinaryTree, driver: Driver, rng: np.random.Generator,
                 samples: int = 200) -> List[CheckResult]:
    """g(t, 0) = 0 and mu-Lipschitz in z (preconditions), convex in z (reported)."""
    times = tree.dt * np.arange(tree.steps)
    normalized = CheckResult(f'gexp/{driver.name}/driver-zero', 'driver vanishes at z = 0', trials=len(times))
    lipschitz = CheckResult(f'gexp/{driver.name}/driver-lipschitz', 'driver is Lipschitz in z', trials=samples)
    convex = CheckResult(f'gexp/{driver.name}/driver-convex', 'driver is convex in z', trials=samples)
    at_zero = np.array([float(driver(t, np.zeros(1))[0]) for t in times])
    if np.any(at_zero != 0):
        normalized.add_violation(Witness.atomwise('g(t, 0) != 0', at_zero, np.zeros_like(at_zero)))
    for _ in range(samples):
        t = float(rng.choice(times))
        z = rng.normal(scale=5.0, size=3)
        g = driver(t, z)
        lhs, rhs = abs(g[0] - g[1]), driver.mu * abs(z[0] - z[1])
        if lhs > rhs + 1e-12 * (1 + rhs):
            lipschitz.add_violation(Witness.atomwise('|g(z0) - g(z1)| > mu |z0 - z1|', [lhs], [rhs],
                                                     inputs={'t': t, 'z': z}))
        w = float(rng.uniform())
        mix = driver(t, np.array([w * z[0] + (1 - w) * z[2]]))[0]
        bound = w * g[0] + (1 - w) * g[2]
        if mix > bound + 1e-12 * (1 + abs(bound)):
            convex.add_violation(Witness.atomwise('g(t, w z0 + (1-w) z2) > w g(z0) + (1-w) g(z2)',
                                                  [mix], [bound], inputs={'t': t, 'z': z, 'w': w}))
    if driver.mu * np.sqrt(tree.dt) > 1:
        logger.warning(f"{driver.name}: mu * sqrt(dt) = {driver.mu * np.sqrt(tree.dt):.3g} > 1, "
                       f"the scheme need not be monotone")
    return [normalized.finish(), lipschitz.finish(), convex.finish()]


def gexp_axiom_suite(tree: BinaryTree, driver: Driver, trials: int, rng: np.random.Generator,
                     t: int = 0, tol: Optional[float] = None) -> List[CheckResult]:
    """Conditional-risk axioms of rho_t plus the L2 Lipschitz bound with c = exp(8 (1 + mu^2) (T - t))."""
    tol = tol if tol is not None else get_config().tolerance.oracle
    tree.check_time(t)
    drivers = driver_check(tree, driver, rng)
    if not (drivers[0].passed and drivers[1].passed):
        raise PreconditionError(f"driver {driver.name} violates g(t, 0) = 0 or its Lipschitz bound")

    algebra = tree.algebra(t)
    name = f'rho{t}-{driver.name}-N{tree.steps}'
    results = drivers + oracle_axiom_check(lambda x: rho(tree, driver, x, t), algebra, name, trials, rng, tol)

    c = lipschitz_constant(tree, driver, t)
    norm = ConditionalNorm(2, algebra)
    bound = CheckResult(f'axioms/{name}/l2-lipschitz', 'L2 Lipschitz bound of the g-expectation', trials=trials)
    worst = 0.0
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=tree.leaf_count)
        y = x + rng.normal(scale=rng.uniform(0.01, 2.0), size=x.size)
        lhs = np.abs(rho(tree, driver, x, t) - rho(tree, driver, y, t))
        dist = cond_norm(x - y, norm)
        ratio = np.divide(lhs, dist, out=np.zeros_like(lhs), where=dist > 0)
        worst = max(worst, float(ratio.max()))
        if np.any(lhs > c * dist + tol):
            bound.add_violation(Witness.atomwise('|rho(x) - rho(y)| > c |||x - y|||_2', lhs, c * dist,
                                                 algebra, {'x': x, 'y': y}))
    bound.details.update({'constant': c, 'max_ratio': worst})
    results.append(bound.finish())
    return results


def comparison_check(tree: BinaryTree, lower: Driver, upper: Driver, trials: int, rng: np.random.Generator,
                     tol: float = 1e-12) -> CheckResult:
    """g1 <= g2 pointwise implies rho^g1 <= rho^g2 at every node."""
    result = CheckResult(f'gexp/comparison/{lower.name}<={upper.name}/N{tree.steps}',
                         'ordered drivers give ordered values', trials=trials)
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=tree.leaf_count)
        low, high = backward_solve(tree, lower, -x), backward_solve(tree, upper, -x)
        for t in range(tree.steps + 1):
            if np.any(low.Y[t] > high.Y[t] + tol * (1 + np.abs(high.Y[t]))):
                result.add_violation(Witness.atomwise(f'comparison fails at depth {t}', low.y_at(t),
                                                      high.y_at(t), tree.algebra(t), {'x': x}))
                break
    return result.finish()


def time_consistency_check(tree: BinaryTree, driver: Driver, trials: int, rng: np.random.Generator,
                           tol: float = 1e-12) -> CheckResult:
    """rho_s(-rho_t(x)) = rho_s(x) for s <= t."""
    result = CheckResult(f'gexp/{driver.name}/time-consistency/N{tree.steps}', 'time consistency', trials=trials)
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=tree.leaf_count)
        t = int(rng.integers(0, tree.steps + 1))
        s = int(rng.integers(0, t + 1))
        lhs = rho(tree, driver, -rho(tree, driver, x, t), s)
        rhs = rho(tree, driver, x, s)
        if np.any(np.abs(lhs - rhs) > tol * (1 + np.abs(rhs))):
            result.add_violation(Witness.atomwise(f'rho_{s}(-rho_{t}(x)) != rho_{s}(x)', lhs, rhs,
                                                  tree.algebra(s), {'x': x, 's': s, 't': t}))
    return result.finish()


def zero_driver_check(tree: BinaryTree, trials: int, rng: np.random.Generator,
                      tol: float = 1e-12) -> CheckResult:
    """With g = 0, rho_t(x) = -E[x | F_t] at every depth."""
    zero = Driver.named('zero')
    result = CheckResult(f'gexp/zero-driver/N{tree.steps}', 'zero driver gives the conditional expectation',
                         trials=trials)
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=tree.leaf_count)
        for t in range(tree.steps + 1):
            lhs = rho(tree, zero, x, t)
            rhs = -cond_expect(x, tree.algebra(t))
            if np.any(np.abs(lhs - rhs) > tol * (1 + np.abs(rhs))):
                result.add_violation(Witness.atomwise(f'rho_{t} != -E[x|F_{t}]', lhs, rhs, tree.algebra(t),
                                                      {'x': x}))
                break
    return result.finish()


def recursion_check(tree: BinaryTree, driver: Driver, trials: int, rng: np.random.Generator,
                    tol: float = 1e-12) -> CheckResult:
    result = CheckResult(f'gexp/{driver.name}/recursion/N{tree.steps}', 'backward recursion identity',
                         trials=trials)
    for _ in range(trials):
        terminal = rng.normal(scale=2.0, size=tree.leaf_count)
        residual = backward_solve(tree, driver, terminal).recursion_residual(driver)
        if residual > tol:
            result.add_violation(Witness.atomwise('recursion residual', [residual], [0.0],
                                                  inputs={'terminal': terminal}))
    return result.finish()


def convergence_study(driver: Driver, payoff: str, steps: Sequence[int], horizon: float = 1.0,
                      strike: float = 0.0) -> pd.DataFrame:
    """rho_0 of a payoff of B_T as the tree is refined."""
    rows = []
    previous = None
    for n in steps:
        tree = BinaryTree(int(n), horizon)
        value = float(rho(tree, driver, terminal_payoff(tree, payoff, strike), 0)[0])
        rows.append({
            'steps': int(n),
            'dt': tree.dt,
            'rho0': value,
            'change': np.nan if previous is None else value - previous,
        })
        previous = value
    table = pd.DataFrame(rows)
    logger.info(f"convergence study for {driver.name} / {payoff}:\n{table.to_string(index=False)}")
    return table

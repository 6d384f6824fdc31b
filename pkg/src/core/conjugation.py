"""Conditional Fenchel conjugation, dual representations and closed-function classification.

The pairing throughout is <x, y> = E[x y | F]. Dual variables of a cash
invariant monotone f live in {y <= 0, E[y|F] = -1}; off that set the
conjugate is +inf block by block.
"""

import logging
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import minimize
from scipy.special import softmax, xlogy

from ..models.report import CheckResult, Witness
from ..models.risk import (ConjugateValue, DomainClassification, DualDensity, RiskFamily,
                           RiskMeasureSpec, Subgradient, is_feasible_density)
from ..models.space import Indicator, SigmaAlgebra
from ..utils.config import get_config
from ..utils.errors import ConvergenceError, SolverError, ValidationError
from .bodies import PolytopeSet
from .prob_core import cond_expect, extended_close, is_local, pairing
from .risk_library import avar_solution, evaluate, risk_oracle
from .solvers import solve_lp

logger = logging.getLogger(__name__)

Oracle = Callable[[np.ndarray], np.ndarray]
FunctionLike = Union[RiskMeasureSpec, Oracle]

CLOSED_FORM_FAMILIES = (RiskFamily.NEG_COND_EXPECT, RiskFamily.ENTROPIC, RiskFamily.AVAR,
                        RiskFamily.WORST_CASE, RiskFamily.SCENARIO_ROBUST)


def _has_closed_form(f) -> bool:
    return isinstance(f, RiskMeasureSpec) and f.family in CLOSED_FORM_FAMILIES


def _resolve(f: FunctionLike, algebra: Optional[SigmaAlgebra]) -> Tuple[Oracle, SigmaAlgebra, str]:
    if isinstance(f, RiskMeasureSpec):
        return risk_oracle(f), f.algebra, f.name
    if algebra is None:
        raise ValidationError("an oracle needs an explicit algebra")
    return f, algebra, getattr(f, '__name__', 'oracle')


def closed_form_conjugate(spec: RiskMeasureSpec, y) -> np.ndarray:
    """f*(y) for the shipped convex families; +inf on blocks where y is outside the dual domain."""
    algebra = spec.algebra
    y = algebra.space.check_vector(y)
    tol = get_config().tolerance.feasibility
    feasible = is_feasible_density(y, algebra, tol)
    values = np.zeros(algebra.block_count)
    family = spec.family

    if family is RiskFamily.NEG_COND_EXPECT:
        for b, atoms in enumerate(algebra.blocks):
            feasible[b] &= bool(np.all(np.abs(y[atoms] + 1) <= tol))
    elif family is RiskFamily.ENTROPIC:
        neg = np.clip(-y, 0.0, None)
        entropy = cond_expect(xlogy(neg, neg), algebra) / spec.beta
        values = algebra.block_values(entropy)
    elif family is RiskFamily.AVAR:
        cap = 1.0 / spec.lam
        for b, atoms in enumerate(algebra.blocks):
            feasible[b] &= bool(np.all(-y[atoms] <= cap[atoms] + tol))
    elif family is RiskFamily.SCENARIO_ROBUST:
        for b, atoms in enumerate(algebra.blocks):
            if feasible[b]:
                hull = PolytopeSet(np.vstack([d.y[atoms] for d in spec.densities]))
                feasible[b] = hull.contains(y[atoms], tol)
    elif family is not RiskFamily.WORST_CASE:
        raise ValidationError(f"no closed-form conjugate for {family.value}")
    return algebra.broadcast(np.where(feasible, values, np.inf))


def _block_ascent(objective: Callable[[np.ndarray], float], dim: int, radius: float):
    """Coordinate grid ascent with step halving and a Powell polish on [-radius, radius]^dim."""
    cfg = get_config().solver
    x = np.zeros(dim)
    best = objective(x)
    lo, hi = -radius, radius
    step = (hi - lo) / (cfg.conjugate_grid_points - 1)
    for _ in range(cfg.conjugate_refinements + 1):
        for _sweep in range(50):
            improved = False
            for i in range(dim):
                half = step * (cfg.conjugate_grid_points - 1) / 2
                grid = np.clip(np.linspace(x[i] - half, x[i] + half, cfg.conjugate_grid_points), lo, hi)
                for value in grid:
                    trial = x.copy()
                    trial[i] = value
                    v = objective(trial)
                    if v > best + 1e-15:
                        best, x, improved = v, trial, True
            if not improved:
                break
        step /= 2
    if np.isfinite(best):
        res = minimize(lambda z: -objective(z), x, method='Powell', bounds=[(lo, hi)] * dim,
                       options={'xtol': 1e-10, 'ftol': 1e-13, 'maxfev': 20000})
        if np.isfinite(res.fun) and -res.fun > best:
            best, x = float(-res.fun), np.asarray(res.x, dtype=float)
    on_boundary = bool(np.any(np.abs(x) >= radius - step))
    return best, x, on_boundary


def brute_force_conjugate(f: Oracle, y, algebra: SigmaAlgebra) -> ConjugateValue:
    """Per-block sup of E[x y|F] - f(x) by grid ascent with radius doubling.

    A block is declared divergent (+inf) once the running sup passes the
    divergence threshold; a sup that keeps sitting on the boundary without
    improving is accepted as an asymptotic value.
    """
    cfg = get_config().solver
    opt_tol = get_config().tolerance.optimization
    y = algebra.space.check_vector(y)
    values = np.empty(algebra.block_count)
    maximizer = np.zeros(algebra.atom_count)
    for b, atoms in enumerate(algebra.blocks):
        c = algebra.block_weights(b)

        def objective(xb, _atoms=atoms, _c=c):
            x = np.zeros(algebra.atom_count)
            x[_atoms] = xb
            fx = float(f(x)[_atoms[0]])
            if fx == np.inf:
                return -np.inf
            return float(np.dot(_c, xb * y[_atoms])) - fx

        if objective(np.zeros(atoms.size)) == np.inf:
            values[b] = np.inf
            continue
        radius = cfg.conjugate_radius_base
        previous = None
        for _ in range(cfg.conjugate_max_expansions):
            best, xb, on_boundary = _block_ascent(objective, atoms.size, radius)
            if best > cfg.divergence_threshold:
                values[b] = np.inf
                break
            if not on_boundary or (previous is not None and best - previous <= opt_tol * (1 + abs(best))):
                values[b] = best
                maximizer[atoms] = xb
                break
            previous = best
            radius *= 2
        else:
            raise ConvergenceError(
                f"conjugate ascent on block {b} neither converged nor diverged "
                f"after {cfg.conjugate_max_expansions} radius expansions")
    logger.debug(f"brute-force conjugate block values: {values}")
    return ConjugateValue(algebra.broadcast(values), maximizer, method='grid-ascent')


def conjugate(f: FunctionLike, y, algebra: Optional[SigmaAlgebra] = None) -> ConjugateValue:
    """f*(y) = sup_x E[x y|F] - f(x), blockwise."""
    if _has_closed_form(f):
        return ConjugateValue(closed_form_conjugate(f, y), None, 'closed-form')
    oracle, algebra, _ = _resolve(f, algebra)
    return brute_force_conjugate(oracle, y, algebra)


def _entropic_block_dual(xb: np.ndarray, c: np.ndarray, beta: float) -> Tuple[float, np.ndarray]:
    """Maximize -sum w x - (1/beta) sum w log(w/c) over the simplex, via w = softmax(theta)."""
    def negative(theta):
        w = softmax(theta)
        value = -np.dot(w, xb) - np.sum(xlogy(w, w / c)) / beta
        g = xb + (np.log(np.clip(w / c, 1e-300, None)) + 1) / beta
        grad = w * (g - np.dot(w, g))
        return -value, grad

    res = minimize(negative, np.log(c), jac=True, method='L-BFGS-B',
                   options={'maxiter': get_config().solver.dual_iterations, 'gtol': 1e-12, 'ftol': 1e-15})
    w = softmax(res.x)
    return float(-res.fun), -w / c


def family_biconjugate(spec: RiskMeasureSpec, x) -> ConjugateValue:
    """f**(x) = sup_y E[x y|F] - f*(y) searched over the family's dual domain."""
    algebra = spec.algebra
    x = algebra.space.check_vector(x)
    values = np.empty(algebra.block_count)
    y_best = np.empty(algebra.atom_count)
    for b, atoms in enumerate(algebra.blocks):
        c = algebra.block_weights(b)
        xb = x[atoms]
        if spec.family is RiskFamily.NEG_COND_EXPECT:
            yb = -np.ones(atoms.size)
            values[b] = float(np.dot(c, xb * yb))
        elif spec.family is RiskFamily.ENTROPIC:
            values[b], yb = _entropic_block_dual(xb, c, spec.beta)
        elif spec.family in (RiskFamily.AVAR, RiskFamily.WORST_CASE):
            lower = -1.0 / spec.lam[atoms[0]] if spec.family is RiskFamily.AVAR else None
            res = solve_lp(-(c * xb), A_eq=c[None, :], b_eq=[-1.0],
                           bounds=[(lower, 0.0)] * atoms.size)
            if res.status != 0:
                raise SolverError(f"dual LP failed on block {b}")
            yb = np.asarray(res.x, dtype=float)
            values[b] = float(-res.fun)
        elif spec.family is RiskFamily.SCENARIO_ROBUST:
            candidates = [d.y[atoms] for d in spec.densities]
            scores = [float(np.dot(c, xb * cand)) for cand in candidates]
            k = int(np.argmax(scores))
            yb, values[b] = candidates[k], scores[k]
        else:
            raise ValidationError(f"no dual domain for {spec.family.value}")
        y_best[atoms] = yb
    return ConjugateValue(algebra.broadcast(values), y_best, 'dual-search')


def _density(theta: np.ndarray, algebra: SigmaAlgebra) -> np.ndarray:
    """y = -softmax(theta) / c on each block, so y <= 0 and E[y|F] = -1."""
    y = np.empty(algebra.atom_count)
    for b, atoms in enumerate(algebra.blocks):
        y[atoms] = -softmax(theta[atoms]) / algebra.block_weights(b)
    return y


def _dual_value(f: Oracle, x: np.ndarray, y: np.ndarray,
                algebra: SigmaAlgebra) -> Tuple[np.ndarray, np.ndarray]:
    """Block values of E[x y|F] - f*(y), with the conjugate maximizer at y."""
    conj = brute_force_conjugate(f, y, algebra)
    star = algebra.block_values(conj.value)
    paired = algebra.block_values(pairing(x, y, algebra))
    return np.where(star == np.inf, -np.inf, paired - star), conj.maximizer


def separated_blocks(f: Oracle, x: np.ndarray, start: np.ndarray, algebra: SigmaAlgebra,
                     blocks: np.ndarray, tol: float) -> np.ndarray:
    """Blocks where some u has E[x u|F] > sup over dom f of E[z u|F].

    Along such a u the dual objective grows without bound, so f**(x) = +inf.
    Candidate directions are u = c (x - z) with z the last support point found.
    """
    def domain_indicator(z):
        return np.where(np.asarray(f(z), dtype=float) == np.inf, np.inf, 0.0)

    certified = np.zeros(algebra.block_count, dtype=bool)
    pending = np.asarray(blocks, dtype=bool).copy()
    z = np.asarray(start, dtype=float).copy()
    for _ in range(get_config().solver.dual_patience):
        if not pending.any():
            break
        member = pending[algebra.labels]
        u = np.where(member, algebra.conditional_probs * (x - z), 0.0)
        support = brute_force_conjugate(domain_indicator, u, algebra)
        with np.errstate(invalid='ignore'):
            margin = algebra.block_values(pairing(x, u, algebra) - support.value)
        hit = pending & (margin > tol)
        certified |= hit
        pending &= ~hit
        z = np.where(member, support.maximizer, z)
    return certified


def dual_ascent_biconjugate(f: Oracle, x, algebra: SigmaAlgebra, rng: Optional[np.random.Generator] = None,
                            iterations: Optional[int] = None) -> ConjugateValue:
    """f**(x) = sup_y E[x y|F] - f*(y) by gradient ascent over feasible densities.

    Each block's density is y = -softmax(theta) / c. The Danskin gradient in
    the weights is x*(y) - x, where x*(y) attains the brute-force conjugate.
    Steps are dual_step / sqrt(k); a step on which the conjugate diverges is
    rejected and that block's step halved. A block stops after dual_patience
    iterations without improvement. Blocks where f(x) = -inf are -inf, and
    blocks where f(x) = +inf with a separating direction are +inf. Blocks
    where f* is +inf at every start density come out -inf.
    """
    cfg = get_config().solver
    opt_tol = get_config().tolerance.optimization
    x = algebra.space.check_vector(x)
    rng = rng if rng is not None else np.random.default_rng(0)
    iterations = iterations if iterations is not None else cfg.dual_iterations
    labels = algebra.labels
    fx = algebra.block_values(np.asarray(f(x), dtype=float))

    theta = np.log(algebra.conditional_probs)
    value, s = _dual_value(f, x, _density(theta, algebra), algebra)
    for _ in range(cfg.dual_restarts):
        stuck = value == -np.inf
        if not stuck.any():
            break
        trial = theta.copy()
        for b in np.flatnonzero(stuck):
            atoms = algebra.blocks[b]
            trial[atoms] = np.log(np.clip(rng.dirichlet(np.ones(atoms.size)), 1e-300, None))
        trial_value, trial_s = _dual_value(f, x, _density(trial, algebra), algebra)
        take = stuck & (trial_value > value)
        theta = np.where(take[labels], trial, theta)
        s = np.where(take[labels], trial_s, s)
        value = np.where(take, trial_value, value)

    separated = np.zeros(algebra.block_count, dtype=bool)
    outside = (fx == np.inf) & np.isfinite(value)
    if outside.any():
        separated = separated_blocks(f, x, s, algebra, outside, opt_tol)

    best, best_theta = value.copy(), theta.copy()
    active = np.isfinite(value) & ~separated & (fx != -np.inf)
    scale = np.ones(algebra.block_count)
    idle = np.zeros(algebra.block_count, dtype=int)
    k = 0
    while k < iterations and active.any():
        k += 1
        direction = np.zeros(algebra.atom_count)
        for b in np.flatnonzero(active):
            atoms = algebra.blocks[b]
            w = softmax(theta[atoms])
            g = s[atoms] - x[atoms]
            direction[atoms] = w * (g - np.dot(w, g))
        norms = np.array([np.linalg.norm(direction[atoms]) for atoms in algebra.blocks])
        active &= norms > opt_tol
        if not active.any():
            break
        step = cfg.dual_step / np.sqrt(k) * scale
        trial = np.where(active[labels], theta + step[labels] * direction, theta)
        trial_value, trial_s = _dual_value(f, x, _density(trial, algebra), algebra)
        accepted = active & np.isfinite(trial_value)
        scale[active & ~accepted] /= 2
        theta = np.where(accepted[labels], trial, theta)
        s = np.where(accepted[labels], trial_s, s)
        improved = accepted & (trial_value > best + opt_tol * (1 + np.abs(best)))
        gained = accepted & (trial_value > best)
        best = np.where(gained, trial_value, best)
        best_theta = np.where(gained[labels], trial, best_theta)
        idle = np.where(improved, 0, idle + 1)
        active &= idle < cfg.dual_patience

    out = np.where(separated, np.inf, best)
    out = np.where(fx == -np.inf, -np.inf, out)
    logger.debug(f"dual ascent stopped after {k} iterations: {out}")
    return ConjugateValue(algebra.broadcast(out), _density(best_theta, algebra), 'dual-ascent')


def biconjugate(f: FunctionLike, x, algebra: Optional[SigmaAlgebra] = None,
                rng: Optional[np.random.Generator] = None, iterations: Optional[int] = None) -> ConjugateValue:
    """f**(x): exact dual search for shipped convex families, dual ascent for opaque oracles."""
    if _has_closed_form(f):
        return family_biconjugate(f, x)
    oracle, algebra, _ = _resolve(f, algebra)
    return dual_ascent_biconjugate(oracle, x, algebra, rng, iterations)


def _maximizing_density(spec: RiskMeasureSpec, x: np.ndarray) -> np.ndarray:
    algebra = spec.algebra
    family = spec.family
    if family is RiskFamily.NEG_COND_EXPECT:
        return -np.ones(algebra.atom_count)
    if family is RiskFamily.ENTROPIC:
        y = np.empty(algebra.atom_count)
        for b, atoms in enumerate(algebra.blocks):
            w = algebra.block_weights(b) * np.exp(-spec.beta * (x[atoms] - x[atoms].min()))
            y[atoms] = -(w / w.sum()) / algebra.block_weights(b)
        return y
    if family is RiskFamily.AVAR:
        _, y_prime = avar_solution(x, spec.lam, algebra)
        return -y_prime
    if family is RiskFamily.WORST_CASE:
        y = np.zeros(algebra.atom_count)
        for b, atoms in enumerate(algebra.blocks):
            k = int(np.argmax(-x[atoms]))
            y[atoms[k]] = -1.0 / algebra.block_weights(b)[k]
        return y
    if family is RiskFamily.SCENARIO_ROBUST:
        scores = np.vstack([pairing(x, d.y, algebra) for d in spec.densities])
        best = np.argmax(scores, axis=0)
        return np.array([spec.densities[best[i]].y[i] for i in range(algebra.atom_count)])
    raise ValidationError(f"{family.value} has no dual representation")


def dual_representation(spec: RiskMeasureSpec, x) -> Tuple[np.ndarray, DualDensity]:
    """f(x) = max over feasible densities of E[x y|F] - f*(y), with the attaining density."""
    algebra = spec.algebra
    x = algebra.space.check_vector(x)
    y = _maximizing_density(spec, x)
    try:
        density = DualDensity(y, algebra)
    except ValidationError as e:
        raise SolverError(f"maximizing density for {spec.name} is infeasible: {e}") from e
    value = pairing(x, density.y, algebra) - closed_form_conjugate(spec, density.y)
    return value, density


def robust_representation(spec: RiskMeasureSpec, x) -> Tuple[np.ndarray, np.ndarray]:
    """f(x) = max_Q E_Q[-x|F] - alpha(Q); returns the value and the optimal measure's atom masses."""
    value, density = dual_representation(spec, x)
    return value, density.measure()


def penalty(spec: RiskMeasureSpec, density: DualDensity) -> np.ndarray:
    """alpha(Q) for dQ/dP = -y, which coincides with f*(y)."""
    return conjugate(spec, density.y).value


def penalty_of_measure(spec: RiskMeasureSpec, q) -> np.ndarray:
    return penalty(spec, DualDensity.from_measure(spec.algebra, q))


def subgradient_check(spec: RiskMeasureSpec, x, u, rng: np.random.Generator,
                      samples: Optional[int] = None, tol: Optional[float] = None) -> CheckResult:
    """E[(z - x) u|F] <= f(z) - f(x) on random z."""
    samples = samples if samples is not None else get_config().run.subgradient_samples
    tol = tol if tol is not None else get_config().tolerance.optimization
    algebra = spec.algebra
    x = np.asarray(x, dtype=float)
    fx = evaluate(spec, x)
    result = CheckResult(f'subgradient/{spec.name}', 'subgradient inequality', trials=samples)
    for _ in range(samples):
        z = x + rng.normal(scale=2.0, size=x.size)
        lhs = pairing(z - x, u, algebra)
        rhs = evaluate(spec, z) - fx
        if np.any(lhs > rhs + tol):
            result.add_violation(Witness.atomwise('E[(z-x)u|F] > f(z) - f(x)', lhs, rhs, algebra,
                                                  {'x': x, 'z': z, 'u': u}))
    return result.finish()


def subgradient(spec: RiskMeasureSpec, x, rng: Optional[np.random.Generator] = None,
                samples: Optional[int] = None) -> Subgradient:
    """The attaining dual density at x, verified as a subgradient."""
    _, density = dual_representation(spec, x)
    rng = rng if rng is not None else np.random.default_rng(0)
    check = subgradient_check(spec, x, density.y, rng, samples)
    if not check.passed:
        raise SolverError(f"dual maximizer of {spec.name} failed the subgradient inequality")
    return Subgradient(density.y.copy(), True, {'samples': check.trials})


def classify_domain(f: Oracle, probes: Sequence[np.ndarray], algebra: SigmaAlgebra) -> DomainClassification:
    """Blocks where some probe hits -inf (MI), where every probe is +inf (PI), and the rest (BP)."""
    if len(probes) == 0:
        raise ValidationError("classify_domain needs at least one probe")
    values = np.vstack([np.asarray(f(np.asarray(p, dtype=float)), dtype=float) for p in probes])
    mi = np.any(values == -np.inf, axis=0)
    pi = np.all(values == np.inf, axis=0) & ~mi
    bp = ~(mi | pi)
    return DomainClassification(Indicator(mi, algebra), Indicator(pi, algebra), Indicator(bp, algebra))


def closedness_check(f: FunctionLike, points: Sequence[np.ndarray], algebra: Optional[SigmaAlgebra], name: str,
                     family: Optional[RiskMeasureSpec] = None, rng: Optional[np.random.Generator] = None,
                     tol: Optional[float] = None, iterations: Optional[int] = None) -> List[CheckResult]:
    """f** <= f, f** = f for closed convex f, agreement with a family biconjugate, and MI/PI inheritance."""
    tol = tol if tol is not None else get_config().tolerance.optimization
    rng = rng if rng is not None else np.random.default_rng(0)
    oracle, algebra, _ = _resolve(f, algebra)
    classes = classify_domain(oracle, points, algebra)

    below = CheckResult(f'closedness/{name}/below', 'biconjugate is a minorant', trials=len(points))
    equal = CheckResult(f'closedness/{name}/closed', 'closed convex functions equal their biconjugate',
                        trials=len(points))
    inherit = CheckResult(f'closedness/{name}/inheritance', 'biconjugate keeps MI = -inf and PI = +inf',
                          trials=len(points))
    results = [below, equal, inherit]
    fam = None
    if family is not None:
        fam = CheckResult(f'closedness/{name}/family', 'biconjugate equals the convex family on BP',
                          trials=len(points))
        results.append(fam)

    gaps = []
    for x in points:
        x = np.asarray(x, dtype=float)
        fx = np.asarray(oracle(x), dtype=float)
        bi = biconjugate(f, x, algebra, rng, iterations).value
        with np.errstate(invalid='ignore'):
            too_high = (bi > fx + tol) & ~extended_close(bi, fx, tol)
            short = np.isfinite(fx) & (bi < fx - tol)
        if np.any(too_high):
            below.add_violation(Witness.atomwise('f** > f', bi, fx, algebra, {'x': x}))
        if not np.all(extended_close(bi, fx, tol)):
            equal.add_violation(Witness.atomwise('f** differs from f', bi, fx, algebra, {'x': x}))
            if short.any():
                gaps.append(float(np.max((fx - bi)[short])))
        if np.any(bi[classes.MI.member] != -np.inf) or np.any(bi[classes.PI.member] != np.inf):
            inherit.add_violation(Witness.atomwise('biconjugate lost the MI/PI pattern', bi, fx,
                                                   algebra, {'x': x}))
        if fam is not None:
            target = family_biconjugate(family, x).value
            mask = classes.BP.member & np.isfinite(fx)
            if np.any(np.abs(target - fx)[mask] > tol):
                fam.add_violation(Witness.atomwise('family biconjugate differs from f on BP', target, fx,
                                                   algebra, {'x': x}))
    equal.details['max_gap'] = max(gaps) if gaps else 0.0
    equal.details['classification'] = classes.to_dict()
    return [r.finish() for r in results]


def fenchel_young_check(spec: RiskMeasureSpec, trials: int, rng: np.random.Generator,
                        tol: Optional[float] = None) -> CheckResult:
    """E[x y|F] <= f(x) + f*(y), with equality at the attaining density."""
    tol = tol if tol is not None else get_config().tolerance.optimization
    algebra = spec.algebra
    result = CheckResult(f'conjugate/{spec.name}/fenchel-young', 'Fenchel-Young inequality', trials=trials)
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=algebra.atom_count)
        fx = evaluate(spec, x)
        y = DualDensity.random(algebra, rng).y
        lhs, rhs = pairing(x, y, algebra), fx + closed_form_conjugate(spec, y)
        if np.any(lhs > rhs + tol):
            result.add_violation(Witness.atomwise('E[xy|F] > f(x) + f*(y)', lhs, rhs, algebra,
                                                  {'x': x, 'y': y}))
        _, density = dual_representation(spec, x)
        lhs = pairing(x, density.y, algebra)
        rhs = fx + closed_form_conjugate(spec, density.y)
        if np.any(np.abs(lhs - rhs) > tol):
            result.add_violation(Witness.atomwise('equality fails at the attaining density', lhs, rhs,
                                                  algebra, {'x': x, 'y': density.y}))
    return result.finish()


def biconjugation_check(spec: RiskMeasureSpec, trials: int, rng: np.random.Generator,
                        tol: float = 1e-5) -> CheckResult:
    """|f**(x) - f(x)| stays within tolerance on random positions."""
    algebra = spec.algebra
    result = CheckResult(f'conjugate/{spec.name}/biconjugation', 'biconjugate recovers f', trials=trials)
    worst = 0.0
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=algebra.atom_count)
        fx = evaluate(spec, x)
        fxx = family_biconjugate(spec, x).value
        gap = float(np.max(np.abs(fxx - fx)))
        worst = max(worst, gap)
        if gap > tol:
            result.add_violation(Witness.atomwise('f** differs from f', fxx, fx, algebra, {'x': x}))
    result.details['max_gap'] = worst
    return result.finish()


def dual_representation_check(spec: RiskMeasureSpec, trials: int, rng: np.random.Generator,
                              tol: Optional[float] = None) -> CheckResult:
    """The representation value matches direct evaluation and every maximizer is feasible."""
    tol = tol if tol is not None else get_config().tolerance.optimization
    feas_tol = get_config().tolerance.feasibility
    algebra = spec.algebra
    exact = spec.family is RiskFamily.ENTROPIC
    result = CheckResult(f'conjugate/{spec.name}/dual-representation',
                         'dual representation over feasible densities', trials=trials)
    worst = 0.0
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=algebra.atom_count)
        fx = evaluate(spec, x)
        value, density = dual_representation(spec, x)
        gap = float(np.max(np.abs(value - fx)))
        worst = max(worst, gap)
        limit = min(tol, 1e-9) if exact else tol
        if gap > limit:
            result.add_violation(Witness.atomwise('representation value differs from f', value, fx,
                                                  algebra, {'x': x, 'y': density.y}))
        if density.max_violation() > feas_tol:
            result.add_violation(Witness.atomwise('maximizer infeasible', density.y, density.y, algebra,
                                                  {'x': x}))
    result.details['max_gap'] = worst
    return result.finish()


def feasible_set_equivalence_check(spec: RiskMeasureSpec, trials: int, rng: np.random.Generator,
                                   q: float = 2.0, candidates: int = 20,
                                   tol: Optional[float] = None) -> CheckResult:
    """Restricting the dual search to a moment ball around the maximizer leaves f unchanged."""
    tol = tol if tol is not None else get_config().tolerance.optimization
    algebra = spec.algebra
    result = CheckResult(f'conjugate/{spec.name}/moment-ball', 'moment-restricted dual sets give the same value',
                         trials=trials)
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=algebra.atom_count)
        fx = evaluate(spec, x)
        _, density = dual_representation(spec, x)
        gamma = cond_expect(np.abs(density.y) ** q, algebra) * (1 + rng.uniform(0, 2))
        best = np.full(algebra.atom_count, -np.inf)
        pool = [density.y] + [DualDensity.random(algebra, rng).y for _ in range(candidates)]
        for y in pool:
            inside = cond_expect(np.abs(y) ** q, algebra) <= gamma * (1 + 1e-12)
            score = pairing(x, y, algebra) - closed_form_conjugate(spec, y)
            best = np.where(inside, np.maximum(best, score), best)
        if np.any(np.abs(best - fx) > tol):
            result.add_violation(Witness.atomwise('restricted dual value differs from f', best, fx, algebra,
                                                  {'x': x, 'gamma': gamma}))
    return result.finish()


def conjugate_locality_check(spec: RiskMeasureSpec, trials: int, rng: np.random.Generator) -> CheckResult:
    """f* is itself F-local as a function of the dual variable."""
    algebra = spec.algebra
    samples = []
    for _ in range(trials):
        y = DualDensity.random(algebra, rng).y
        if rng.random() < 0.3:
            y = y + rng.normal(scale=0.5, size=y.size)
        samples.append((y, algebra.random_event(rng)))
    result = is_local(lambda y: closed_form_conjugate(spec, y), samples, name=f'conjugate-{spec.name}')
    result.check_id = f'conjugate/{spec.name}/local'
    return result


def conjugate_oracle_agreement_check(spec: RiskMeasureSpec, trials: int, rng: np.random.Generator,
                                     tol: float = 1e-5) -> CheckResult:
    """Closed-form conjugate against the brute-force ascent oracle on random feasible densities."""
    algebra = spec.algebra
    result = CheckResult(f'conjugate/{spec.name}/oracle-agreement', 'closed-form conjugate matches ascent',
                         trials=trials)
    oracle = risk_oracle(spec)
    for _ in range(trials):
        y = DualDensity.random(algebra, rng, concentration=4.0).y
        closed = closed_form_conjugate(spec, y)
        try:
            brute = brute_force_conjugate(oracle, y, algebra).value
        except ConvergenceError as e:
            result.add_violation(Witness.atomwise(f'ascent oracle did not settle: {e}', closed, closed,
                                                  algebra, {'y': y}))
            continue
        if not np.all(extended_close(closed, brute, tol * (1 + np.abs(np.where(np.isfinite(closed), closed, 0))))):
            result.add_violation(Witness.atomwise('closed form differs from ascent', closed, brute, algebra,
                                                  {'y': y}))
    return result.finish()

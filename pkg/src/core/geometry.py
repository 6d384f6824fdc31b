"""Stratified separation, random gauges, polars and support seminorms on product bodies."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Union

import numpy as np

from ..models.report import CheckResult, Witness
from ..models.space import Indicator, SigmaAlgebra
from ..utils.config import get_config
from ..utils.errors import BudgetExceededError, PreconditionError, ValidationError
from .bodies import ConvexBody, HalfspaceSet, PolytopeSet
from .conditional_norms import ConditionalNorm, random_distance
from .prob_core import hcc_hull

logger = logging.getLogger(__name__)


@dataclass
class SeparationCertificate:
    """Functional u (acting by z -> E[z u|F]), the strict set [d* > 0] and the per-atom margin."""

    functional: np.ndarray
    strict_set: Indicator
    margin: np.ndarray
    distance: np.ndarray

    def to_dict(self) -> dict:
        return {
            'functional': self.functional.tolist(),
            'strict_set': np.flatnonzero(self.strict_set.member).tolist(),
            'margin': self.margin.tolist(),
            'distance': self.distance.tolist(),
        }


def _unit(n: np.ndarray) -> np.ndarray:
    length = np.linalg.norm(n)
    return n / length if length > 0 else n


def separate(x, body: ConvexBody, norm: ConditionalNorm) -> SeparationCertificate:
    """Blockwise separating functional for x against a closed L0-convex body."""
    algebra = body.algebra
    x = algebra.space.check_vector(x)
    distance = random_distance(x, body, norm)
    d_blocks = algebra.block_values(distance)
    u = np.zeros(algebra.atom_count)
    margin = np.zeros(algebra.block_count)
    for b, (block_set, atoms) in enumerate(zip(body.blocks, algebra.blocks)):
        xb = x[atoms]
        if d_blocks[b] > 0:
            n = _unit(xb - block_set.project(xb))
        else:
            n = _unit(block_set.supporting_normal(xb))
        if not np.any(n):
            continue
        p_block = algebra.block_probs[b]
        u[atoms] = n / algebra.space.probs[atoms]
        margin[b] = (float(np.dot(xb, n)) - block_set.support(n)) / p_block
    strict = Indicator(d_blocks[algebra.labels] > 0, algebra)
    return SeparationCertificate(u, strict, algebra.broadcast(margin), distance)


def separation_check(x, body: ConvexBody, norm: ConditionalNorm, name: str = 'separation',
                     tol: Optional[float] = None) -> CheckResult:
    """Strict margin exactly on [d* > 0], zero gap elsewhere, strict set equal to non-membership."""
    tol = tol if tol is not None else get_config().tolerance.optimization
    algebra = body.algebra
    cert = separate(x, body, norm)
    result = CheckResult(f'separation/{name}', 'strict separation exactly where the distance is positive',
                         trials=1)
    outside = ~body.block_membership(x)
    strict = np.array([bool(cert.strict_set.member[atoms[0]]) for atoms in algebra.blocks])
    margin = algebra.block_values(cert.margin)
    bad = (strict & ~(margin > 1e-9)) | (~strict & (np.abs(margin) > tol)) | (strict != outside)
    if np.any(bad):
        result.add_violation(Witness.atomwise(
            'margin does not match the certificate set', cert.margin,
            algebra.broadcast(outside.astype(float)), algebra,
            {'x': np.asarray(x, dtype=float), 'u': cert.functional}))
    result.details['strict_blocks'] = np.flatnonzero(strict).tolist()
    return result.finish()


def separation_sweep(body: ConvexBody, norm: ConditionalNorm, trials: int, rng: np.random.Generator,
                     tol: Optional[float] = None) -> CheckResult:
    """separation_check over random positions, half of them members of the body."""
    algebra = body.algebra
    result = CheckResult(f'separation/{body.name}/sweep',
                         'strict separation exactly where the distance is positive', trials=trials)
    members = body.sample_members(rng, trials)
    strict_blocks = 0
    for k in range(trials):
        x = rng.normal(scale=3.0, size=algebra.atom_count)
        if members and k % 2 == 0:
            # member on some blocks, outside point on the rest
            inside = algebra.random_event(rng)
            x = inside.apply(members[k % len(members)]) + inside.complement().apply(x)
        single = separation_check(x, body, norm, name=body.name, tol=tol)
        strict_blocks += len(single.details['strict_blocks'])
        for witness in single.witnesses:
            result.add_violation(witness)
    result.details['strict_blocks'] = strict_blocks
    return result.finish()


def _require_gauge_body(body: ConvexBody):
    if not (body.claims_balanced and body.claims_absorbent):
        raise PreconditionError(f"gauge needs a body claimed balanced and absorbent ({body.name!r})")


def gauge(body: ConvexBody, x, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """p_U(x) = inf{t > 0 : x in t U}, blockwise by bisection on membership.

    When ``rng`` is given the claimed flags are verified by sampling first.
    """
    _require_gauge_body(body)
    if rng is not None:
        flags = body.verify_flags(rng)
        if not flags.passed:
            raise PreconditionError(f"body {body.name!r} failed flag verification")
    cfg = get_config().solver
    algebra = body.algebra
    x = algebra.space.check_vector(x)
    out = np.zeros(algebra.block_count)
    for b, (block_set, atoms) in enumerate(zip(body.blocks, algebra.blocks)):
        xb = x[atoms]
        if not np.any(xb):
            continue

        def member(t):
            return block_set.contains(xb / t, tol=1e-12)

        lo, hi = 0.0, 1.0
        while not member(hi):
            lo, hi = hi, hi * 2
            if hi > cfg.bisection_ceiling:
                raise PreconditionError(
                    f"no gauge bracket below {cfg.bisection_ceiling:g} on block {b}; body is not absorbent")
        while hi - lo > cfg.bisection_width * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if member(mid):
                hi = mid
            else:
                lo = mid
        out[b] = hi
    return algebra.broadcast(out)


def gauge_probes(body: ConvexBody, rng: np.random.Generator, count: int) -> List[np.ndarray]:
    """Members, scaled random vectors and boundary points of a gauge body."""
    algebra = body.algebra
    probes = body.sample_members(rng, count // 3)
    for _ in range(count // 3):
        probes.append(rng.normal(scale=2.0, size=algebra.atom_count))
    while len(probes) < count:
        z = rng.normal(size=algebra.atom_count)
        p = gauge(body, z)
        probes.append(np.divide(z, p, out=np.zeros_like(z), where=p > 0))
    probes.append(np.zeros(algebra.atom_count))
    return probes


def gauge_sandwich_check(body: ConvexBody, samples: Sequence[np.ndarray], tol: float = 1e-9,
                         margin: float = 1e-8) -> CheckResult:
    """interior => p < 1, p < 1 => member, member => p <= 1, on every block."""
    _require_gauge_body(body)
    algebra = body.algebra
    result = CheckResult(f'gauge/{body.name}/sandwich', 'gauge sandwich between interior and body',
                         trials=len(samples))
    for x in samples:
        p = algebra.block_values(gauge(body, x))
        member = body.block_membership(x, tol)
        interior = body.block_interior(x, margin)
        bad = (interior & ~(p < 1 - tol)) | ((p < 1) & ~member) | (member & ~(p <= 1 + tol))
        if np.any(bad):
            result.add_violation(Witness.atomwise('gauge sandwich broken', algebra.broadcast(p),
                                                  algebra.broadcast(member.astype(float)), algebra,
                                                  {'x': x, 'interior': interior.astype(int)}))
    return result.finish()


def gauge_seminorm_check(body: ConvexBody, trials: int, rng: np.random.Generator,
                         tol: Optional[float] = None) -> CheckResult:
    """Absolute homogeneity under F-measurable scalars and subadditivity of the gauge."""
    tol = tol if tol is not None else get_config().tolerance.oracle
    algebra = body.algebra
    result = CheckResult(f'gauge/{body.name}/seminorm', 'gauge is an L0-seminorm', trials=trials)
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=algebra.atom_count)
        y = rng.normal(scale=2.0, size=algebra.atom_count)
        xi = algebra.random_measurable(rng, -3.0, 3.0)
        px, py = gauge(body, x), gauge(body, y)
        lhs, rhs = gauge(body, xi * x), np.abs(xi) * px
        if np.any(np.abs(lhs - rhs) > tol * (1 + rhs)):
            result.add_violation(Witness.atomwise('p(xi x) != |xi| p(x)', lhs, rhs, algebra,
                                                  {'x': x, 'xi': xi}))
        lhs, rhs = gauge(body, x + y), px + py
        if np.any(lhs > rhs + tol * (1 + rhs)):
            result.add_violation(Witness.atomwise('p(x + y) > p(x) + p(y)', lhs, rhs, algebra,
                                                  {'x': x, 'y': y}))
    return result.finish()


GeneratorSet = Union[Sequence[np.ndarray], ConvexBody]


def _block_generators(A: GeneratorSet, algebra: Optional[SigmaAlgebra]):
    if isinstance(A, ConvexBody):
        per_block = []
        for b, block_set in enumerate(A.blocks):
            verts = block_set.vertices()
            if verts is None:
                raise ValidationError(f"body {A.name!r} block {b} has no vertex description")
            per_block.append(np.asarray(verts, dtype=float))
        return A.algebra, per_block
    if algebra is None:
        raise ValidationError("a generator list needs an explicit algebra")
    if len(A) == 0:
        raise ValidationError("polar needs a nonempty generator set")
    stack = np.vstack([algebra.space.check_vector(a) for a in A])
    return algebra, [stack[:, atoms] for atoms in algebra.blocks]


def polar(A: GeneratorSet, algebra: Optional[SigmaAlgebra] = None, name: str = 'polar') -> ConvexBody:
    """A0 = {y : |E[a y|F]| <= 1 for all a in A} as a half-space body."""
    algebra, per_block = _block_generators(A, algebra)
    blocks = []
    for b, gens in enumerate(per_block):
        rows = gens * algebra.block_weights(b)
        rows = rows[np.any(rows != 0, axis=1)]
        G = np.vstack([rows, -rows]) if len(rows) else np.zeros((0, gens.shape[1]))
        blocks.append(HalfspaceSet(G, np.ones(G.shape[0]), gens.shape[1]))
    return ConvexBody(algebra, tuple(blocks), claims_balanced=True, claims_absorbent=True, name=name)


def balanced_hull_blocks(generators: Sequence[np.ndarray], algebra: SigmaAlgebra,
                         budget: Optional[int] = None) -> List[PolytopeSet]:
    """Per-block balanced convex hull of the concatenation hull of the generators."""
    hull = hcc_hull(generators, algebra)
    budget = budget if budget is not None else get_config().solver.hull_budget
    if hull.size > budget:
        raise BudgetExceededError(f"concatenation hull has {hull.size} elements, budget is {budget}")
    return [PolytopeSet(np.vstack([choices, -choices])) for choices in hull.block_choices]


def bipolar_check(generators: Sequence[np.ndarray], algebra: SigmaAlgebra, rng: np.random.Generator,
                  probes: int = 1000, tol: Optional[float] = None, name: str = 'bipolar',
                  budget: Optional[int] = None) -> CheckResult:
    """Two-sided agreement of A00 with the closed balanced convex concatenation hull of A."""
    tol = tol if tol is not None else get_config().tolerance.optimization
    hull_blocks = balanced_hull_blocks(generators, algebra, budget)
    polar_body = polar(generators, algebra)
    result = CheckResult(f'bipolar/{name}', 'bipolar equals the closed balanced convex concatenation hull')
    boundary = 0
    for b, (hull, halfspace, atoms) in enumerate(zip(hull_blocks, polar_body.blocks, algebra.blocks)):
        c = algebra.block_weights(b)
        scale = max(float(np.max(np.abs(hull.points))), 1.0) * 1.5
        candidates = [v for v in hull.points]
        candidates += list(hull.sample(rng, probes // 2))
        candidates += list(rng.uniform(-scale, scale, size=(probes - probes // 2, atoms.size)))
        for k, z in enumerate(candidates):
            result.trials += 1
            s = max(halfspace.support(c * z), halfspace.support(-c * z))
            is_vertex = k < len(hull.points)
            if is_vertex:
                agree = s <= 1 + tol
            elif s <= 1 - tol:
                agree = hull.contains(z, 1e-9)
            elif s >= 1 + tol:
                agree = not hull.contains(z, 1e-12)
            else:
                boundary += 1
                continue
            if not agree:
                full = np.zeros(algebra.atom_count)
                full[atoms] = z
                result.add_violation(Witness.atomwise(
                    f'block {b}: bipolar membership (sup pairing {s:.6g}) disagrees with hull',
                    full, full, algebra, {'block': b}))
    result.details['boundary_probes'] = boundary
    return result.finish()


def support_seminorm(x, A: GeneratorSet, algebra: Optional[SigmaAlgebra] = None) -> np.ndarray:
    """||x||_A = sup_{a in A} |E[x a|F]| per block."""
    if isinstance(A, ConvexBody):
        algebra = A.algebra
        sets = list(A.blocks)
    else:
        algebra, per_block = _block_generators(A, algebra)
        sets = [PolytopeSet(g) for g in per_block]
    x = algebra.space.check_vector(x)
    out = np.empty(algebra.block_count)
    for b, (block_set, atoms) in enumerate(zip(sets, algebra.blocks)):
        direction = algebra.block_weights(b) * x[atoms]
        value = max(block_set.support(direction), block_set.support(-direction))
        if not np.isfinite(value):
            raise ValidationError(f"support seminorm needs a bounded body (block {b} is unbounded)")
        out[b] = value
    return algebra.broadcast(out)


def support_seminorm_check(generators: Sequence[np.ndarray], algebra: SigmaAlgebra, trials: int,
                           rng: np.random.Generator, name: str = 'support') -> List[CheckResult]:
    """||.||_A equals the seminorm of its bipolar hull, and is local under indicators."""
    hull_blocks = balanced_hull_blocks(generators, algebra)
    hull_body = ConvexBody(algebra, tuple(hull_blocks), claims_balanced=True, name=f'{name}-hull')
    same = CheckResult(f'support/{name}/bipolar', 'support seminorm equals that of its bipolar', trials=trials)
    local = CheckResult(f'support/{name}/local', 'support seminorm commutes with indicators', trials=trials)
    for _ in range(trials):
        x = rng.normal(scale=2.0, size=algebra.atom_count)
        lhs, rhs = support_seminorm(x, generators, algebra), support_seminorm(x, hull_body)
        if np.any(np.abs(lhs - rhs) > 1e-9 * (1 + rhs)):
            same.add_violation(Witness.atomwise('||x||_A != ||x||_A00', lhs, rhs, algebra, {'x': x}))
        event = algebra.random_event(rng)
        lhs = support_seminorm(event.apply(x), generators, algebra)
        rhs = event.apply(support_seminorm(x, generators, algebra))
        if np.any(lhs != rhs):
            local.add_violation(Witness.atomwise('||I_A x||_A != I_A ||x||_A', lhs, rhs, algebra, {'x': x}))
    return [same.finish(), local.finish()]


def polar_checks(generators: Sequence[np.ndarray], algebra: SigmaAlgebra, rng: np.random.Generator,
                 probes: int = 200, name: str = 'polar') -> List[CheckResult]:
    """Antitonicity (A in B => B0 in A0) and polar of A equal to polar of its balanced convex hull."""
    generators = [np.asarray(g, dtype=float) for g in generators]
    extra = [rng.normal(size=algebra.atom_count) for _ in range(2)]
    small, large = polar(generators, algebra), polar(generators + extra, algebra)
    hull_generators = []
    for _ in range(len(generators) * 3):
        weights = rng.dirichlet(np.ones(len(generators)))
        signs = rng.choice([-1.0, 1.0], size=len(generators))
        hull_generators.append((weights * signs) @ np.vstack(generators))
    hulled = polar(generators + hull_generators, algebra)

    antitone = CheckResult(f'polar/{name}/antitone', 'polar is antitone', trials=probes)
    hull_same = CheckResult(f'polar/{name}/hull', 'polar of a set equals polar of its balanced convex hull',
                            trials=probes)
    for _ in range(probes):
        y = rng.normal(scale=rng.uniform(0.1, 3.0), size=algebra.atom_count)
        if large.contains(y) and not small.contains(y):
            antitone.add_violation(Witness.atomwise('y in B0 but not in A0', y, y, algebra))
        if small.contains(y, 1e-9) != hulled.contains(y, 1e-9):
            if small.contains(y, 1e-7) == hulled.contains(y, 1e-7):
                continue
            hull_same.add_violation(Witness.atomwise('polar membership changed under hull', y, y, algebra))
    return [antitone.finish(), hull_same.finish()]

"""Convex bodies with product structure across F-blocks.

A ``ConvexBody`` is a tuple of per-block convex sets living in the
within-block atom coordinates. Membership, projection and support are all
computed block by block, which is what makes every body closed under
gluing along F-partitions.
"""

import itertools
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..models.report import CheckResult, Witness
from ..models.space import SigmaAlgebra
from ..utils.config import get_config
from ..utils.errors import ValidationError
from .solvers import (hull_residual, norm_distance_generic, norm_distance_lp,
                      project_onto_hull, solve_lp, solve_qp)

logger = logging.getLogger(__name__)

UNBOUNDED_BOX = 1e9


def weighted_norm(diff: np.ndarray, weights: np.ndarray, p: float) -> float:
    """(sum w |d|^p)^(1/p), or max |d| for p = inf."""
    diff = np.abs(np.asarray(diff, dtype=float))
    if np.isinf(p):
        return float(diff.max()) if diff.size else 0.0
    return float(np.sum(weights * diff ** p) ** (1.0 / p))


class BlockSet(ABC):
    """A closed convex set in the coordinates of one F-block."""

    dim: int

    @abstractmethod
    def contains(self, y: np.ndarray, tol: float = 1e-9) -> bool:
        ...

    @abstractmethod
    def scaled(self, t: float) -> 'BlockSet':
        """The set t * self for t > 0."""

    def strictly_contains(self, y: np.ndarray, margin: float = 1e-8) -> bool:
        """Interior test: every point y +- margin * e_i is a member."""
        y = np.asarray(y, dtype=float)
        for i in range(self.dim):
            for sign in (1.0, -1.0):
                probe = y.copy()
                probe[i] += sign * margin
                if not self.contains(probe, tol=0.0):
                    return False
        return True

    def project(self, x: np.ndarray) -> np.ndarray:
        raise ValidationError(f"{type(self).__name__} does not support projection")

    def distance(self, x: np.ndarray, weights: np.ndarray, p: float) -> float:
        raise ValidationError(f"{type(self).__name__} does not support distances")

    def support(self, n: np.ndarray) -> float:
        """sup over the set of <n, y>."""
        raise ValidationError(f"{type(self).__name__} does not support the support function")

    def supporting_normal(self, x: np.ndarray) -> np.ndarray:
        """An outward normal at a boundary member x, or zeros when x is interior."""
        raise ValidationError(f"{type(self).__name__} does not support supporting normals")

    def vertices(self) -> Optional[np.ndarray]:
        return None

    def sample(self, rng: np.random.Generator, count: int, scale: float = 4.0) -> np.ndarray:
        """Members found by rejection sampling from the cube [-scale, scale]^dim."""
        candidates = rng.uniform(-scale, scale, size=(count * 10, self.dim))
        kept = [c for c in candidates if self.contains(c)]
        return np.array(kept[:count]).reshape(-1, self.dim)


@dataclass
class BoxSet(BlockSet):
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValidationError("box bounds must be vectors of equal length")
        if np.any(self.lower > self.upper):
            raise ValidationError("box lower bound exceeds upper bound")
        self.dim = self.lower.size

    def contains(self, y, tol=1e-9):
        y = np.asarray(y, dtype=float)
        return bool(np.all(y >= self.lower - tol) and np.all(y <= self.upper + tol))

    def scaled(self, t):
        return BoxSet(self.lower * t, self.upper * t)

    def project(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def distance(self, x, weights, p):
        # clipping is optimal for every coordinatewise-monotone norm
        return weighted_norm(np.asarray(x, dtype=float) - self.project(x), weights, p)

    def support(self, n):
        n = np.asarray(n, dtype=float)
        with np.errstate(invalid='ignore'):
            terms = np.where(n > 0, n * self.upper, np.where(n < 0, n * self.lower, 0.0))
        return float(np.sum(terms))

    def supporting_normal(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        n = np.zeros(self.dim)
        n[x >= self.upper - tol] = 1.0
        n[x <= self.lower + tol] = -1.0
        if np.all(self.upper - self.lower <= tol):
            n[:] = 0.0
        return n

    def vertices(self):
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            return None
        corners = itertools.product(*[(lo, hi) if hi > lo else (lo,)
                                      for lo, hi in zip(self.lower, self.upper)])
        return np.array(list(corners), dtype=float)

    def sample(self, rng, count, scale=4.0):
        lo = np.maximum(self.lower, -scale)
        hi = np.minimum(self.upper, scale)
        return rng.uniform(lo, hi, size=(count, self.dim))


@dataclass
class PolytopeSet(BlockSet):
    """Convex hull of finitely many points."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise ValidationError("polytope needs at least one generator point")
        if not np.all(np.isfinite(pts)):
            raise ValidationError("polytope generators must be finite")
        self.points = np.unique(pts, axis=0)
        self.dim = self.points.shape[1]

    def contains(self, y, tol=1e-9):
        y = np.asarray(y, dtype=float)
        if self.points.shape[0] == 1:
            return bool(np.all(np.abs(y - self.points[0]) <= tol))
        return hull_residual(y, self.points) <= max(tol, 1e-12)

    def scaled(self, t):
        return PolytopeSet(self.points * t)

    def project(self, x):
        proj, _ = project_onto_hull(np.asarray(x, dtype=float), self.points)
        return proj

    def distance(self, x, weights, p):
        x = np.asarray(x, dtype=float)
        if p == 2:
            proj, _ = project_onto_hull(x, self.points, weights)
            return weighted_norm(x - proj, weights, 2)
        if p == 1 or np.isinf(p):
            return norm_distance_lp(x, weights, p, points=self.points)
        m = self.points.shape[0]
        return norm_distance_generic(
            x, weights, p, self.points.T, np.full(m, 1.0 / m),
            [{'type': 'eq', 'fun': lambda v: np.sum(v) - 1.0}], [(0, None)] * m,
            get_config().solver.generic_p_max_iter)

    def support(self, n):
        return float(np.max(self.points @ np.asarray(n, dtype=float)))

    def supporting_normal(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        centroid = self.points.mean(axis=0)
        res = solve_lp(-(x - centroid), A_ub=self.points - x, b_ub=np.zeros(len(self.points)),
                       bounds=[(-1.0, 1.0)] * self.dim)
        if res.status != 0 or -res.fun <= tol:
            return np.zeros(self.dim)
        return np.asarray(res.x, dtype=float)

    def vertices(self):
        return self.points

    def sample(self, rng, count, scale=4.0):
        weights = rng.dirichlet(np.ones(len(self.points)), size=count)
        return weights @ self.points


@dataclass
class HalfspaceSet(BlockSet):
    """Intersection of half-spaces {y : Gy <= h}; an empty G is the whole block."""

    G: np.ndarray
    h: np.ndarray
    dim: int = 0

    def __post_init__(self):
        self.G = np.asarray(self.G, dtype=float).reshape(-1, self.dim)
        self.h = np.asarray(self.h, dtype=float).reshape(-1)
        if self.G.shape[0] != self.h.size:
            raise ValidationError("half-space matrix and offsets have different lengths")

    def contains(self, y, tol=1e-9):
        if self.G.shape[0] == 0:
            return True
        return bool(np.all(self.G @ np.asarray(y, dtype=float) <= self.h + tol))

    def scaled(self, t):
        return HalfspaceSet(self.G, self.h * t, self.dim)

    def project(self, x):
        return self._weighted_projection(np.asarray(x, dtype=float), np.ones(self.dim))

    def _weighted_projection(self, x, weights):
        if self.contains(x, tol=0.0):
            return x.copy()
        return solve_qp(np.diag(weights), -weights * x, G=self.G, h=self.h)

    def distance(self, x, weights, p):
        x = np.asarray(x, dtype=float)
        if p == 2:
            return weighted_norm(x - self._weighted_projection(x, weights), weights, 2)
        if p == 1 or np.isinf(p):
            return norm_distance_lp(x, weights, p, G=self.G, h=self.h)
        return norm_distance_generic(
            x, weights, p, np.eye(self.dim), self._weighted_projection(x, weights),
            [{'type': 'ineq', 'fun': lambda v: self.h - self.G @ v}], None,
            get_config().solver.generic_p_max_iter)

    def support(self, n):
        n = np.asarray(n, dtype=float)
        if not np.any(n):
            return 0.0
        if self.G.shape[0] == 0:
            return float('inf')
        # a huge box stands in for unboundedness; hitting it means +inf
        res = solve_lp(-n, A_ub=self.G, b_ub=self.h,
                       bounds=[(-UNBOUNDED_BOX, UNBOUNDED_BOX)] * self.dim)
        if res.status == 3 or np.any(np.abs(res.x) >= UNBOUNDED_BOX * (1 - 1e-9)):
            return float('inf')
        return float(-res.fun)

    def supporting_normal(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        if self.G.shape[0] == 0:
            return np.zeros(self.dim)
        active = self.G @ x >= self.h - tol
        if not np.any(active):
            return np.zeros(self.dim)
        return self.G[active].sum(axis=0)


class MembershipSet(BlockSet):
    """A block set known only through a membership oracle."""

    def __init__(self, oracle: Callable[[np.ndarray], bool], dim: int):
        self.oracle = oracle
        self.dim = dim

    def contains(self, y, tol=1e-9):
        return bool(self.oracle(np.asarray(y, dtype=float)))

    def scaled(self, t):
        return MembershipSet(lambda y, _o=self.oracle, _t=t: _o(y / _t), self.dim)


@dataclass
class ConvexBody:
    """Product of per-block closed convex sets, with claimed balance/absorbency flags."""

    algebra: SigmaAlgebra
    blocks: Tuple[BlockSet, ...]
    claims_balanced: bool = False
    claims_absorbent: bool = False
    name: str = 'body'

    def __post_init__(self):
        self.blocks = tuple(self.blocks)
        if len(self.blocks) != self.algebra.block_count:
            raise ValidationError(
                f"body {self.name!r} has {len(self.blocks)} block sets, "
                f"algebra has {self.algebra.block_count} blocks")
        for b, (block_set, atoms) in enumerate(zip(self.blocks, self.algebra.blocks)):
            if block_set.dim != atoms.size:
                raise ValidationError(
                    f"body {self.name!r} block {b} has dimension {block_set.dim}, "
                    f"block has {atoms.size} atoms")

    @classmethod
    def box(cls, algebra: SigmaAlgebra, lower, upper, **kwargs) -> 'ConvexBody':
        lower = np.broadcast_to(np.asarray(lower, dtype=float), (algebra.atom_count,))
        upper = np.broadcast_to(np.asarray(upper, dtype=float), (algebra.atom_count,))
        return cls(algebra, tuple(BoxSet(lower[atoms], upper[atoms]) for atoms in algebra.blocks),
                   **kwargs)

    @classmethod
    def linf_ball(cls, algebra: SigmaAlgebra, radius=1.0, name: str = 'linf-ball') -> 'ConvexBody':
        """Unit ball of the conditional L-infinity norm, scaled by an F-measurable radius."""
        radius = np.broadcast_to(np.asarray(radius, dtype=float), (algebra.atom_count,))
        algebra.require_measurable(radius, "ball radius")
        return cls.box(algebra, -radius, radius, claims_balanced=True,
                       claims_absorbent=bool(np.all(radius > 0)), name=name)

    @classmethod
    def from_generators(cls, algebra: SigmaAlgebra, generators: Sequence[np.ndarray],
                        **kwargs) -> 'ConvexBody':
        """Per-block convex hull of the generators' block restrictions."""
        if len(generators) == 0:
            raise ValidationError("body needs at least one generator")
        stack = np.vstack([algebra.space.check_vector(g) for g in generators])
        return cls(algebra, tuple(PolytopeSet(stack[:, atoms]) for atoms in algebra.blocks),
                   **kwargs)

    @classmethod
    def from_block_points(cls, algebra: SigmaAlgebra, block_points: Sequence[Sequence],
                          **kwargs) -> 'ConvexBody':
        """Per-block convex hull of explicitly listed within-block points."""
        return cls(algebra, tuple(PolytopeSet(np.atleast_2d(np.asarray(pts, dtype=float)))
                                  for pts in block_points), **kwargs)

    def restrict(self, x, b: int) -> np.ndarray:
        return np.asarray(x, dtype=float)[self.algebra.blocks[b]]

    def block_membership(self, x, tol: float = 1e-9) -> np.ndarray:
        return np.array([s.contains(self.restrict(x, b), tol) for b, s in enumerate(self.blocks)])

    def contains(self, x, tol: float = 1e-9) -> bool:
        return bool(self.block_membership(x, tol).all())

    def block_interior(self, x, margin: float = 1e-8) -> np.ndarray:
        return np.array([s.strictly_contains(self.restrict(x, b), margin)
                         for b, s in enumerate(self.blocks)])

    def scaled(self, xi) -> 'ConvexBody':
        """The body xi * self for an F-measurable xi > 0."""
        xi = np.broadcast_to(np.asarray(xi, dtype=float), (self.algebra.atom_count,))
        self.algebra.require_measurable(xi, "scaling factor")
        if np.any(xi <= 0):
            raise ValidationError("scaling factor must be strictly positive")
        factors = self.algebra.block_values(xi)
        return ConvexBody(self.algebra, tuple(s.scaled(float(t)) for s, t in zip(self.blocks, factors)),
                          self.claims_balanced, self.claims_absorbent, f'{self.name}*xi')

    def sample_members(self, rng: np.random.Generator, count: int) -> List[np.ndarray]:
        """Members glued from per-block samples."""
        per_block = [s.sample(rng, count) for s in self.blocks]
        count = min(len(p) for p in per_block)
        out = []
        for k in range(count):
            x = np.empty(self.algebra.atom_count)
            for atoms, pts in zip(self.algebra.blocks, per_block):
                x[atoms] = pts[k]
            out.append(x)
        return out

    def verify_flags(self, rng: np.random.Generator, samples: int = 50,
                     tol: float = 1e-9) -> CheckResult:
        """Check convexity and the claimed balance/absorbency flags by sampling."""
        result = CheckResult(check_id=f'body-flags/{self.name}', anchor='L0-convex, balanced, absorbent body')
        members = self.sample_members(rng, samples)
        for x, y in zip(members[::2], members[1::2]):
            xi = self.algebra.random_measurable(rng, 0.0, 1.0)
            z = xi * x + (1 - xi) * y
            result.trials += 1
            if not self.contains(z, tol):
                result.add_violation(Witness.atomwise('stratified convex combination left the body',
                                                      z, z, self.algebra, {'x': x, 'y': y, 'xi': xi}))
        if self.claims_balanced:
            for x in members:
                eta = self.algebra.random_measurable(rng, -1.0, 1.0)
                result.trials += 1
                if not self.contains(eta * x, tol):
                    result.add_violation(Witness.atomwise('eta * x left the body for |eta| <= 1',
                                                          eta * x, x, self.algebra, {'eta': eta}))
        if self.claims_absorbent:
            interior = self.block_interior(np.zeros(self.algebra.atom_count))
            result.trials += 1
            if not interior.all():
                zero = np.zeros(self.algebra.atom_count)
                result.add_violation(Witness.atomwise(
                    'origin is not interior on some block (body is not absorbent)',
                    self.algebra.broadcast(interior.astype(float)), zero + 1.0, self.algebra))
        result.details['members_sampled'] = len(members)
        return result.finish()

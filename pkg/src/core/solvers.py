"""Thin wrappers around the LP/QP back ends used by the geometry and conjugation code."""

import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from quadprog import solve_qp as _solve_qp
from scipy.optimize import linprog, minimize

from ..utils.config import get_config
from ..utils.errors import ConvergenceError, SolverError

logger = logging.getLogger(__name__)

LP_OPTIONS = {'primal_feasibility_tolerance': 1e-10, 'dual_feasibility_tolerance': 1e-10}


def solve_qp(P: np.ndarray, q: np.ndarray, G: Optional[np.ndarray] = None,
             h: Optional[np.ndarray] = None, A: Optional[np.ndarray] = None,
             b: Optional[np.ndarray] = None) -> np.ndarray:
    """Minimize 1/2 x'Px + q'x subject to Gx <= h and Ax = b (Goldfarb-Idnani)."""
    n = q.size
    qp_G = 0.5 * (P + P.T)
    qp_a = -np.asarray(q, dtype=float)
    C_blocks, b_blocks, meq = [], [], 0
    if A is not None:
        C_blocks.append(np.atleast_2d(A))
        b_blocks.append(np.atleast_1d(b))
        meq = C_blocks[0].shape[0]
    if G is not None and len(G):
        C_blocks.append(-np.atleast_2d(G))
        b_blocks.append(-np.atleast_1d(h))
    if C_blocks:
        qp_C = np.vstack(C_blocks).T
        qp_b = np.hstack(b_blocks)
    else:
        qp_C = np.zeros((n, 1))
        qp_b = np.array([-1.0])
    try:
        solution, _, _, iterations, _, _ = _solve_qp(qp_G, qp_a, qp_C, qp_b, meq)
    except ValueError as e:
        raise SolverError(f"quadratic program failed: {e}") from e
    cap = get_config().solver.projection_max_iter
    if iterations[0] > cap:
        raise ConvergenceError(f"quadratic program needed {iterations[0]} iterations, cap is {cap}")
    return solution


def solve_lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None):
    """Minimize c'x with HiGHS; returns the scipy result, with status 3 meaning unbounded."""
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method='highs', options={**LP_OPTIONS, 'maxiter': get_config().solver.projection_max_iter})
    if res.status == 1:
        raise ConvergenceError(f"linear program hit the iteration cap: {res.message}")
    if res.status not in (0, 3):
        raise SolverError(f"linear program failed (status {res.status}): {res.message}")
    return res


def hull_residual(point: np.ndarray, points: np.ndarray) -> float:
    """L1 distance from ``point`` to conv(points), by LP with slack variables."""
    m, d = points.shape
    # variables: lambda (m), s_plus (d), s_minus (d)
    c = np.concatenate([np.zeros(m), np.ones(2 * d)])
    A_eq = np.vstack([
        np.hstack([points.T, np.eye(d), -np.eye(d)]),
        np.concatenate([np.ones(m), np.zeros(2 * d)])[None, :],
    ])
    b_eq = np.concatenate([point, [1.0]])
    res = solve_lp(c, A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * (m + 2 * d))
    return float(res.fun)


def project_onto_hull(point: np.ndarray, points: np.ndarray,
                      weights: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Weighted Euclidean projection onto conv(points); returns (projection, barycentric weights)."""
    m, d = points.shape
    w = np.ones(d) if weights is None else np.asarray(weights, dtype=float)
    if m == 1:
        return points[0].copy(), np.ones(1)
    P = (points * w) @ points.T
    ridge = 1e-10 * max(np.trace(P), 1.0)
    P = P + ridge * np.eye(m)
    q = -(points * w) @ point
    lam = solve_qp(P, q, G=-np.eye(m), h=np.zeros(m), A=np.ones((1, m)), b=np.array([1.0]))
    lam = np.clip(lam, 0.0, None)
    lam /= lam.sum()
    lam = _polish_face(point, points, w, lam)
    return lam @ points, lam


def _polish_face(point, points, w, lam, active_tol: float = 1e-9):
    """Exact projection onto the affine hull of the active face, kept when it stays feasible."""
    active = np.flatnonzero(lam > active_tol)
    if active.size < 2:
        return lam
    V = points[active]
    k = active.size
    sw = np.sqrt(w)
    # KKT system for min ||W^(1/2)(V'mu - x)||^2 s.t. sum(mu) = 1
    M = (V * w) @ V.T
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = 2 * M
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.concatenate([2 * (V * w) @ point, [1.0]])
    sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    mu = sol[:k]
    if np.any(mu < -1e-12) or not np.isfinite(mu).all():
        return lam
    before = np.sum((sw * (lam @ points - point)) ** 2)
    candidate = np.zeros_like(lam)
    candidate[active] = np.clip(mu, 0.0, None)
    candidate /= candidate.sum()
    after = np.sum((sw * (candidate @ points - point)) ** 2)
    return candidate if after <= before else lam


def norm_distance_lp(point: np.ndarray, weights: np.ndarray, p: float,
                     points: Optional[np.ndarray] = None,
                     G: Optional[np.ndarray] = None, h: Optional[np.ndarray] = None) -> float:
    """Weighted L1 or L-infinity distance to conv(points) or to {y : Gy <= h}, by LP."""
    d = point.size
    if points is not None:
        m = points.shape[0]
        n_coord = m
        to_y = points.T
        extra_eq = (np.concatenate([np.ones(m), np.zeros(d if p == 1 else 1)])[None, :], [1.0])
        coord_bounds = [(0, None)] * m
    else:
        n_coord = d
        to_y = np.eye(d)
        extra_eq = None
        coord_bounds = [(None, None)] * d
    if p == 1:
        n_slack = d
        c = np.concatenate([np.zeros(n_coord), weights])
        S = np.eye(d)
    else:
        n_slack = 1
        c = np.concatenate([np.zeros(n_coord), [1.0]])
        S = np.ones((d, 1))
    # |y - x| <= slack, componentwise
    A_ub = np.vstack([
        np.hstack([to_y, -S]),
        np.hstack([-to_y, -S]),
    ])
    b_ub = np.concatenate([point, -point])
    if G is not None:
        A_ub = np.vstack([A_ub, np.hstack([G, np.zeros((G.shape[0], n_slack))])])
        b_ub = np.concatenate([b_ub, h])
    A_eq = b_eq = None
    if extra_eq is not None:
        A_eq = np.atleast_2d(extra_eq[0])
        b_eq = np.asarray(extra_eq[1])
    res = solve_lp(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                   bounds=coord_bounds + [(0, None)] * n_slack)
    if res.status != 0:
        raise SolverError("distance LP did not reach an optimum")
    return max(float(res.fun), 0.0)


def norm_distance_generic(point: np.ndarray, weights: np.ndarray, p: float,
                          to_y: np.ndarray, start: np.ndarray, constraints: Sequence[dict],
                          bounds, max_iter: int) -> float:
    """Weighted L^p distance for 1 < p < inf, p != 2, by SLSQP; ``y = to_y @ v``."""
    def objective(v):
        return float(np.sum(weights * np.abs(to_y @ v - point) ** p))

    res = minimize(objective, start, method='SLSQP', constraints=list(constraints),
                   bounds=bounds, options={'maxiter': max_iter, 'ftol': 1e-14})
    # status 8: the line search stalled at machine precision, the point is kept
    if res.status == 8:
        logger.debug(f"SLSQP distance solve stopped early: {res.message}")
    elif not res.success:
        raise ConvergenceError(f"SLSQP distance solve did not converge: {res.message}")
    return float(max(res.fun, 0.0) ** (1.0 / p))

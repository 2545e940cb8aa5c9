"""Minimum-distance barrier on the configuration obstacle.

The robot/obstacle distance equals the distance from the origin to the
configuration obstacle translated by ``-p``. Its minimizer ``z*`` (the
critical point) gives the barrier value, the unit normal ``n = -z*/|z*|``
(gradient w.r.t. position) and a feature-dependent curvature matrix used by
the second-order constraint.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

import numpy as np

from . import kernels
from .geometry import ConfigObstacle

log = logging.getLogger(__name__)

ACTIVE_TOL = 1e-7
# below this distance -z*/|z*| is dominated by roundoff
NORMAL_TOL = 1e-7


class Feature(enum.Enum):
    VERTEX = "vertex"
    EDGE = "edge"
    INTERIOR = "interior"


class InsideObstacle(ValueError):
    """The robot reference point lies inside the configuration obstacle."""


@dataclass(frozen=True)
class MinDistSolution:
    z_star: np.ndarray
    lambda_star: np.ndarray
    active_rows: tuple
    feature: Feature
    dist: float
    degenerate: bool = False


@dataclass(frozen=True)
class BarrierEval:
    h: float
    n: np.ndarray
    H: np.ndarray
    feature: Feature
    obstacle_index: int
    z_star: np.ndarray
    dist: float


@dataclass(frozen=True)
class CBFConstraint:
    """Half-plane ``coeff_u @ u >= rhs`` on the input."""

    coeff_u: np.ndarray
    rhs: float

    def satisfied(self, u, tol: float = 0.0) -> bool:
        return float(self.coeff_u @ np.asarray(u, dtype=float)) >= self.rhs - tol

    def slack(self, u) -> float:
        return float(self.coeff_u @ np.asarray(u, dtype=float)) - self.rhs


def solve_min_dist(co: ConfigObstacle, p) -> MinDistSolution:
    """Project the origin onto the configuration obstacle at position ``p``.

    The closest point is found by scanning the polygon's edges; active rows
    and their multipliers are then recovered from the KKT stationarity
    condition ``2 z + Ac_I^T lam_I = 0``.
    """
    px, py = float(p[0]), float(p[1])
    inside, zx, zy, edge, _ = kernels.get().project_origin(co.vertices0, co.Ac, co.bc0, px, py)
    if inside:
        return MinDistSolution(np.zeros(2), np.zeros(0), (), Feature.INTERIOR, 0.0)
    z = np.array([zx, zy])
    bc = co.bc0 - co.Ac @ np.array([px, py])
    gap = np.abs(co.Ac @ z - bc)
    active = np.nonzero(gap <= ACTIVE_TOL * (1.0 + np.abs(bc)))[0]
    if len(active) == 0:
        active = np.array([edge])
    degenerate = False
    if len(active) == 1:
        a = co.Ac[active[0]]
        lam = np.array([-2.0 * float(a @ z)])
        feature = Feature.EDGE
    else:
        if len(active) > 2:
            degenerate = True
        lam_all, *_ = np.linalg.lstsq(co.Ac[active].T, -2.0 * z, rcond=None)
        if len(active) > 2:
            keep = np.sort(np.argsort(-lam_all)[:2])
            log.debug("min-dist degeneracy: %d active rows, keeping %s",
                      len(active), active[keep])
            active = active[keep]
            lam_all = np.linalg.solve(co.Ac[active].T, -2.0 * z)
        lam = lam_all
        feature = Feature.VERTEX
    return MinDistSolution(z, lam, tuple(int(a) for a in active), feature,
                           float(np.hypot(zx, zy)), degenerate)


def signed_distance(co: ConfigObstacle, p) -> float:
    """Distance from robot to obstacle, negative penetration depth on overlap."""
    sol = solve_min_dist(co, p)
    if sol.feature is not Feature.INTERIOR:
        return sol.dist
    return -float(np.min(co.bc0 - co.Ac @ np.asarray(p, dtype=float)))


def barrier(co: ConfigObstacle, p, d_safe: float = 0.0, index: int | None = None) -> BarrierEval:
    sol = solve_min_dist(co, p)
    if sol.feature is Feature.INTERIOR or sol.dist == 0.0:
        raise InsideObstacle(f"robot overlaps obstacle {co.source}")
    z, r = sol.z_star, sol.dist
    n = -z / r
    if sol.feature is Feature.VERTEX:
        H = (np.eye(2) - np.outer(n, n)) / r
    else:
        H = np.zeros((2, 2))
    return BarrierEval(r - d_safe, n, H, sol.feature,
                       co.source if index is None else index, z, r)


def face_barrier(co: ConfigObstacle, p, d_safe: float = 0.0,
                 index: int | None = None) -> BarrierEval:
    """Barrier of the single most separating face of the obstacle.

    ``h`` is the signed distance to that face's line (minus ``d_safe``) and
    ``n`` its outward normal. Outside the obstacle this lower-bounds the
    true distance, so keeping it nonnegative is conservative; inside it is
    minus the smallest penetration depth and a row built from it pushes the
    robot back out.
    """
    bc = co.bc0 - co.Ac @ np.asarray(p, dtype=float)
    r = int(np.argmin(bc))
    n = co.Ac[r].copy()
    return BarrierEval(-float(bc[r]) - d_safe, n, np.zeros((2, 2)), Feature.INTERIOR,
                       co.source if index is None else index, np.zeros(2), 0.0)


def robust_barrier(co: ConfigObstacle, p, d_safe: float = 0.0,
                   index: int | None = None) -> BarrierEval:
    """`barrier`, switching to `face_barrier` on overlap or when the
    distance is too small for the normal to be trusted."""
    try:
        be = barrier(co, p, d_safe, index)
    except InsideObstacle:
        return face_barrier(co, p, d_safe, index)
    if be.dist < NORMAL_TOL:
        return face_barrier(co, p, d_safe, index)
    return be


def first_order_constraint(be: BarrierEval, f_at_x, g_at_x, k: float) -> CBFConstraint:
    """``n^T f + n^T g u + k h >= 0`` as a row on ``u``.

    ``f_at_x``/``g_at_x`` are the position components of the drift and input
    matrix (the barrier depends on position only).
    """
    f = np.asarray(f_at_x, dtype=float)[:2]
    g = np.asarray(g_at_x, dtype=float)[:2]
    return CBFConstraint(g.T @ be.n, float(-be.n @ f - k * be.h))


def hocbf_constraint(be: BarrierEval, v, k1: float, k2: float) -> CBFConstraint:
    """Second-order row for ``p'' = u``:
    ``v^T H v + n^T u + (k1 + k2) n^T v + k1 k2 h >= 0``."""
    v = np.asarray(v, dtype=float)
    rhs = -float(v @ be.H @ v) - (k1 + k2) * float(be.n @ v) - k1 * k2 * be.h
    return CBFConstraint(be.n.copy(), rhs)


def psi1(be: BarrierEval, v, k1: float) -> float:
    return float(be.n @ np.asarray(v, dtype=float)) + k1 * be.h

"""Convex polygons in the plane: V/H representations, Minkowski sums and
configuration obstacles.

Points are plain ``numpy`` arrays of shape ``(2,)``. Polygons are immutable
value objects; every H-representation row is a unit outward normal so that
offsets and dual variables carry length units.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

GEOM_TOL = 1e-9


class GeometryError(ValueError):
    pass


class DegenerateInput(GeometryError):
    pass


class UnboundedSet(GeometryError):
    pass


class EmptySet(GeometryError):
    pass


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


@dataclass(frozen=True, eq=False)
class VPolytope:
    """Convex polygon given by its vertices in counterclockwise order."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float).reshape(-1, 2)
        if len(v) < 3:
            raise DegenerateInput("a polygon needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise GeometryError("non-finite vertex")
        k = len(v)
        for i in range(k):
            if np.linalg.norm(v[i] - v[(i + 1) % k]) <= GEOM_TOL:
                raise DegenerateInput(f"duplicate vertex at index {i}")
            if _cross(v[i - 1], v[i], v[(i + 1) % k]) <= 0.0:
                raise DegenerateInput(
                    f"vertex {i} breaks strict counterclockwise convexity")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return len(self.vertices)

    def translate(self, t) -> "VPolytope":
        return VPolytope(self.vertices + np.asarray(t, dtype=float))

    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    def same_as(self, other: "VPolytope", tol: float = GEOM_TOL) -> bool:
        """Equality up to cyclic rotation of the vertex list."""
        a, b = self.vertices, other.vertices
        if a.shape != b.shape:
            return False
        for shift in range(len(b)):
            if np.allclose(a, np.roll(b, shift, axis=0), atol=tol, rtol=0):
                return True
        return False


@dataclass(frozen=True, eq=False)
class HPolytope:
    """Polygon ``{y : A y <= b}`` with unit-norm rows."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        A = np.array(self.A, dtype=float).reshape(-1, 2)
        b = np.array(self.b, dtype=float).reshape(-1)
        if len(A) != len(b):
            raise GeometryError("A and b row counts differ")
        norms = np.linalg.norm(A, axis=1)
        if np.any(np.abs(norms - 1.0) > GEOM_TOL):
            raise GeometryError("H-representation rows must be unit normals")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @classmethod
    def normalized(cls, A, b) -> "HPolytope":
        """Build from arbitrary (nonzero) rows, scaling each to unit norm."""
        A = np.asarray(A, dtype=float).reshape(-1, 2)
        b = np.asarray(b, dtype=float).reshape(-1)
        norms = np.linalg.norm(A, axis=1)
        if np.any(norms <= GEOM_TOL):
            raise DegenerateInput("zero row in H-representation")
        return cls(A / norms[:, None], b / norms)

    def __len__(self):
        return len(self.b)


@dataclass(frozen=True, eq=False)
class ConfigObstacle:
    """Configuration obstacle of one robot/obstacle pair.

    Rows ``Ac`` and offsets ``bc0`` describe the obstacle at robot position
    zero; at position ``p`` the offsets are ``bc0 - Ac @ p``. Row ``r`` is the
    supporting line of the edge ``vertices0[r] -> vertices0[r + 1]``.
    """

    Ac: np.ndarray
    bc0: np.ndarray
    vertices0: np.ndarray
    source: int = 0

    def __post_init__(self):
        for name in ("Ac", "bc0", "vertices0"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def offsets(self, p) -> np.ndarray:
        return self.bc0 - self.Ac @ np.asarray(p, dtype=float)

    def at(self, p) -> HPolytope:
        return HPolytope(self.Ac, self.offsets(p))

    @property
    def polygon(self) -> VPolytope:
        return VPolytope(self.vertices0)


def convex_hull(points) -> VPolytope:
    """Counterclockwise hull of a point set (monotone chain).

    Collinear boundary points are dropped so the result is strictly convex.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        raise DegenerateInput("need at least 3 points")
    uniq = sorted({(float(x), float(y)) for x, y in pts})
    # merge near-duplicates so tolerance-level jitter cannot create slivers
    merged = [uniq[0]]
    for q in uniq[1:]:
        if abs(q[0] - merged[-1][0]) > GEOM_TOL or abs(q[1] - merged[-1][1]) > GEOM_TOL:
            merged.append(q)
    if len(merged) < 3:
        raise DegenerateInput("fewer than 3 distinct points")
    scale = max(1.0, max(abs(c) for q in merged for c in q))
    eps = GEOM_TOL * scale * scale

    def half(seq):
        chain = []
        for q in seq:
            while len(chain) >= 2 and _cross(chain[-2], chain[-1], q) <= eps:
                chain.pop()
            chain.append(q)
        return chain

    lower = half(merged)
    upper = half(reversed(merged))
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegenerateInput("all points are collinear")
    return VPolytope(np.array(hull))


def v_to_h(P: VPolytope) -> HPolytope:
    v = P.vertices
    edges = np.roll(v, -1, axis=0) - v
    normals = np.column_stack([edges[:, 1], -edges[:, 0]])
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    b = np.einsum("ij,ij->i", normals, v)
    return HPolytope(normals, b)


def h_to_v(P: HPolytope) -> VPolytope:
    """Vertices of a bounded H-polygon, ordered counterclockwise.

    Redundant rows are tolerated; the vertex set is formed by the pairwise
    row intersections that satisfy every row.
    """
    A, b = P.A, P.b
    if len(b) < 3:
        raise UnboundedSet("fewer than 3 half-planes cannot bound a polygon")
    ang = np.sort(np.arctan2(A[:, 1], A[:, 0]))
    gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
    if np.max(gaps) >= np.pi - 1e-12:
        raise UnboundedSet("normals do not positively span the plane")
    scale = max(1.0, float(np.max(np.abs(b))))
    cand = []
    for i, j in combinations(range(len(b)), 2):
        M = A[[i, j]]
        det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
        if abs(det) <= 1e-12:
            continue
        y = np.linalg.solve(M, b[[i, j]])
        if np.all(A @ y <= b + GEOM_TOL * scale):
            cand.append(y)
    if len(cand) < 3:
        raise EmptySet("half-planes have empty (or degenerate) intersection")
    try:
        return convex_hull(cand)
    except DegenerateInput as exc:
        raise EmptySet("intersection has no interior") from exc


def _points(P) -> np.ndarray:
    if isinstance(P, VPolytope):
        return P.vertices
    return np.asarray(P, dtype=float).reshape(-1, 2)


def reflect(P: VPolytope) -> VPolytope:
    # negation is a rotation by pi, so counterclockwise order survives
    return VPolytope(-P.vertices)


def minkowski_sum(P, Q) -> VPolytope:
    """Minkowski sum of two convex point sets.

    Either argument may be a `VPolytope` or a bare ``(k, 2)`` array of
    points (a single point gives a translation).
    """
    sums = (_points(P)[:, None, :] + _points(Q)[None, :, :]).reshape(-1, 2)
    return convex_hull(sums)


def configuration_obstacle(robot_shape_at_origin, obstacle: VPolytope,
                           source: int = 0) -> ConfigObstacle:
    """Obstacle grown by the reflected robot body.

    The robot placed at ``p`` overlaps ``obstacle`` iff ``p`` lies in the
    returned set. ``robot_shape_at_origin`` may also be a bare point set,
    e.g. ``[[0, 0]]`` for a point robot.
    """
    co = minkowski_sum(obstacle, -_points(robot_shape_at_origin))
    H = v_to_h(co)
    return ConfigObstacle(H.A, H.b, co.vertices, source)


def contains(P: HPolytope, y, tol: float = 0.0) -> bool:
    y = np.asarray(y, dtype=float)
    return bool(np.all(P.A @ y <= P.b + tol))


def point_segment_distance(q, a, b) -> float:
    q, a, b = (np.asarray(t, dtype=float) for t in (q, a, b))
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0.0 else min(1.0, max(0.0, float((q - a) @ ab) / denom))
    return float(np.linalg.norm(q - (a + t * ab)))


def _separated(P: np.ndarray, Q: np.ndarray) -> bool:
    for poly in (P, Q):
        edges = np.roll(poly, -1, axis=0) - poly
        normals = np.column_stack([edges[:, 1], -edges[:, 0]])
        for nrm in normals:
            if np.max(P @ nrm) < np.min(Q @ nrm) or np.max(Q @ nrm) < np.min(P @ nrm):
                return True
    return False


def polygon_distance_oracle(P: VPolytope, Q: VPolytope) -> float:
    """Brute-force distance between two convex polygons (0 if they meet).

    Checks every vertex of one polygon against every edge of the other; kept
    deliberately naive since it serves as a reference for the fast path.
    """
    Pv, Qv = P.vertices, Q.vertices
    if not _separated(Pv, Qv):
        return 0.0
    best = np.inf
    for src, dst in ((Pv, Qv), (Qv, Pv)):
        k = len(dst)
        for q in src:
            for i in range(k):
                best = min(best, point_segment_distance(q, dst[i], dst[(i + 1) % k]))
    return float(best)


def box(xmin: float, ymin: float, xmax: float, ymax: float) -> VPolytope:
    return VPolytope([[xmin, ymin], [xmax, ymin], [xmax, ymax], [xmin, ymax]])

"""Randomized self-checks against independent brute-force oracles.

Each suite draws its cases from a seeded generator and reports the largest
discrepancy it saw; ``run_suite`` is what ``milpcbf verify`` calls.

Oracles used here never go through the code paths they check:

gradients / hessians
    central finite differences of the barrier value and normal
geometry
    closest vertex/edge feature pair on the configuration obstacle, and
    the direct robot/obstacle polygon distance
milp
    enumeration of every binary assignment, each LP solved by vertex
    enumeration
qp
    enumeration of active sets for the filter QP
hocbf
    finite differences of ``psi1`` along the double-integrator flow
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .cbf import Feature, barrier, hocbf_constraint, psi1, solve_min_dist
from .geometry import (VPolytope, configuration_obstacle, convex_hull, point_segment_distance,
                       polygon_distance_oracle)
from .milp import LinearProgram, MILPProblem, Status, solve_milp
from .safety_filter import FilterConfig, filter as safety_filter
from .cbf import CBFConstraint

FD_STEP = 1e-5

TOLERANCES = {
    "gradients": 1e-5,
    "hessians": 1e-4,
    "geometry": 1e-8,
    "milp": 1e-6,
    "qp": 1e-7,
    "hocbf": 1e-4,
}

DEFAULT_CASES = {
    "gradients": 1000,
    "hessians": 1000,
    "geometry": 1000,
    "milp": 30,
    "qp": 500,
    "hocbf": 200,
}


@dataclass
class SuiteReport:
    suite: str
    cases: int
    max_error: float
    tol: float
    seconds: float
    detail: str = ""
    extras: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.cases > 0 and self.max_error <= self.tol

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        extra = f"  {self.detail}" if self.detail else ""
        return (f"[{mark}] {self.suite}: {self.cases} cases, max error {self.max_error:.3e} "
                f"(tol {self.tol:.0e}), {self.seconds:.2f} s{extra}")


# ---------------------------------------------------------------- generators

def random_polygon(rng, radius: float, n: int | None = None, center=(0.0, 0.0)) -> VPolytope:
    """Convex polygon from jittered points on a circle (3 to 8 vertices)."""
    n = int(rng.integers(3, 9)) if n is None else n
    while True:
        ang = np.sort(rng.uniform(0, 2 * np.pi, n))
        rad = radius * rng.uniform(0.6, 1.0, n)
        pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)]) + np.asarray(center)
        try:
            P = convex_hull(pts)
        except ValueError:
            continue
        if len(P.vertices) >= 3:
            return P


def random_configuration(rng, h_min: float = 0.0, h_max: float = 2.0):
    """Robot, obstacle, configuration obstacle and a robot position with
    distance in ``(h_min, h_max)``."""
    while True:
        robot = random_polygon(rng, rng.uniform(0.2, 1.0))
        obs = random_polygon(rng, rng.uniform(0.3, 1.5))
        co = configuration_obstacle(robot, obs)
        ang = rng.uniform(0, 2 * np.pi)
        p = rng.uniform(0.5, 3.5) * np.array([np.cos(ang), np.sin(ang)])
        sol = solve_min_dist(co, p)
        if sol.feature is Feature.INTERIOR:
            continue
        if h_min < sol.dist < h_max:
            return robot, obs, co, p


# ------------------------------------------------------------------- oracles

def feature_pair_distance(co, p) -> float:
    """Distance from the origin to the configuration obstacle moved by ``-p``,
    by scanning its edges; 0 if the origin is inside."""
    V = co.vertices0 - np.asarray(p, dtype=float)
    k = len(V)
    inside = True
    for i in range(k):
        a, b = V[i], V[(i + 1) % k]
        if (b[0] - a[0]) * (-a[1]) - (b[1] - a[1]) * (-a[0]) < 0:
            inside = False
    if inside:
        return 0.0
    return min(point_segment_distance(np.zeros(2), V[i], V[(i + 1) % k]) for i in range(k))


def lp_vertex_oracle(c, G, g, lo, hi):
    """Minimize ``c@y`` over ``{G y <= g, lo <= y <= hi}`` (bounded) by
    enumerating every basic solution. Returns ``(value, y)`` or ``None``."""
    d = len(c)
    R = np.vstack([G, np.eye(d), -np.eye(d)])
    r = np.concatenate([g, hi, -lo])
    best = None
    for S in itertools.combinations(range(len(r)), d):
        A = R[list(S)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        y = np.linalg.solve(A, r[list(S)])
        if np.all(R @ y <= r + 1e-9):
            val = float(c @ y)
            if best is None or val < best[0] - 1e-12:
                best = (val, y)
    return best


def milp_enumeration_oracle(c_y, c_t, G, H, g, lo, hi):
    """Brute force over all binary vectors ``t`` of ``min c_y@y + c_t@t``
    s.t. ``G y + H t <= g``, ``lo <= y <= hi``.

    Same basic-solution enumeration as `lp_vertex_oracle`; only the
    right-hand side depends on ``t``, so each basis is factored once.
    """
    d, k = len(c_y), len(c_t)
    R = np.vstack([G, np.eye(d), -np.eye(d)])
    combos = [list(S) for S in itertools.combinations(range(len(R)), d)
              if abs(np.linalg.det(R[list(S)])) >= 1e-12]
    inv = np.array([np.linalg.inv(R[S]) for S in combos])
    idx = np.array(combos)
    best = None
    for bits in itertools.product((0.0, 1.0), repeat=k):
        t = np.array(bits)
        r = np.concatenate([g - H @ t, hi, -lo])
        Y = np.einsum("sij,sj->si", inv, r[idx])
        ok = np.all(Y @ R.T <= r + 1e-9, axis=1)
        if not np.any(ok):
            continue
        val = float(np.min(Y[ok] @ c_y)) + float(c_t @ t)
        if best is None or val < best:
            best = val
    return best


def qp_enumeration_oracle(u_ref, C, d):
    """``min |u - u_ref|^2`` s.t. ``C u >= d`` by trying every active set of
    size <= dim(u)."""
    m = len(u_ref)
    best = None
    for size in range(0, m + 1):
        for S in itertools.combinations(range(len(d)), size):
            if size == 0:
                u = np.array(u_ref, dtype=float)
            else:
                A = C[list(S)]
                G = A @ A.T
                if abs(np.linalg.det(G)) < 1e-12:
                    continue
                lam = np.linalg.solve(G, d[list(S)] - A @ u_ref)
                u = u_ref + A.T @ lam
            if np.all(C @ u >= d - 1e-9):
                val = float(np.sum((u - u_ref) ** 2))
                if best is None or val < best[0] - 1e-14:
                    best = (val, u)
    return best


# -------------------------------------------------------------------- suites

def check_gradients(rng, n_cases: int):
    """Analytic ``n`` against central differences of ``h`` (h > 0.05)."""
    err = 0.0
    e = np.eye(2)
    for _ in range(n_cases):
        _, _, co, p = random_configuration(rng, 0.05, 3.0)
        be = barrier(co, p)
        fd = np.array([(barrier(co, p + FD_STEP * e[k]).h - barrier(co, p - FD_STEP * e[k]).h)
                       / (2 * FD_STEP) for k in range(2)])
        err = max(err, float(np.max(np.abs(fd - be.n))))
    return err, ""


def _stable_feature(co, p, step):
    sol = solve_min_dist(co, p)
    for dp in (np.array([step, 0]), np.array([-step, 0]), np.array([0, step]), np.array([0, -step])):
        other = solve_min_dist(co, p + dp)
        if other.feature is not sol.feature or other.active_rows != sol.active_rows:
            return None
    return sol


def check_hessians(rng, n_cases: int):
    """Closed-form ``H`` against central differences of ``n``; also
    ``H n = 0`` and ``H = 0`` on edges."""
    err, identity, n_vertex, edge_bad = 0.0, 0.0, 0, 0
    e = np.eye(2)
    done = 0
    while done < n_cases:
        _, _, co, p = random_configuration(rng, 0.05, 3.0)
        if rng.random() < 0.5:
            # bias half the cases toward vertex features
            V = co.vertices0
            v = V[rng.integers(len(V))]
            outward = v - V.mean(axis=0)
            p = -(v + rng.uniform(0.1, 1.5) * outward / np.linalg.norm(outward))
        sol = _stable_feature(co, p, 2 * FD_STEP)
        if sol is None or sol.feature is Feature.INTERIOR or sol.dist < 0.05:
            continue
        be = barrier(co, p)
        fd = np.column_stack([(barrier(co, p + FD_STEP * e[k]).n - barrier(co, p - FD_STEP * e[k]).n)
                              / (2 * FD_STEP) for k in range(2)])
        err = max(err, float(np.max(np.abs(fd - be.H))))
        identity = max(identity, float(np.max(np.abs(be.H @ be.n))))
        edge_bad += be.feature is Feature.EDGE and bool(np.any(be.H != 0.0))
        n_vertex += be.feature is Feature.VERTEX
        done += 1
    extras = {"max_Hn": identity, "edge_nonzero": edge_bad, "vertex_cases": n_vertex}
    # H n vanishes up to roundoff; a nonzero edge Hessian is a hard failure
    total = max(err, identity) if edge_bad == 0 else np.inf
    return total, f"vertex cases {n_vertex}, max |H n| {identity:.1e}", extras


def check_geometry(rng, n_cases: int):
    """Barrier distance against the feature-pair scan and the direct
    polygon distance between the placed robot and the obstacle."""
    err = 0.0
    for _ in range(n_cases):
        robot, obs, co, p = random_configuration(rng, 1e-3, 3.0)
        h = barrier(co, p).dist
        placed = VPolytope(robot.vertices + p)
        err = max(err, abs(h - feature_pair_distance(co, p)),
                  abs(h - polygon_distance_oracle(placed, obs)))
    return err, ""


def random_milp(rng, k: int):
    """Bounded mixed-binary instance with ``k`` binaries and 2 or 3
    continuous variables."""
    d = int(rng.integers(2, 4))
    m = int(rng.integers(2, 7))
    G = rng.normal(size=(m, d))
    H = rng.normal(size=(m, k)) * 2.0
    g = rng.uniform(0.5, 3.0, m) + np.maximum(H, 0).sum(axis=1) * rng.uniform(0, 1)
    c_y = rng.normal(size=d)
    c_t = rng.normal(size=k)
    lo, hi = -np.full(d, 5.0), np.full(d, 5.0)
    return c_y, c_t, G, H, g, lo, hi


def check_milp(rng, n_cases: int):
    """Branch and bound against exhaustive enumeration (<= 12 binaries)."""
    err, n_inf, t_bb = 0.0, 0, 0.0
    for case in range(n_cases):
        k = int(rng.integers(1, 13)) if case else 12
        c_y, c_t, G, H, g, lo, hi = random_milp(rng, k)
        d = len(c_y)
        lp = LinearProgram(np.concatenate([c_y, c_t]), np.hstack([G, H]), g,
                           lower=np.concatenate([lo, np.zeros(k)]),
                           upper=np.concatenate([hi, np.ones(k)]))
        t0 = time.perf_counter()
        sol = solve_milp(MILPProblem(lp, tuple(range(d, d + k))))
        t_bb += time.perf_counter() - t0
        ref = milp_enumeration_oracle(c_y, c_t, G, H, g, lo, hi)
        if ref is None:
            n_inf += 1
            if sol.status is not Status.INFEASIBLE:
                err = np.inf
            continue
        if sol.status is not Status.OPTIMAL:
            err = np.inf
            continue
        err = max(err, abs(sol.objective - ref))
    extras = {"infeasible": n_inf, "bb_seconds": t_bb, "max_binaries": 12 if n_cases else 0}
    return err, f"infeasible instances {n_inf}, branch and bound {t_bb:.2f} s", extras


def check_qp(rng, n_cases: int):
    """Filter QP against active-set enumeration, plus KKT residuals."""
    err = 0.0
    cfg = FilterConfig()
    for _ in range(n_cases):
        u_ref = rng.uniform(-8, 8, 2)
        rows = []
        for _ in range(int(rng.integers(1, 5))):
            a = rng.normal(size=2)
            a /= np.linalg.norm(a)
            rows.append(CBFConstraint(a, float(rng.uniform(-4, 3))))
        C = np.vstack([np.vstack([r.coeff_u for r in rows]), np.eye(2), -np.eye(2)])
        d = np.concatenate([[r.rhs for r in rows], cfg.u_min, -cfg.u_max])
        ref = qp_enumeration_oracle(u_ref, C, d)
        res = safety_filter(u_ref, rows, cfg)
        if ref is None:
            if res.ok:
                err = np.inf
            continue
        if not res.ok:
            err = np.inf
            continue
        err = max(err, float(np.max(np.abs(res.u_star - ref[1]))))
        # KKT for 1/2|u - u_ref|^2: u - u_ref = C_A^T lam, lam >= 0, complementarity
        lam = np.zeros(len(d))
        for i, v in res.multipliers.items():
            lam[i] = v
        stat = res.u_star - u_ref - C.T @ lam
        slack = C @ res.u_star - d
        kkt = max(float(np.max(np.abs(stat))), float(max(0.0, -lam.min())),
                  float(max(0.0, -slack.min())), float(np.max(np.abs(lam * slack))))
        err = max(err, kkt)
    return err, ""


def check_hocbf(rng, n_cases: int, k1: float = 2.0, k2: float = 10.0):
    """HOCBF row against ``psi2 = d/dt psi1 + k2 psi1``, with ``d/dt psi1``
    from central differences along ``p' = v, v' = u``."""
    err = 0.0
    tau = 1e-5
    done = 0
    while done < n_cases:
        _, _, co, p = random_configuration(rng, 0.1, 3.0)
        v = rng.uniform(-2, 2, 2)
        u = rng.uniform(-5, 5, 2)
        sols = [solve_min_dist(co, p + s * tau * v + 0.5 * (s * tau) ** 2 * u) for s in (-1, 1)]
        base = solve_min_dist(co, p)
        if any(s.feature is not base.feature or s.active_rows != base.active_rows for s in sols):
            continue

        def psi_at(s):
            q = p + s * tau * v + 0.5 * (s * tau) ** 2 * u
            return psi1(barrier(co, q), v + s * tau * u, k1)

        be = barrier(co, p)
        dpsi = (psi_at(1) - psi_at(-1)) / (2 * tau)
        psi2 = dpsi + k2 * psi1(be, v, k1)
        row = hocbf_constraint(be, v, k1, k2)
        err = max(err, abs(float(row.coeff_u @ u) - row.rhs - psi2))
        done += 1
    return err, ""


SUITES = {
    "gradients": check_gradients,
    "hessians": check_hessians,
    "geometry": check_geometry,
    "milp": check_milp,
    "qp": check_qp,
    "hocbf": check_hocbf,
}


def run_suite(name: str, seed: int = 0, n_cases: int | None = None) -> SuiteReport:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    n = DEFAULT_CASES[name] if n_cases is None else int(n_cases)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    err, detail, *rest = SUITES[name](rng, n)
    extras = rest[0] if rest else {}
    return SuiteReport(name, n, float(err), TOLERANCES[name], time.perf_counter() - t0, detail,
                       extras)

"""Finite-horizon MILP-MPC over a point-mass abstraction.

Obstacles are kept out of the predicted positions with big-M disjunctions:
for every step and obstacle at least one face's half-plane (pushed out by
``eps_obs``) must contain the point. L1 costs become epigraph slacks.

Decision vector layout::

    [ X (n*(Np+1)) | U (m*Np) | s_u (m*Np) | s_x (n*(Np+1)) | t (binaries) ]
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import DiscreteDynamics, DynKind, discretize  # noqa: F401  (re-export)
from .geometry import HPolytope
from .milp import LinearProgram, MILPProblem, MILPSolution, Status, solve_milp


class DimensionMismatch(ValueError):
    pass


class PlanInfeasible(RuntimeError):
    def __init__(self, status: Status, solution: MILPSolution | None = None):
        super().__init__(f"MILP-MPC not solved: {status.value}")
        self.status = status
        self.solution = solution


@dataclass
class PlannerConfig:
    Np: int = 10
    dt_p: float = 0.2
    alpha: float = 20.0
    beta: float = 0.08
    bigM: float = 20.0
    eps_obs: float = 0.01
    x_min: np.ndarray = None
    x_max: np.ndarray = None
    u_min: np.ndarray = field(default_factory=lambda: np.full(2, -5.0))
    u_max: np.ndarray = field(default_factory=lambda: np.full(2, 5.0))
    gap_tol: float = 1e-6
    node_limit: int = 20_000

    def __post_init__(self):
        if self.Np < 1:
            raise ValueError("Np must be >= 1")
        if not self.dt_p > 0:
            raise ValueError("dt_p must be positive")
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("alpha and beta must be nonnegative")
        if self.eps_obs < 0:
            raise ValueError("eps_obs must be nonnegative")
        for name in ("x_min", "x_max", "u_min", "u_max"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, np.asarray(v, dtype=float))


@dataclass
class NominalPlan:
    U_star: np.ndarray
    X_star: np.ndarray
    binaries: dict
    objective: float
    nodes_explored: int = 0
    status: Status = Status.OPTIMAL

    @property
    def u_mpc(self) -> np.ndarray:
        return self.U_star[:, 0].copy()


@dataclass
class FHOCP:
    """Assembled MILP plus the bookkeeping needed to read a plan back."""

    problem: MILPProblem
    n: int
    m: int
    Np: int
    keys: list  # (step, obstacle, row) per binary, in variable order
    dropped_initial: list = field(default_factory=list)
    pruned: int = 0

    @property
    def off_u(self):
        return self.n * (self.Np + 1)

    @property
    def off_su(self):
        return self.off_u + self.m * self.Np

    @property
    def off_sx(self):
        return self.off_su + self.m * self.Np

    @property
    def off_t(self):
        return self.off_sx + self.n * (self.Np + 1)

    def unpack(self, z) -> tuple[np.ndarray, np.ndarray, dict]:
        n, m, Np = self.n, self.m, self.Np
        X = z[: self.off_u].reshape(Np + 1, n).T
        U = z[self.off_u: self.off_su].reshape(Np, m).T
        T = {k: int(round(z[self.off_t + q])) for q, k in enumerate(self.keys)}
        return X, U, T


def reachable_boxes(x_k, dyn: DiscreteDynamics, cfg: PlannerConfig) -> list:
    """Interval outer bounds on the predicted state at every step."""
    A, B = dyn.A, dyn.B
    Ap, An = np.maximum(A, 0), np.minimum(A, 0)
    Bp, Bn = np.maximum(B, 0), np.minimum(B, 0)
    lo = hi = np.asarray(x_k, dtype=float)
    boxes = [(lo, hi)]
    for _ in range(cfg.Np):
        nlo = Ap @ lo + An @ hi + Bp @ cfg.u_min + Bn @ cfg.u_max
        nhi = Ap @ hi + An @ lo + Bp @ cfg.u_max + Bn @ cfg.u_min
        if cfg.x_min is not None:
            nlo = np.maximum(nlo, cfg.x_min)
            nhi = np.maximum(nhi, cfg.x_min)
        if cfg.x_max is not None:
            nhi = np.minimum(nhi, cfg.x_max)
            nlo = np.minimum(nlo, cfg.x_max)
        lo, hi = nlo, nhi
        boxes.append((lo, hi))
    return boxes


def _face_clear_on_box(obs: HPolytope, plo, phi, eps) -> bool:
    # some face's outer half-plane contains the whole box
    A = obs.A
    mins = np.where(A > 0, A * plo, A * phi).sum(axis=1)
    return bool(np.any(mins >= obs.b + eps))


def build_fhocp(x_k, x_g, obstacles, dyn: DiscreteDynamics, cfg: PlannerConfig,
                prune: bool = False, tighten: bool = False) -> FHOCP:
    """Assemble the MILP for one planning step.

    With ``prune=True`` an (obstacle, step) disjunction is omitted when one
    face's exit half-plane already covers the whole reachable box of that
    step. With ``tighten=True`` each big-M row uses the smallest constant
    that still relaxes it over that box (capped at ``cfg.bigM``). Neither
    changes the set of feasible trajectories, only the LP relaxations.
    """
    n, m, Np = dyn.n_states, dyn.n_inputs, cfg.Np
    x_k = np.asarray(x_k, dtype=float)
    x_g = np.asarray(x_g, dtype=float)
    if x_k.shape != (n,) or x_g.shape != (n,):
        raise DimensionMismatch(f"state vectors must have length {n}")
    for name, size in (("u_min", m), ("u_max", m)):
        if getattr(cfg, name).shape != (size,):
            raise DimensionMismatch(f"{name} must have length {size}")
    for name in ("x_min", "x_max"):
        v = getattr(cfg, name)
        if v is not None and v.shape != (n,):
            raise DimensionMismatch(f"{name} must have length {n}")

    nx, nu = n * (Np + 1), m * Np
    off_u, off_su = nx, nx + nu
    off_sx = off_su + nu
    off_t = off_sx + nx
    eps, M = cfg.eps_obs, cfg.bigM

    boxes = reachable_boxes(x_k, dyn, cfg) if (prune or tighten) else None
    keys, groups, dropped, pruned = [], [], [], 0
    p0 = x_k[:2]
    for j, obs in enumerate(obstacles):
        inside_margin = not np.any(obs.A @ p0 >= obs.b + eps)
        if inside_margin:
            dropped.append(j)
        for i in range(Np + 1):
            if i == 0 and inside_margin:
                continue
            if prune and _face_clear_on_box(obs, boxes[i][0][:2], boxes[i][1][:2], eps):
                pruned += 1
                continue
            first = len(keys)
            keys.extend((i, j, r) for r in range(len(obs.b)))
            groups.append((i, j, first))
    nt = len(keys)
    nv = off_t + nt

    c = np.zeros(nv)
    c[off_su:off_sx] = 1.0
    c[off_sx: off_sx + n * Np] = cfg.beta
    c[off_sx + n * Np: off_t] = cfg.alpha

    # slack epigraph rows: +-u - s_u <= 0, +-x - s_x <= +-x_g
    rows_ub, rhs_ub = [], []
    Aub_slack = np.zeros((2 * nu + 2 * nx, nv))
    b_slack = np.zeros(2 * nu + 2 * nx)
    k = 0
    for q in range(nu):
        for sgn in (1.0, -1.0):
            Aub_slack[k, off_u + q] = sgn
            Aub_slack[k, off_su + q] = -1.0
            k += 1
    xg_rep = np.tile(x_g, Np + 1)
    for q in range(nx):
        for sgn in (1.0, -1.0):
            Aub_slack[k, q] = sgn
            Aub_slack[k, off_sx + q] = -1.0
            b_slack[k] = sgn * xg_rep[q]
            k += 1
    rows_ub.append(Aub_slack)
    rhs_ub.append(b_slack)

    if nt:
        n_big = nt
        Abig = np.zeros((n_big + len(groups), nv))
        bbig = np.zeros(n_big + len(groups))
        q = 0
        for g, (i, j, first) in enumerate(groups):
            obs = obstacles[j]
            ell = len(obs.b)
            if tighten:
                plo, phi = boxes[i][0][:2], boxes[i][1][:2]
                worst = obs.b + eps - np.where(obs.A > 0, obs.A * plo, obs.A * phi).sum(axis=1)
                Mr = np.clip(worst, 0.0, M)
            else:
                Mr = np.full(ell, M)
            for r in range(ell):
                Abig[q, i * n: i * n + 2] = -obs.A[r]
                Abig[q, off_t + first + r] = -Mr[r]
                bbig[q] = -obs.b[r] - eps
                q += 1
            Abig[n_big + g, off_t + first: off_t + first + ell] = 1.0
            bbig[n_big + g] = ell - 1
        rows_ub.append(Abig)
        rhs_ub.append(bbig)

    A_eq = np.zeros((n * (Np + 1), nv))
    b_eq = np.zeros(n * (Np + 1))
    A_eq[:n, :n] = np.eye(n)
    b_eq[:n] = x_k
    for i in range(Np):
        r0 = n * (i + 1)
        A_eq[r0: r0 + n, (i + 1) * n: (i + 2) * n] = np.eye(n)
        A_eq[r0: r0 + n, i * n: (i + 1) * n] = -dyn.A
        A_eq[r0: r0 + n, off_u + i * m: off_u + (i + 1) * m] = -dyn.B

    lower = np.zeros(nv)
    upper = np.full(nv, np.inf)
    xmin = cfg.x_min if cfg.x_min is not None else np.full(n, -np.inf)
    xmax = cfg.x_max if cfg.x_max is not None else np.full(n, np.inf)
    lower[:nx] = np.tile(xmin, Np + 1)
    upper[:nx] = np.tile(xmax, Np + 1)
    # x_0 is pinned by the initial-state equality; bounding it as well would
    # only turn a slightly out-of-bounds measured state into infeasibility
    lower[:n], upper[:n] = -np.inf, np.inf
    lower[off_u:off_su] = np.tile(cfg.u_min, Np)
    upper[off_u:off_su] = np.tile(cfg.u_max, Np)
    upper[off_t:] = 1.0

    lp = LinearProgram(c, np.vstack(rows_ub), np.concatenate(rhs_ub), A_eq, b_eq, lower, upper)
    prob = MILPProblem(lp, tuple(range(off_t, nv)))
    return FHOCP(prob, n, m, Np, keys, dropped, pruned)


def face_binaries(fh: FHOCP, obstacles, P) -> np.ndarray:
    """Binaries selecting, per (step, obstacle), the face whose half-plane
    the position ``P[:, i]`` violates least.

    Fixing them leaves an LP; for a collision-free ``P`` it is feasible.
    """
    P = np.asarray(P, dtype=float)
    t = np.ones(len(fh.keys))
    q = 0
    while q < len(fh.keys):
        i, j, _ = fh.keys[q]
        obs = obstacles[j]
        ell = len(obs.b)
        t[q + int(np.argmax(obs.A @ P[:2, i] - obs.b))] = 0.0
        q += ell
    return t


def _straight_run(x_k, x_g, boxes, Np) -> np.ndarray:
    # head for the goal as fast as the reachable boxes allow, per axis
    p = np.asarray(x_k, dtype=float)[:2]
    d = np.asarray(x_g, dtype=float)[:2] - p
    P = np.empty((2, Np + 1))
    for i in range(Np + 1):
        lo, hi = boxes[i][0][:2] - p, boxes[i][1][:2] - p
        P[:, i] = p + np.clip(d, lo, hi)
    return P


def plan(x_k, x_g, obstacles, dyn: DiscreteDynamics, cfg: PlannerConfig,
         warm_start: dict | None = None, prune: bool = True,
         tighten: bool = True, warm_traj=None) -> NominalPlan:
    """Solve one FHOCP; raises `PlanInfeasible` when no plan exists.

    ``warm_start`` maps ``(step, obstacle, row)`` to a 0/1 value, typically
    the previous plan's binaries shifted one step (see `shift_binaries`).
    ``warm_traj`` is a guess of the predicted positions (``2 x (Np+1)``),
    e.g. the previous plan shifted (see `shift_trajectory`). Together with a
    straight run toward the goal and the root relaxation, each guess is
    turned into an incumbent through `face_binaries`, which keeps a search
    stopped by ``node_limit`` from returning a poor plan.
    """
    fh = build_fhocp(x_k, x_g, obstacles, dyn, cfg, prune=prune, tighten=tighten)
    cands = []
    if warm_start:
        cands.append(np.array([warm_start.get(key, 0) for key in fh.keys], dtype=float))
    if fh.keys:
        if warm_traj is not None:
            cands.append(face_binaries(fh, obstacles, warm_traj))
        boxes = reachable_boxes(x_k, dyn, cfg)
        cands.append(face_binaries(fh, obstacles, _straight_run(x_k, x_g, boxes, cfg.Np)))

    def from_root(z):
        return [face_binaries(fh, obstacles, fh.unpack(z)[0])]

    sol = solve_milp(fh.problem, gap_tol=cfg.gap_tol, node_limit=cfg.node_limit,
                     warm_start=np.array(cands) if cands else None,
                     heuristic=from_root if fh.keys else None)
    if sol.x_star is None:
        raise PlanInfeasible(sol.status, sol)
    X, U, T = fh.unpack(sol.x_star)
    return NominalPlan(U, X, T, sol.objective, sol.nodes_explored, sol.status)


def shift_binaries(binaries: dict, Np: int) -> dict:
    """Receding-horizon warm start: step ``i+1`` becomes step ``i``; the
    last step repeats."""
    out = {}
    for (i, j, r), v in binaries.items():
        if i >= 1:
            out[(i - 1, j, r)] = v
        if i == Np:
            out[(Np, j, r)] = v
    return out


def shift_trajectory(X) -> np.ndarray:
    """Predicted positions one step later; the last one repeats."""
    P = np.asarray(X, dtype=float)[:2]
    return np.hstack([P[:, 1:], P[:, -1:]])


def greedy_fallback(x_k, x_g, u_max, u_min=None) -> np.ndarray:
    """Saturated input pointing from the current position at the goal."""
    p = np.asarray(x_k, dtype=float)[:2]
    pg = np.asarray(x_g, dtype=float)[:2]
    u_max_v = np.broadcast_to(np.asarray(u_max, dtype=float), (2,))
    u_min_v = -u_max_v if u_min is None else np.broadcast_to(np.asarray(u_min, dtype=float), (2,))
    d = pg - p
    dist = float(np.hypot(d[0], d[1]))
    if dist == 0.0:
        return np.zeros(2)
    u = float(np.max(u_max_v)) * d / dist
    return np.clip(u, u_min_v, u_max_v)

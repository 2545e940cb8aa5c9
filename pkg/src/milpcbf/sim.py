"""Multi-rate closed loop: MILP-MPC guidance, barrier filter, integrator plant.

The planner runs every ``n_mpc`` control steps and its first input is held
in between; the filter and the plant run every step. Three controllers are
available:

``MilpMpcCbf``
    planner + min-norm barrier filter (the full stack)
``MilpMpcOnly``
    planner output applied directly (point-mass abstraction only)
``ClfCbfQp``
    reactive CLF-CBF-QP, no planner
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .cbf import first_order_constraint, hocbf_constraint, psi1, robust_barrier
from .dynamics import DynamicsModel, DynKind, discretize, step_dynamics
from .geometry import configuration_obstacle, v_to_h
from .planner import (PlanInfeasible, PlannerConfig, greedy_fallback, plan, shift_binaries,
                      shift_trajectory)
from .safety_filter import FilterConfig, clf_cbf_baseline, filter as safety_filter
from .scenario import ConfigError, Scenario

log = logging.getLogger(__name__)

K_BRAKE = 5.0
STALL_U = 1e-3


class Controller(enum.Enum):
    MILP_MPC_CBF = "MilpMpcCbf"
    MILP_MPC_ONLY = "MilpMpcOnly"
    CLF_CBF_QP = "ClfCbfQp"

    @classmethod
    def parse(cls, value) -> "Controller":
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "").replace("_", "").lower()
        for c in cls:
            if key in (c.value.lower(), c.name.replace("_", "").lower()):
                return c
        raise ValueError(f"unknown controller {value!r}")


@dataclass
class SimConfig:
    dt: float = 0.01
    dt_p: float = 0.2
    t_final: float = 60.0
    goal_tol: float = 0.1
    stall_window: float = 2.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.dt_p < self.dt:
            raise ConfigError("dt_p must be at least dt")
        if not self.t_final > 0:
            raise ConfigError("t_final must be positive")

    @property
    def n_mpc(self) -> int:
        return max(1, int(round(self.dt_p / self.dt)))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    @classmethod
    def from_scenario(cls, sc: Scenario, **overrides) -> "SimConfig":
        p = sc.params
        kw = dict(dt=p["dt"], dt_p=p["dt_p"], t_final=p["t_final"],
                  goal_tol=p["goal_tol"], stall_window=p["stall_window"])
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kw)


@dataclass
class TrajectoryLog:
    """Per-step records, stored column-wise.

    Row ``k`` holds the state at ``t[k]`` and the inputs applied over
    ``[t[k], t[k] + dt)``; the last row is the terminal state with zero input.
    ``h`` is the signed robot/obstacle distance minus ``d_safe`` (negative on
    overlap), ``psi1`` is only filled for the double integrator.
    """

    t: np.ndarray
    x: np.ndarray
    u_ref: np.ndarray
    u_star: np.ndarray
    h: np.ndarray
    psi1: np.ndarray | None
    planner_status: list
    filter_status: list
    intervened: np.ndarray
    replanned: np.ndarray
    x_g: np.ndarray
    dt: float
    goal_tol: float
    stall_window: float
    controller: str = ""
    scenario: str = ""
    events: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def fault_count(self) -> int:
        return len(self.events)


def _at_goal(x, x_g, kind: DynKind, tol: float) -> bool:
    if math.hypot(x[0] - x_g[0], x[1] - x_g[1]) > tol:
        return False
    return kind is DynKind.SINGLE or math.hypot(x[2], x[3]) <= tol


def metrics(lg: TrajectoryLog) -> dict:
    """Summary record of a run."""
    if len(lg) == 0:
        raise ValueError("empty log")
    kind = DynKind.SINGLE if lg.x.shape[1] == 2 else DynKind.DOUBLE
    reached = _at_goal(lg.x[-1], lg.x_g, kind, lg.goal_tol)
    min_h = float(lg.h.min()) if lg.h.size else math.inf
    tail = lg.t >= lg.t[-1] - lg.stall_window - 1e-9
    quiet = bool(np.all(np.abs(lg.u_star[tail]) < STALL_U))
    long_enough = lg.t[-1] - lg.t[0] >= lg.stall_window - 1e-9
    return {
        "reached": bool(reached),
        "t_reach": float(lg.t[-1]) if reached else None,
        "min_h": min_h,
        "intervention_time": float(np.count_nonzero(lg.intervened) * lg.dt),
        "stall": bool(quiet and long_enough and not reached),
        "fault_count": lg.fault_count,
        "final_goal_distance": float(np.hypot(*(lg.x[-1, :2] - lg.x_g[:2]))),
        "steps": len(lg),
        "replans": int(np.count_nonzero(lg.replanned)),
    }


def _brake(x, kind: DynKind, u_min, u_max) -> np.ndarray:
    if kind is DynKind.SINGLE:
        return np.zeros(2)
    return np.clip(-K_BRAKE * x[2:], u_min, u_max)


def run(scenario: Scenario, controller="MilpMpcCbf", cfg: SimConfig | None = None,
        warm_start: bool = True, prune: bool = True) -> TrajectoryLog:
    """Simulate one scenario; raises `ConfigError` if the start is unsafe."""
    ctrl = Controller.parse(controller)
    sc = scenario
    cfg = cfg or SimConfig.from_scenario(sc)
    p = sc.params
    kind = sc.dynamics
    model = DynamicsModel(kind)
    d_safe = float(p["d_safe"])
    u_min, u_max = sc.u_bounds()
    x_lo, x_hi = sc.state_bounds()

    cos = [configuration_obstacle(sc.robot, o, j) for j, o in enumerate(sc.obstacles)]
    plan_obs = [v_to_h(o) for o in sc.obstacles]
    dyn_p = discretize(kind, cfg.dt_p)
    pcfg = PlannerConfig(Np=int(p["Np"]), dt_p=cfg.dt_p, alpha=p["alpha"], beta=p["beta"],
                         bigM=p["bigM"], eps_obs=p["eps_obs"], x_min=x_lo, x_max=x_hi,
                         u_min=u_min, u_max=u_max, node_limit=int(p["node_limit"]))
    fcfg = FilterConfig(k=p["k"], k1=p["k1"], k2=p["k2"], u_min=u_min, u_max=u_max)

    x = sc.x_s.astype(float).copy()
    x_g = sc.x_g.astype(float)
    K = len(cos)
    N = cfg.n_steps
    n = len(x)

    def evaluate(xc):
        hs = np.empty(K)
        ps = np.full(K, np.nan)
        bes = []
        for j, co in enumerate(cos):
            be = robust_barrier(co, xc[:2], d_safe, j)
            hs[j] = be.h
            if kind is DynKind.DOUBLE:
                ps[j] = psi1(be, xc[2:], fcfg.k1)
            bes.append(be)
        return hs, ps, bes

    h0, psi0, _ = evaluate(x)
    for j in range(K):
        if not h0[j] > 0:
            raise ConfigError(f"start violates obstacle {j}: h = {h0[j]:.3g}")
        if ctrl is Controller.MILP_MPC_CBF and kind is DynKind.DOUBLE and psi0[j] < 0:
            raise ConfigError(f"start violates psi1 >= 0 for obstacle {j}")

    T = np.empty(N + 1)
    X = np.empty((N + 1, n))
    UR = np.zeros((N + 1, 2))
    US = np.zeros((N + 1, 2))
    H = np.empty((N + 1, K))
    PS = np.full((N + 1, K), np.nan) if kind is DynKind.DOUBLE else None
    INT = np.zeros(N + 1, dtype=bool)
    REP = np.zeros(N + 1, dtype=bool)
    pstat, fstat, events = [], [], []

    u_mpc = np.zeros(2)
    binaries = None
    prev_traj = None
    planner_status = "none"
    last = N
    for k in range(N + 1):
        hs, ps, bes = evaluate(x)
        T[k] = k * cfg.dt
        X[k] = x
        H[k] = hs
        if PS is not None:
            PS[k] = ps
        if k == N or _at_goal(x, x_g, kind, cfg.goal_tol):
            pstat.append("done")
            fstat.append("done")
            last = k
            break
        if np.any(hs < -1e-6):
            events.append((round(k * cfg.dt, 10), "overlap", int(np.argmin(hs))))

        rows = []
        if ctrl is not Controller.MILP_MPC_ONLY:
            f, g = model.f(x), model.g(x)
            for be in bes:
                if kind is DynKind.SINGLE:
                    rows.append(first_order_constraint(be, f, g, fcfg.k))
                else:
                    rows.append(hocbf_constraint(be, x[2:], fcfg.k1, fcfg.k2))

        if ctrl is Controller.CLF_CBF_QP:
            res = clf_cbf_baseline(x, x_g, rows, fcfg, kind)
            planner_status = "none"
            if res.ok:
                u_ref = u = res.u_star
            else:
                u_ref = np.zeros(2)
                u = _brake(x, kind, u_min, u_max)
                events.append((round(k * cfg.dt, 10), "filter_infeasible", -1))
            fs, intervened = res.status.value, res.intervened
        else:
            if k % cfg.n_mpc == 0:
                REP[k] = True
                ws = shift_binaries(binaries, pcfg.Np) if (warm_start and binaries) else None
                wt = prev_traj if warm_start else None
                try:
                    nom = plan(x, x_g, plan_obs, dyn_p, pcfg, warm_start=ws, prune=prune,
                               warm_traj=wt)
                    u_mpc = nom.u_mpc
                    binaries = nom.binaries
                    prev_traj = shift_trajectory(nom.X_star)
                    planner_status = nom.status.value
                except PlanInfeasible as exc:
                    u_mpc = greedy_fallback(x, x_g, u_max, u_min)
                    binaries = prev_traj = None
                    planner_status = f"fallback:{exc.status.value}"
            u_ref = u_mpc
            if ctrl is Controller.MILP_MPC_ONLY:
                u = np.clip(u_ref, u_min, u_max)
                fs, intervened = "skipped", False
            else:
                res = safety_filter(u_ref, rows, fcfg)
                if res.ok:
                    u = res.u_star
                else:
                    u = _brake(x, kind, u_min, u_max)
                    events.append((round(k * cfg.dt, 10), "filter_infeasible", -1))
                fs, intervened = res.status.value, res.intervened
        UR[k] = u_ref
        US[k] = u
        INT[k] = intervened
        pstat.append(planner_status)
        fstat.append(fs)
        x = step_dynamics(x, u, cfg.dt, model)

    m = last + 1
    lg = TrajectoryLog(T[:m], X[:m], UR[:m], US[:m], H[:m], None if PS is None else PS[:m],
                       pstat, fstat, INT[:m], REP[:m], x_g, cfg.dt, cfg.goal_tol,
                       cfg.stall_window, ctrl.value, sc.name, events)
    lg.summary = metrics(lg)
    return lg

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from milpcbf.dynamics import discretize
from milpcbf.geometry import box, v_to_h
from milpcbf.milp import LinearProgram, Status, solve_lp, solve_milp
from milpcbf.planner import (DimensionMismatch, PlanInfeasible, PlannerConfig, build_fhocp,
                             face_binaries, greedy_fallback, plan, reachable_boxes,
                             shift_binaries, shift_trajectory)
from milpcbf.verify import random_polygon

SI = discretize("single", 0.2)
DI = discretize("double", 0.2)


def cfg(n=2, **kw):
    kw.setdefault("x_min", np.full(n, -20.0))
    kw.setdefault("x_max", np.full(n, 20.0))
    return PlannerConfig(**kw)


def fixed_binary_lp(lp: LinearProgram, cols, values) -> LinearProgram:
    lo, up = lp.lower.copy(), lp.upper.copy()
    lo[list(cols)] = values
    up[list(cols)] = values
    return LinearProgram(lp.c, lp.A_ub, lp.b_ub, lp.A_eq, lp.b_eq, lo, up)


# ---------------------------------------------------------------- assembly

def test_counts_one_box_obstacle():
    obs = [v_to_h(box(3, 3, 4, 4))]
    fh = build_fhocp([0, 0], [6, 6], obs, SI, cfg(), prune=False)
    lp = fh.problem.lp
    assert len(fh.problem.binary_indices) == 44
    slack_rows = 2 * (2 * 10) + 2 * (2 * 11)
    assert len(lp.b_ub) - slack_rows == 44 + 11
    # the last 11 rows are the cardinality rows
    card = lp.A_ub[-11:]
    assert np.all(card[:, fh.off_t:].sum(axis=1) == 4)
    assert np.allclose(lp.b_ub[-11:], 3)


def test_no_obstacles_is_pure_lp():
    fh = build_fhocp([0, 0], [1, 0], [], SI, cfg())
    assert fh.problem.binary_indices == ()


def test_dimension_checks():
    with pytest.raises(DimensionMismatch):
        build_fhocp([0, 0, 0, 0], [1, 0], [], SI, cfg())
    with pytest.raises(DimensionMismatch):
        build_fhocp([0, 0, 0, 0], [1, 0, 0, 0], [], DI, cfg(n=2))


def test_known_trajectory_satisfies_rows():
    obs = [v_to_h(box(3, -1, 4, 1)), v_to_h(box(-2, 3, 2, 4))]
    x_k, x_g = np.array([0.0, 0.0, 0.5, 0.0]), np.array([6.0, 2.0, 0.0, 0.0])
    c = cfg(n=4)
    fh = build_fhocp(x_k, x_g, obs, DI, c, prune=False)
    U = np.tile([[0.4], [0.6]], (1, c.Np))
    X = np.empty((4, c.Np + 1))
    X[:, 0] = x_k
    for i in range(c.Np):
        X[:, i + 1] = DI.A @ X[:, i] + DI.B @ U[:, i]
    z = np.zeros(fh.problem.lp.n)
    z[:fh.off_u] = X.T.ravel()
    z[fh.off_u:fh.off_su] = U.T.ravel()
    z[fh.off_su:fh.off_sx] = np.abs(U.T.ravel())
    z[fh.off_sx:fh.off_t] = np.abs(X.T - x_g).ravel()
    z[fh.off_t:] = face_binaries(fh, obs, X)
    assert fh.problem.lp.residual(z) <= 1e-9
    J = np.abs(U).sum() + c.beta * np.abs(X[:, :-1].T - x_g).sum() + c.alpha * np.abs(X[:, -1] - x_g).sum()
    assert fh.problem.lp.c @ z == pytest.approx(J)


def test_reachable_boxes_contain_rollouts(rng):
    c = cfg(n=4)
    x0 = np.array([1.0, 2.0, -1.0, 0.5])
    boxes = reachable_boxes(x0, DI, c)
    for _ in range(20):
        x = x0.copy()
        for i in range(c.Np):
            x = DI.A @ x + DI.B @ rng.uniform(-5, 5, 2)
            lo, hi = boxes[i + 1]
            assert np.all(x >= lo - 1e-12) and np.all(x <= hi + 1e-12)


# ---------------------------------------------------------------- plan

def test_plan_free_space_single_step():
    nom = plan([0, 0], [1, 0], [], SI, cfg())
    assert nom.u_mpc == pytest.approx([5.0, 0.0])
    assert np.allclose(nom.X_star[:, 1:], [[1.0], [0.0]])
    # same answer as the plain LP
    fh = build_fhocp([0, 0], [1, 0], [], SI, cfg())
    assert solve_lp(fh.problem.lp).objective == pytest.approx(nom.objective)


def test_plan_at_goal_is_zero():
    nom = plan([2, 3], [2, 3], [], SI, cfg())
    assert np.allclose(nom.U_star, 0)
    assert nom.objective == pytest.approx(0.0, abs=1e-12)


def test_plan_infeasible_when_trapped():
    obs = [v_to_h(box(-1, -1, 1, 1))]
    c = cfg(Np=1, x_min=np.full(2, -0.9), x_max=np.full(2, 0.9))
    with pytest.raises(PlanInfeasible):
        plan([0, 0], [0.5, 0], obs, SI, c)
    # enumeration: no binary pattern gives a feasible LP
    fh = build_fhocp([0, 0], [0.5, 0], obs, SI, c)
    cols = fh.problem.binary_indices
    assert len(cols) == 4
    for t in itertools.product((0.0, 1.0), repeat=4):
        res = solve_lp(fixed_binary_lp(fh.problem.lp, cols, t))
        assert res.status is Status.INFEASIBLE


def check_plan_exits(nom, obstacles, eps):
    P = nom.X_star[:2]
    for obs in obstacles:
        for i in range(1, P.shape[1]):
            assert np.max(obs.A @ P[:, i] - obs.b) >= eps - 1e-7


@given(st.integers(0, 10_000), st.sampled_from(["single", "double"]))
def test_plan_points_clear_obstacles(seed, kind):
    rng = np.random.default_rng(seed)
    dyn = SI if kind == "single" else DI
    n = dyn.n_states
    obs = [v_to_h(random_polygon(rng, 0.8, center=rng.uniform([2, -2], [5, 2])))]
    x_k = np.zeros(n)
    x_g = np.zeros(n)
    x_g[:2] = [7.0, rng.uniform(-1, 1)]
    c = cfg(n=n, Np=6)
    if np.max(obs[0].A @ x_k[:2] - obs[0].b) < c.eps_obs:
        return
    nom = plan(x_k, x_g, obs, dyn, c)
    check_plan_exits(nom, obs, c.eps_obs)


@given(st.integers(0, 10_000))
def test_pruning_and_tightening_keep_the_optimum(seed):
    rng = np.random.default_rng(seed)
    obs = [v_to_h(random_polygon(rng, 0.7, center=rng.uniform([1.5, -1.5], [3.5, 1.5])))
           for _ in range(2)]
    c = cfg(Np=5)
    x_g = np.array([5.0, rng.uniform(-1, 1)])
    if any(np.max(o.A @ np.zeros(2) - o.b) < c.eps_obs for o in obs):
        return
    objs = []
    for prune, tighten in ((False, False), (True, True)):
        fh = build_fhocp(np.zeros(2), x_g, obs, SI, c, prune=prune, tighten=tighten)
        sol = solve_milp(fh.problem)
        objs.append(sol.objective if sol.ok else None)
    if objs[0] is None:
        assert objs[1] is None
    else:
        assert objs[1] == pytest.approx(objs[0], abs=1e-6)


@given(st.tuples(st.floats(-1.5, 1.5), st.floats(-1.5, 1.5)), st.integers(3, 7))
def test_longer_horizon_never_costs_more(goal, Np):
    x_g = np.array(goal)
    a = plan([0, 0], x_g, [], SI, cfg(Np=Np))
    b = plan([0, 0], x_g, [], SI, cfg(Np=Np + 2))
    assert b.objective <= a.objective + 1e-6


@given(st.tuples(st.floats(-2, 2), st.floats(-2, 2)), st.sampled_from(["single", "double"]))
def test_receding_horizon_consistency(goal, kind):
    dyn = SI if kind == "single" else DI
    n = dyn.n_states
    c = cfg(n=n, Np=10)
    x_g = np.zeros(n)
    x_g[:2] = goal
    x_k = np.zeros(n)
    first = plan(x_k, x_g, [], dyn, c)
    if np.abs(first.X_star[:, -1] - x_g).max() > 1e-9:
        return  # goal not held at the end: shifted plan is not a candidate
    stage = np.abs(first.U_star[:, 0]).sum() + c.beta * np.abs(x_k - x_g).sum()
    second = plan(first.X_star[:, 1], x_g, [], dyn, c)
    assert second.objective <= first.objective - stage + 1e-6


# ---------------------------------------------------------------- helpers

def test_greedy_fallback_examples():
    assert greedy_fallback([0, 0], [1, 0], 5) == pytest.approx([5, 0])
    assert np.array_equal(greedy_fallback([1, 1], [1, 1], 5), [0, 0])
    assert greedy_fallback([0, 0], [3, 4], 5) == pytest.approx([3, 4])


def test_shift_binaries_and_trajectory():
    b = {(0, 0, 1): 1, (1, 0, 1): 0, (2, 0, 1): 1}
    assert shift_binaries(b, 2) == {(0, 0, 1): 0, (1, 0, 1): 1, (2, 0, 1): 1}
    X = np.arange(8.0).reshape(2, 4)
    assert np.array_equal(shift_trajectory(X), [[1, 2, 3, 3], [5, 6, 7, 7]])


def test_start_within_margin_drops_initial_rows():
    obs = [v_to_h(box(0, 0, 1, 1))]
    fh = build_fhocp([1.005, 0.5], [5, 0.5], obs, SI, cfg(), prune=False)
    assert fh.dropped_initial == [0]
    assert all(i > 0 for i, _, _ in fh.keys)
    nom = plan([1.005, 0.5], [5, 0.5], obs, SI, cfg())
    check_plan_exits(nom, obs, 0.01)

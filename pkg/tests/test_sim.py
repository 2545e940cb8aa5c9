import math

import numpy as np
import pytest

from milpcbf.scenario import ConfigError, bundled, from_dict
from milpcbf.sim import Controller, SimConfig, TrajectoryLog, _brake, metrics, run
from milpcbf.dynamics import DynKind

ROBOT = [[0.2, 0], [-0.1, 0.15], [-0.1, -0.15]]


def small(dynamics="single", obstacles=None, start=(0.5, 2.0), goal=(5.5, 2.2), t_final=6.0):
    doc = {
        "robot": ROBOT,
        "obstacles": [[[2.5, 1.2], [3.5, 1.2], [3.5, 2.8], [2.5, 2.8]]] if obstacles is None else obstacles,
        "start": list(start), "goal": list(goal), "dynamics": dynamics,
        "workspace": [0, 0, 6, 4], "params": {"t_final": t_final},
    }
    return from_dict(doc, "small")


def make_log(h, u, x, x_g, dt=0.1):
    n = len(h)
    return TrajectoryLog(
        t=np.arange(n) * dt, x=np.asarray(x, float), u_ref=np.asarray(u, float),
        u_star=np.asarray(u, float), h=np.asarray(h, float).reshape(n, -1), psi1=None,
        planner_status=[""] * n, filter_status=[""] * n, intervened=np.zeros(n, bool),
        replanned=np.zeros(n, bool), x_g=np.asarray(x_g, float), dt=dt, goal_tol=0.1,
        stall_window=0.2)


# ---------------------------------------------------------------- metrics

def test_metrics_examples():
    lg = make_log([1, 0.5, 0.2], np.zeros((3, 2)), [[0, 0], [1, 0], [2, 0]], [2, 0])
    m = metrics(lg)
    assert m["reached"] and m["min_h"] == 0.2 and not m["stall"]
    assert m["t_reach"] == pytest.approx(0.2)
    lg = make_log([1, 1, 1], np.zeros((3, 2)), [[0, 0]] * 3, [2, 0])
    m = metrics(lg)
    assert not m["reached"] and m["stall"] and m["t_reach"] is None
    lg = make_log([1, 1, 1], np.ones((3, 2)), [[0, 0]] * 3, [2, 0])
    assert not metrics(lg)["stall"]


def test_brake():
    assert np.array_equal(_brake(np.zeros(2), DynKind.SINGLE, -5, 5), [0, 0])
    assert _brake(np.array([0, 0, 2.0, -0.1]), DynKind.DOUBLE, -5, 5) == pytest.approx([-5, 0.5])


def test_sim_config_validation():
    with pytest.raises(ConfigError):
        SimConfig(dt=0)
    with pytest.raises(ConfigError):
        SimConfig(dt=0.1, dt_p=0.05)
    assert SimConfig(dt=0.01, dt_p=0.2).n_mpc == 20


def test_controller_parse():
    assert Controller.parse("milp-mpc-cbf") is Controller.MILP_MPC_CBF
    assert Controller.parse("ClfCbfQp") is Controller.CLF_CBF_QP
    with pytest.raises(ValueError):
        Controller.parse("pid")


# ---------------------------------------------------------------- closed loop

@pytest.mark.parametrize("dyn", ["single", "double"])
def test_free_space_reaches_goal(dyn):
    sc = small(dyn, obstacles=[])
    lg = run(sc, "MilpMpcCbf")
    s = lg.summary
    assert s["reached"] and s["min_h"] == math.inf and s["intervention_time"] == 0
    assert lg.h.shape == (len(lg), 0)
    # path stays close to the segment start -> goal
    d = np.array([0.5, 2.0]), np.array([5.5, 2.2])
    v = d[1] - d[0]
    r = lg.x[:, :2] - d[0]
    off = np.abs(v[0] * r[:, 1] - v[1] * r[:, 0]) / np.linalg.norm(v)
    assert off.max() < 0.25


@pytest.mark.parametrize("dyn", ["single", "double"])
def test_block_is_passed_safely(dyn):
    lg = run(small(dyn), "MilpMpcCbf")
    s = lg.summary
    assert s["reached"]
    assert s["min_h"] >= -1e-6
    assert s["fault_count"] == 0
    assert lg.intervened.any()
    if dyn == "double":
        assert np.nanmin(lg.psi1) >= -1e-6


def test_multi_rate_schedule():
    sc = small()
    cfg = SimConfig.from_scenario(sc)
    lg = run(sc, "MilpMpcCbf", cfg)
    ks = np.nonzero(lg.replanned)[0]
    expect = np.arange(0, len(lg) - 1, cfg.n_mpc)
    assert np.array_equal(ks, expect)
    assert not run(sc, "ClfCbfQp", cfg).replanned.any()


def test_runs_are_deterministic():
    sc = small("double")
    a, b = run(sc, "MilpMpcCbf"), run(sc, "MilpMpcCbf")
    for name in ("t", "x", "u_ref", "u_star", "h", "psi1"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.summary == b.summary


def test_log_rows_are_consistent():
    lg = run(small(), "MilpMpcOnly")
    n = len(lg)
    assert lg.x.shape == (n, 2) and lg.u_star.shape == (n, 2) and lg.h.shape == (n, 1)
    assert len(lg.planner_status) == n and len(lg.filter_status) == n
    assert np.array_equal(lg.u_star[-1], [0, 0])
    assert np.allclose(np.diff(lg.t), lg.dt)
    # without the filter the applied input is the planner's, up to clipping roundoff
    assert np.allclose(lg.u_star, lg.u_ref, rtol=0, atol=1e-12)


def test_start_overlap_is_rejected():
    sc = small()
    sc.x_s = np.array([3.0, 2.0])
    with pytest.raises(ConfigError, match="start"):
        run(sc, "MilpMpcCbf")


def test_double_integrator_initial_psi1_check():
    sc = small("double", start=(1.9, 2.0))
    sc.x_s = np.array([1.9, 2.0, 5.0, 0.0])  # racing toward the block
    with pytest.raises(ConfigError, match="psi1"):
        run(sc, "MilpMpcCbf")
    # the reactive baseline does not rely on psi1 at the start
    run(sc.with_params(t_final=0.05), "ClfCbfQp")


# ---------------------------------------------------------------- sampled-data gap

GAP_CASES = [
    pytest.param("u_trap", "single", marks=pytest.mark.xfail(
        strict=True, reason="measured gap 6.1e-3: first-order ZOH error of the filtered flow "
                            "around the lower arm corner; shrinks to 1.9e-3 and 1.0e-3 on "
                            "further halvings")),
    ("u_trap", "double"),
    pytest.param("maze", "single", marks=pytest.mark.slow),
    pytest.param("maze", "double", marks=pytest.mark.slow),
]


@pytest.mark.parametrize("name, dyn", GAP_CASES)
def test_halving_dt_barely_moves_min_h(name, dyn):
    sc = bundled(name, dyn)
    coarse = run(sc, "MilpMpcCbf", SimConfig.from_scenario(sc))
    fine = run(sc, "MilpMpcCbf", SimConfig.from_scenario(sc, dt=sc.params["dt"] / 2))
    assert abs(coarse.summary["min_h"] - fine.summary["min_h"]) < 5e-3

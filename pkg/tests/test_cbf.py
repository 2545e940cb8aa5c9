import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from milpcbf.cbf import (Feature, InsideObstacle, barrier, face_barrier, first_order_constraint,
                         hocbf_constraint, psi1, robust_barrier, signed_distance, solve_min_dist)
from milpcbf.geometry import ConfigObstacle, box, configuration_obstacle, polygon_distance_oracle
from milpcbf.verify import FD_STEP, feature_pair_distance, random_configuration, run_suite

seeds = st.integers(0, 2**31 - 1)


def point_co(poly):
    return configuration_obstacle([[0.0, 0.0]], poly)


def fd_gradient(co, p, step=FD_STEP):
    g = np.zeros(2)
    for i in range(2):
        e = np.zeros(2)
        e[i] = step
        g[i] = (barrier(co, p + e).h - barrier(co, p - e).h) / (2 * step)
    return g


# ---------------------------------------------------------------- min-dist

def test_min_dist_vertex_case():
    co = point_co(box(1, 1, 2, 2))
    sol = solve_min_dist(co, [0, 0])
    assert sol.feature is Feature.VERTEX
    assert sol.z_star == pytest.approx([1, 1])
    assert sol.dist == pytest.approx(math.sqrt(2))
    facets = {r for r, (a, b) in enumerate(zip(co.Ac, co.bc0)) if abs(a @ [1, 1] - b) < 1e-12}
    assert set(sol.active_rows) == facets and len(facets) == 2
    assert np.all(sol.lambda_star > 0)


def test_min_dist_edge_case():
    sol = solve_min_dist(point_co(box(1, -1, 2, 1)), [0, 0])
    assert sol.feature is Feature.EDGE
    assert sol.z_star == pytest.approx([1, 0])
    assert sol.dist == pytest.approx(1.0)
    assert len(sol.active_rows) == 1 and sol.lambda_star[0] == pytest.approx(2.0)


def test_min_dist_interior_and_signed_distance():
    co = point_co(box(-1, -1, 1, 1))
    assert solve_min_dist(co, [0.2, 0]).feature is Feature.INTERIOR
    assert signed_distance(co, [0.2, 0]) == pytest.approx(-0.8)
    assert signed_distance(co, [3, 0]) == pytest.approx(2.0)
    with pytest.raises(InsideObstacle):
        barrier(co, [0.2, 0])


@given(seeds)
def test_min_dist_matches_oracles(seed):
    rng = np.random.default_rng(seed)
    robot, obs, co, p = random_configuration(rng, 1e-3, 3.0)
    d = solve_min_dist(co, p).dist
    assert d == pytest.approx(feature_pair_distance(co, p), abs=1e-8)
    assert d == pytest.approx(polygon_distance_oracle(robot.translate(p), obs), abs=1e-8)


@given(seeds, st.tuples(st.floats(-3, 3), st.floats(-3, 3)))
def test_translation_identity(seed, p):
    rng = np.random.default_rng(seed)
    _, _, co, _ = random_configuration(rng, 0.1, 2.0)
    p = np.asarray(p)
    moved = ConfigObstacle(co.Ac, co.bc0 - co.Ac @ p, co.vertices0 - p, co.source)
    a, b = solve_min_dist(co, p), solve_min_dist(moved, [0, 0])
    assert a.feature is b.feature
    assert a.dist == pytest.approx(b.dist, abs=1e-12)
    assert np.allclose(a.z_star, b.z_star, atol=1e-12)


# ---------------------------------------------------------------- barrier

def test_barrier_vertex_example():
    be = barrier(point_co(box(1, 1, 2, 2)), [0, 0])
    s = 1 / math.sqrt(2)
    assert be.h == pytest.approx(math.sqrt(2))
    assert be.n == pytest.approx([-s, -s])
    assert np.allclose(be.H, s * np.array([[0.5, -0.5], [-0.5, 0.5]]))


def test_barrier_edge_example_and_d_safe():
    be = barrier(point_co(box(1, -1, 2, 1)), [0, 0], d_safe=0.25)
    assert be.h == pytest.approx(0.75)
    assert be.n == pytest.approx([-1, 0])
    assert np.array_equal(be.H, np.zeros((2, 2)))


@given(seeds)
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    _, _, co, p = random_configuration(rng, 0.05, 3.0)
    assert np.allclose(barrier(co, p).n, fd_gradient(co, p), atol=1e-5, rtol=0)


@given(seeds)
def test_hessian_structure(seed):
    rng = np.random.default_rng(seed)
    _, _, co, p = random_configuration(rng, 0.05, 3.0)
    be = barrier(co, p)
    assert np.allclose(be.H @ be.n, 0, atol=1e-12)
    assert np.allclose(be.H, be.H.T, atol=0)
    assert np.min(np.linalg.eigvalsh(be.H)) >= -1e-12
    expect = 1 / be.dist if be.feature is Feature.VERTEX else 0.0
    assert np.trace(be.H) == pytest.approx(expect, rel=1e-12, abs=0)


def test_barrier_is_continuous_across_feature_switch():
    co = point_co(box(1, -1, 2, 1))
    # slide past the corner (1, 1): edge feature below y=1, vertex above
    ys = np.linspace(0.5, 1.5, 2001)
    hs = np.array([barrier(co, [0.0, y]).h for y in ys])
    feats = {barrier(co, [0.0, y]).feature for y in ys}
    assert feats == {Feature.EDGE, Feature.VERTEX}
    assert np.max(np.abs(np.diff(hs))) <= (ys[1] - ys[0]) * 1.0001


def test_face_and_robust_barrier():
    co = point_co(box(-1, -1, 1, 1))
    fb = face_barrier(co, [0.7, 0.1])
    assert fb.h == pytest.approx(-0.3)
    assert fb.n == pytest.approx([1, 0])  # moving +x leaves the box
    assert robust_barrier(co, [0.7, 0.1]).h == pytest.approx(-0.3)
    # outside: lower bound of the true distance
    assert face_barrier(co, [2, 2]).h <= barrier(co, [2, 2]).h
    # touching: the face normal is used
    be = robust_barrier(co, [-1 - 1e-9, 0.0])
    assert be.feature is Feature.INTERIOR and be.n == pytest.approx([-1, 0])
    ok = robust_barrier(co, [-2, 0.0])
    assert ok.feature is Feature.EDGE


# ---------------------------------------------------------------- constraint rows

def test_first_order_examples():
    be = barrier(point_co(box(1, -1, 2, 1)), [0, 0])
    row = first_order_constraint(be, np.zeros(2), np.eye(2), 3.0)
    assert row.coeff_u == pytest.approx([-1, 0])
    assert row.rhs == pytest.approx(-3.0)
    assert row.satisfied([3, 7]) and not row.satisfied([3.1, 0])
    twice = first_order_constraint(be, np.zeros(2), np.eye(2), 6.0)
    assert twice.rhs == pytest.approx(2 * row.rhs)


def test_first_order_boundary_blocks_inward_motion():
    be = face_barrier(point_co(box(1, -1, 2, 1)), [0, 0], d_safe=1.0)
    assert be.h == pytest.approx(0.0)
    row = first_order_constraint(be, np.zeros(2), np.eye(2), 3.0)
    assert row.rhs == pytest.approx(0.0)


@given(seeds, st.tuples(st.floats(-5, 5), st.floats(-5, 5)))
def test_first_order_row_implies_decay_bound(seed, u_try):
    rng = np.random.default_rng(seed)
    _, _, co, p = random_configuration(rng, 0.05, 3.0)
    be = barrier(co, p)
    k = 3.0
    row = first_order_constraint(be, np.zeros(2), np.eye(2), k)
    u = np.asarray(u_try)
    if not row.satisfied(u):
        u = u + (row.rhs - row.coeff_u @ u) * row.coeff_u  # project onto the boundary
    hdot = float(be.n @ u)
    assert hdot + k * be.h >= -1e-9


def test_hocbf_examples():
    be = barrier(point_co(box(1, -1, 2, 1)), [0, 0])
    row = hocbf_constraint(be, [0, 0], 2, 10)
    assert row.rhs == pytest.approx(-20 * be.h)
    row = hocbf_constraint(be, [1, 0], 2, 10)
    assert row.coeff_u == pytest.approx([-1, 0])
    assert row.rhs == pytest.approx(-8.0)


def test_psi1_examples():
    be = barrier(point_co(box(1, -1, 2, 1)), [0, 0])
    assert psi1(be, [0, 0], 2) == pytest.approx(2.0)
    assert psi1(be, [0, 3], 2) == pytest.approx(2 * be.h)
    assert psi1(be, -be.n * 2 * be.h, 2) == pytest.approx(0.0, abs=1e-15)


def test_hocbf_expansion_identity_suite():
    rep = run_suite("hocbf", seed=7, n_cases=50)
    assert rep.passed, rep.line()

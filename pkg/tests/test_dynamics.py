import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from milpcbf.dynamics import DynamicsModel, DynKind, discretize, n_states, step_dynamics

vec2 = st.tuples(st.floats(-5, 5), st.floats(-5, 5))


def test_discretize_single():
    d = discretize("single", 0.2)
    assert np.array_equal(d.A, np.eye(2))
    assert np.allclose(d.B, 0.2 * np.eye(2), atol=0)


def test_discretize_double_position_block():
    d = discretize(DynKind.DOUBLE, 0.2)
    assert np.allclose(d.B[:2], 0.02 * np.eye(2), rtol=0, atol=1e-17)
    assert np.allclose(d.B[2:], 0.2 * np.eye(2))
    assert np.allclose(d.A[:2, 2:], 0.2 * np.eye(2))


def test_parse_and_errors():
    assert DynKind.parse("double_integrator") is DynKind.DOUBLE
    assert n_states("single") == 2 and n_states("double") == 4
    with pytest.raises(ValueError):
        DynKind.parse("triple")
    with pytest.raises(ValueError):
        discretize("single", 0.0)


@given(vec2, vec2, st.integers(1, 20))
def test_rollout_matches_closed_form(u, v0, steps):
    dt = 0.2
    d = discretize("double", dt)
    x0 = np.array([1.0, -2.0, *v0])
    u = np.array(u)
    x = x0.copy()
    for _ in range(steps):
        x = d.A @ x + d.B @ u
    t = steps * dt
    p = x0[:2] + t * x0[2:] + 0.5 * t * t * u
    v = x0[2:] + t * u
    assert np.allclose(x, np.r_[p, v], rtol=0, atol=1e-12 * (1 + np.abs(np.r_[p, v]).max()))


def test_step_dynamics_examples():
    assert np.allclose(step_dynamics([0, 0], [1, 0], 0.01, DynamicsModel(DynKind.SINGLE)), [0.01, 0])
    assert np.allclose(step_dynamics([0, 0, 1, 0], [0, 0], 0.01, DynamicsModel(DynKind.DOUBLE)),
                       [0.01, 0, 1, 0])


def test_zoh_semigroup():
    x = np.array([0.3, -0.1, 0.5, 2.0])
    u = np.array([-1.5, 0.7])
    y = x.copy()
    for _ in range(100):
        y = step_dynamics(y, u, 0.01, "double")
    assert np.allclose(y, step_dynamics(x, u, 1.0, "double"), atol=1e-12)


def test_model_matrices():
    m = DynamicsModel(DynKind.DOUBLE)
    assert np.array_equal(m.f([1, 2, 3, 4]), [3, 4, 0, 0])
    assert m.g().shape == (4, 2)
    assert np.array_equal(DynamicsModel(DynKind.SINGLE).g(), np.eye(2))

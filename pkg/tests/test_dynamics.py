import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointmpc.dynamics import (AgentState, ControlInput, CorruptedStateError, DynamicsParams, clamp_input,
                               input_bounds, min_pairwise_distance, rollout, rollout_array, step, wrap_angle)


def test_step_constant_acceleration_hand_values(params):
    x = AgentState([1.0, 2.0, 10.0], [0.5, 0.0, -1.0], 0.2)
    u = ControlInput([2.0, -1.0, 0.0], 0.5)
    y = step(x, u, params)
    # p + v Ts + a Ts^2 / 2 with Ts = 0.1
    np.testing.assert_allclose(y.position, [1.06, 1.995, 9.9], atol=1e-15)
    np.testing.assert_allclose(y.velocity, [0.7, -0.1, -1.0], atol=1e-15)
    assert y.yaw == pytest.approx(0.25)


def test_yaw_wraps_across_pi(params):
    x = AgentState([0, 0, 10], yaw=math.pi - 0.01)
    y = step(x, ControlInput(yaw_rate=1.0), params)
    assert y.yaw == pytest.approx(-math.pi + 0.09)


def test_wrap_angle_range():
    a = np.linspace(-20, 20, 4001)
    w = wrap_angle(a)
    assert np.all(w > -math.pi) and np.all(w <= math.pi)
    np.testing.assert_allclose(np.cos(w), np.cos(a), atol=1e-12)
    assert wrap_angle(-math.pi) == pytest.approx(math.pi)


def test_rollout_matches_array_rollout(params, rng):
    x0 = AgentState(rng.normal(size=3), rng.normal(size=3), 0.3)
    U = rng.uniform(-3, 3, (12, 4))
    seq = rollout(x0, [ControlInput.from_array(u) for u in U], params)
    arr = rollout_array(x0.as_array(), U, params.Ts)
    np.testing.assert_allclose([s.as_array()[:6] for s in seq], arr[:, :6], atol=1e-12)
    np.testing.assert_allclose(np.cos([s.yaw for s in seq]), np.cos(arr[:, 6]), atol=1e-12)


def test_rollout_matches_state_space_powers(params, rng):
    Ts = params.Ts
    A = np.eye(6)
    A[:3, 3:] = Ts * np.eye(3)
    B = np.vstack([0.5 * Ts**2 * np.eye(3), Ts * np.eye(3)])
    x = rng.normal(size=6)
    U = rng.normal(size=(20, 4))
    arr = rollout_array(np.r_[x, 0.0], U, Ts)
    for k in range(20):
        x = A @ x + B @ U[k, :3]
        np.testing.assert_allclose(arr[k, :6], x, atol=1e-12)


def test_rejects_non_finite(params):
    with pytest.raises(CorruptedStateError):
        step(AgentState([0, 0, np.nan]), ControlInput(), params)
    with pytest.raises(CorruptedStateError):
        step(AgentState([0, 0, 1]), ControlInput([np.inf, 0, 0]), params)


def test_rollout_empty_inputs_rejected(params):
    with pytest.raises(ValueError):
        rollout(AgentState([0, 0, 1]), [], params)
    with pytest.raises(ValueError):
        rollout_array(np.zeros(7), np.zeros((0, 4)), 0.1)


@pytest.mark.parametrize("field", ["Ts", "a_max", "omega_max", "d_min"])
def test_params_validation(field):
    with pytest.raises(ValueError):
        DynamicsParams(**{field: 0.0})
    with pytest.raises(ValueError):
        DynamicsParams(**{field: math.nan})


def test_clamp_and_bounds(params):
    u = clamp_input(ControlInput([9, -9, 1], -7), params)
    np.testing.assert_array_equal(u.accel, [4, -4, 1])
    assert u.yaw_rate == -1.5
    lo, hi = input_bounds(params, 3)
    assert lo.shape == (12,)
    np.testing.assert_array_equal(hi[:4], [4, 4, 4, 1.5])
    np.testing.assert_array_equal(lo, -hi)


def test_min_pairwise_distance():
    states = [AgentState([0, 0, 10]), AgentState([3, 4, 10]), AgentState([10, 0, 10])]
    assert min_pairwise_distance(states) == pytest.approx(5.0)
    with pytest.raises(ValueError):
        min_pairwise_distance(states[:1])


def test_state_round_trip():
    x = AgentState([1, 2, 3], [4, 5, 6], 0.7)
    assert np.array_equal(AgentState.from_array(x.as_array()).as_array(), x.as_array())


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-4, 4), min_size=3, max_size=3), st.floats(0.01, 1.0))
def test_zero_velocity_displacement_is_half_a_t_squared(acc, Ts):
    y = step(AgentState([0, 0, 5]), ControlInput(acc), DynamicsParams(Ts=Ts))
    np.testing.assert_allclose(y.position - [0, 0, 5], 0.5 * np.array(acc) * Ts**2, atol=1e-12)

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from jointmpc.beam import (alignment, electronic_steer, gaussian_gain, hybrid_gain, hybrid_gain_gradient,
                           hybrid_gain_slope, link_capacity, los_azimuth)
from jointmpc.channel import LinkBudget


def test_azimuth_frame():
    assert los_azimuth([0, 0, 1], [1, 0, 1]) == pytest.approx(0.0)
    assert los_azimuth([0, 0, 1], [0, 1, 1]) == pytest.approx(math.pi / 2)
    assert los_azimuth([0, 0, 1], [-1, 0, 1]) == pytest.approx(math.pi)
    with pytest.raises(ValueError):
        los_azimuth([1, 1, 0], [1, 1, 5])


def test_gain_on_boresight_is_array_size(budget):
    assert hybrid_gain(0.0, budget) == pytest.approx(16.0)
    assert gaussian_gain(1.0, 1.0, budget) == pytest.approx(16.0)


def test_gaussian_half_power(budget):
    assert gaussian_gain(budget.hpbw_rad / 2, 0.0, budget) == pytest.approx(8.0)


def test_scan_loss_at_fov_edge(budget):
    # cos(60 deg)^1.3 = 0.5^1.3
    assert hybrid_gain(math.radians(60), budget) == pytest.approx(16 * 0.5**1.3)


def test_residual_beyond_fov(budget):
    dpsi = math.radians(60) + budget.hpbw_rad / 2
    assert hybrid_gain(dpsi, budget) == pytest.approx(16 * 0.5**1.3 * 0.5)


def test_alignment_decomposition(budget):
    a = alignment(0.0, [0, 0, 5], [0, 10, 5], budget)
    assert a.los_azimuth == pytest.approx(math.pi / 2)
    assert a.elec_angle == pytest.approx(budget.fov_rad)
    assert a.residual == pytest.approx(math.pi / 2 - budget.fov_rad)
    assert electronic_steer(-2.0, budget) == -budget.fov_rad


def test_gain_matches_oracle(budget, rng):
    for d in rng.uniform(-7, 7, 300):
        assert hybrid_gain(d, budget) == pytest.approx(oracles.hybrid_gain(d), rel=1e-12, abs=1e-300)


def test_slope_matches_fd(budget, rng):
    for d in rng.uniform(-math.pi + 0.01, math.pi - 0.01, 300):
        if abs(abs(d) - budget.fov_rad) < 1e-4:
            continue
        fd = (oracles.hybrid_gain(d + 1e-7) - oracles.hybrid_gain(d - 1e-7)) / 2e-7
        assert hybrid_gain_slope(d, budget) == pytest.approx(fd, rel=1e-5, abs=1e-9)


def test_gain_gradient_matches_fd(budget, rng):
    for _ in range(200):
        pi = np.array([*rng.uniform(-10, 10, 2), 10.0])
        pj = np.array([*rng.uniform(-10, 10, 2), 10.0])
        yaw = rng.uniform(-math.pi, math.pi)

        def g(x):
            return oracles.hybrid_gain(math.atan2(pj[1] - x[1], pj[0] - x[0]) - x[3])

        x = np.r_[pi, yaw]
        dpsi = math.remainder(math.atan2(pj[1] - pi[1], pj[0] - pi[0]) - yaw, 2 * math.pi)
        if abs(abs(dpsi) - budget.fov_rad) < 1e-3 or np.hypot(*(pj - pi)[:2]) < 1.0:
            continue
        gy, gp = hybrid_gain_gradient(yaw, pi, pj, budget)
        fd = oracles.central_diff(g, x, 1e-7)
        assert oracles.rel_err(np.r_[gp, gy], fd, floor=1e-8) < 1e-5


def test_capacity(budget):
    assert link_capacity(0.0, budget) == 0.0
    assert link_capacity(1.0, budget) == pytest.approx(2.16e9)
    assert link_capacity(3.0, budget) == pytest.approx(2 * 2.16e9)
    with pytest.raises(ValueError):
        link_capacity(-1.0, budget)


@settings(max_examples=200, deadline=None)
@given(st.floats(-10, 10))
def test_gain_bounded_even_and_periodic(d):
    b = LinkBudget()
    g = hybrid_gain(d, b)
    assert 0 <= g <= b.n_ula
    assert g == pytest.approx(hybrid_gain(-d, b), rel=1e-9, abs=1e-300)
    assert g == pytest.approx(hybrid_gain(d + 2 * math.pi, b), rel=1e-9, abs=1e-300)

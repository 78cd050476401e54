import math

import numpy as np
import pytest

import oracles
from jointmpc.beam import hybrid_gain
from jointmpc.channel import LinkBudget, channel_power
from jointmpc.dynamics import AgentState
from jointmpc.surrogate import (SampleRegion, SmoothingConfig, estimate_lipschitz, raw_capacity_gradient,
                                regularized_gradient, smooth_field, smoothed_channel_power, smoothed_hybrid_gain,
                                smoothed_snr, stencil_mean_capacity, stencil_offsets, stencil_points,
                                surrogate_cost)


def _random_link(rng, spread=20.0):
    pi = np.array([*rng.uniform(-spread, spread, 2), rng.uniform(5, 15)])
    while True:
        pj = np.array([*rng.uniform(-spread, spread, 2), rng.uniform(5, 15)])
        if np.hypot(*(pj - pi)[:2]) > 1.0:
            return pi, pj


def test_stencil_layout():
    off = stencil_offsets(0.1)
    assert off.shape == (7, 3)
    np.testing.assert_array_equal(off[0], 0)
    np.testing.assert_allclose(off.sum(axis=0), 0)
    np.testing.assert_allclose(np.linalg.norm(off[1:], axis=1), 0.1)
    assert stencil_offsets(0.0).shape == (1, 3)
    np.testing.assert_allclose(stencil_points([1, 2, 3], SmoothingConfig(0.1))[4], [0.9, 2, 3])


def test_smoothing_config_validation():
    with pytest.raises(ValueError):
        SmoothingConfig(0.0)
    with pytest.raises(ValueError):
        SmoothingConfig(0.05, stencil_size=5)


def test_smooth_field_exact_on_quadratics(rng):
    # the stencil integrates constants and linear terms exactly; x^2 picks up 2 eps^2 / 7
    cfg = SmoothingConfig(0.2)
    p = rng.normal(size=3)
    assert smooth_field(lambda q: 3.0 + q @ [1, -2, 0.5], p, cfg) == pytest.approx(3.0 + p @ [1, -2, 0.5])
    assert smooth_field(lambda q: q[0] ** 2, p, cfg) == pytest.approx(p[0] ** 2 + 2 * 0.04 / 7)


def test_snr_arithmetic_example():
    # p_bar = 0.01, g = 16, snr0 = 6.25 gives snr 1 and capacity W (free space at 10 m, boresight)
    b = LinkBudget(gamma_refl=0.0, snr0=6.25)
    pi, pj = np.array([0, 0, 10.0]), np.array([10.0, 0, 10.0])
    s = smoothed_snr(pi, 0.0, pj, b, SmoothingConfig(1e-9))
    assert s.p_bar == pytest.approx(0.01, rel=1e-6)
    assert s.g_eps == pytest.approx(16.0, rel=1e-6)
    assert s.snr_bar == pytest.approx(1.0, rel=1e-6)
    assert s.surrogate_capacity == pytest.approx(b.bandwidth_hz, rel=1e-6)


def test_smoothed_components_match_direct_means(budget, rng):
    cfg = SmoothingConfig(0.07)
    for _ in range(20):
        pi, pj = _random_link(rng)
        yaw = rng.uniform(-math.pi, math.pi)
        pts = pi + stencil_offsets(0.07)
        p_direct = np.mean([oracles.two_ray_power(q, pj) for q in pts])
        g_direct = np.mean([oracles.hybrid_gain(math.atan2(pj[1] - q[1], pj[0] - q[0]) - yaw) for q in pts])
        assert smoothed_channel_power(pi, pj, budget, cfg) == pytest.approx(p_direct, rel=1e-6)
        assert smoothed_hybrid_gain(pi, yaw, pj, budget, cfg) == pytest.approx(g_direct, rel=1e-9, abs=1e-300)
        assert smoothed_hybrid_gain(pi, yaw, pj, budget, cfg) <= budget.n_ula


def test_smoothed_gain_close_to_gain_on_axis(budget):
    # neighbour along +x: the x offsets do not move the azimuth; y offsets move it second-order
    cfg = SmoothingConfig(0.05)
    pi, pj = np.array([0, 0, 10.0]), np.array([20.0, 0, 10.0])
    d = 20.0
    bound = 16 * (0.05 / d) ** 2
    assert abs(smoothed_hybrid_gain(pi, 0.0, pj, budget, cfg) - hybrid_gain(0.0, budget)) <= bound


def test_zero_factor_gives_zero_capacity():
    b = LinkBudget(n_ula=1.0, hpbw_rad=1e-3)
    # 180 degrees off with a pencil beam: gain underflows to zero
    s = smoothed_snr([0, 0, 10], math.pi, [10, 0, 10], b, SmoothingConfig(0.01))
    assert s.g_eps == 0.0
    assert s.surrogate_capacity == 0.0


def test_coupled_jensen_bound_is_exact(budget, rng):
    # log is concave, so W log2(1 + mean snr) bounds mean W log2(1 + snr) whenever the mean
    # is taken of the full product
    for _ in range(300):
        pi, pj = _random_link(rng)
        yaw = rng.uniform(-math.pi, math.pi)
        pts = pi + stencil_offsets(rng.uniform(0.01, 0.2))
        snr = np.array([budget.snr0 * channel_power(q, pj, budget)
                        * hybrid_gain(math.atan2(pj[1] - q[1], pj[0] - q[0]) - yaw, budget) for q in pts])
        assert np.log2(1 + snr.mean()) >= np.log2(1 + snr).mean() - 1e-12


def test_decoupled_bound_inside_scan_range(budget, rng):
    # with the link inside the electronic scan range the gain is smooth over the stencil
    for _ in range(500):
        pi, pj = _random_link(rng)
        az = math.atan2(pj[1] - pi[1], pj[0] - pi[0])
        yaw = az + rng.uniform(-0.9, 0.9) * budget.fov_rad
        cfg = SmoothingConfig(rng.uniform(0.01, 0.2))
        s = smoothed_snr(pi, yaw, pj, budget, cfg)
        assert s.surrogate_capacity >= stencil_mean_capacity(pi, yaw, pj, budget, cfg)


def test_surrogate_cost_additivity(budget, caplog):
    cfg = SmoothingConfig()
    a = AgentState([0, 0, 10], yaw=0.1)
    nb = AgentState([15, 2, 10])
    single = surrogate_cost(a, [nb], budget, cfg)
    assert single == pytest.approx(smoothed_snr(a.position, a.yaw, nb.position, budget, cfg).surrogate_capacity)
    assert surrogate_cost(a, [nb, nb], budget, cfg) == pytest.approx(2 * single)
    with caplog.at_level("WARNING"):
        assert surrogate_cost(a, [], budget, cfg) == 0.0
    assert "empty" in caplog.text


def test_surrogate_ring_positive(budget):
    cfg = SmoothingConfig()
    ring = [AgentState([12 * math.cos(t), 12 * math.sin(t), 10]) for t in (0, 2 * math.pi / 3, 4 * math.pi / 3)]
    for i, a in enumerate(ring):
        nxt = ring[(i + 1) % 3]
        yaw = math.atan2(*(nxt.position - a.position)[1::-1])
        v = surrogate_cost(AgentState(a.position, yaw=yaw), [nxt], budget, cfg)
        assert math.isfinite(v) and v > 0


def test_regularized_gradient_high_precision_fd(budget, rng):
    for _ in range(40):
        pi, pj = _random_link(rng)
        yaw = math.atan2(pj[1] - pi[1], pj[0] - pi[0]) + rng.normal(0, 0.3)
        eps = float(rng.choice([0.01, 0.05, 0.2]))
        gp, gy = regularized_gradient(AgentState(pi, yaw=yaw), [AgentState(pj)], budget, SmoothingConfig(eps))
        fd = oracles.central_diff_mp(lambda x: oracles.surrogate_capacity_mp(x[:3], x[3], [pj], eps), np.r_[pi, yaw])
        assert oracles.rel_err(np.r_[gp, gy], fd) < 1e-5


def test_yaw_gradient_vanishes_on_boresight(budget):
    # neighbour straight ahead on the x axis: the stencil is symmetric in y, so the yaw slope cancels
    gp, gy = regularized_gradient(AgentState([0, 0, 10], yaw=0.0), [AgentState([25, 0, 10])], budget,
                                  SmoothingConfig(0.05))
    assert abs(gy) < 1e-8 * max(1.0, np.linalg.norm(gp))


def test_gradient_weight_at_high_snr():
    # at snr_bar ~ 100 the log weight is W / (ln2 (1 + snr)); compare to W / (ln2 snr)
    b = LinkBudget()
    cfg = SmoothingConfig(0.05)
    pi, pj = np.array([0, 0, 10.0]), np.array([30.0, 0, 10.0])
    s = smoothed_snr(pi, 0.0, pj, b, cfg)
    b = LinkBudget(snr0=b.snr0 * 100.0 / s.snr_bar)
    s = smoothed_snr(pi, 0.0, pj, b, cfg)
    assert s.snr_bar == pytest.approx(100.0)
    gp, _ = regularized_gradient(AgentState(pi), [AgentState(pj)], b, cfg)
    p = smoothed_channel_power(pi, pj, b, cfg)
    dsnr = np.array([(b.snr0 * smoothed_channel_power(pi + e, pj, b, cfg) * s.g_eps
                      - b.snr0 * smoothed_channel_power(pi - e, pj, b, cfg) * s.g_eps) / 2e-7
                     for e in 1e-7 * np.eye(3)])
    approx = b.bandwidth_hz / (math.log(2) * s.snr_bar) * dsnr
    assert p > 0
    assert np.linalg.norm(gp) / np.linalg.norm(approx) == pytest.approx(1.0, rel=0.1)


def test_raw_gradient_is_zero_radius_case(budget):
    pi, pj = np.array([0, 0, 10.0]), np.array([14.0, 3, 11])
    v, g, gy = raw_capacity_gradient(pi, 0.2, pj, budget)
    fd = oracles.central_diff_mp(lambda x: oracles.surrogate_capacity_mp(x, 0.2, [pj], 0.0), pi)
    assert oracles.rel_err(g, fd) < 1e-5


def test_lipschitz_estimate_finite_and_smoothing_helps(budget):
    reg = SampleRegion()
    raw = estimate_lipschitz(budget, None, reg, 2000, seed=1)
    smooth = estimate_lipschitz(budget, SmoothingConfig(0.05), reg, 2000, seed=1)
    assert math.isfinite(smooth) and 0 < smooth < raw
    with pytest.raises(ValueError):
        estimate_lipschitz(budget, None, reg, 10)

"""Spatially smoothed surrogate capacity and its analytic gradient.

Smoothing averages a position field over a symmetric 7-point stencil
(centre plus ``+-eps`` along each body axis). The smoothed SNR of a link is
decoupled into the product of the smoothed channel power and the smoothed
hybrid gain, and the surrogate capacity is ``W log2(1 + smoothed SNR)``.
These functions are the scalar reference path; the horizon solver uses the
vectorised kernels in :mod:`jointmpc._kernels`, which are tested against them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .beam import hybrid_gain, hybrid_gain_gradient, link_capacity
from .channel import LinkBudget, channel_power, channel_power_gradient
from .dynamics import AgentState, wrap_angle

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)


@dataclass(frozen=True)
class SmoothingConfig:
    epsilon: float = 0.05
    stencil_size: int = 7

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"smoothing.epsilon must be > 0, got {self.epsilon!r}")
        if self.stencil_size != 7:
            raise ValueError("smoothing.stencil_size is fixed at 7")


def stencil_offsets(epsilon: float) -> np.ndarray:
    """The seven displacement vectors; a zero radius collapses to the single centre point."""
    if epsilon == 0.0:
        return np.zeros((1, 3))
    return np.vstack([np.zeros(3), epsilon * np.eye(3), -epsilon * np.eye(3)])


def stencil_points(p, cfg: SmoothingConfig) -> np.ndarray:
    return np.asarray(p, dtype=float) + stencil_offsets(cfg.epsilon)


def smooth_field(field: Callable[[np.ndarray], float], p, cfg: SmoothingConfig) -> float:
    values = [field(q) for q in stencil_points(p, cfg)]
    return float(sum(values) / len(values))


def smoothed_channel_power(pi, pj, budget: LinkBudget, cfg: SmoothingConfig) -> float:
    return smooth_field(lambda q: channel_power(q, pj, budget), pi, cfg)


def _gain_at(q, yaw, pj, budget):
    dx = pj[0] - q[0]
    dy = pj[1] - q[1]
    if dx == 0.0 and dy == 0.0:
        raise ValueError("stencil point has zero horizontal separation from neighbour")
    return hybrid_gain(wrap_angle(math.atan2(dy, dx) - yaw), budget)


def smoothed_hybrid_gain(pi, yaw: float, pj, budget: LinkBudget, cfg: SmoothingConfig) -> float:
    """Hybrid gain averaged over the position stencil with yaw held fixed."""
    pj = np.asarray(pj, dtype=float)
    return smooth_field(lambda q: _gain_at(q, yaw, pj, budget), pi, cfg)


@dataclass(frozen=True)
class SmoothedLink:
    p_bar: float
    g_eps: float
    snr_bar: float
    surrogate_capacity: float


def _link_terms(pi, yaw, pj, budget, offsets):
    """Smoothed power/gain and their gradients (position, yaw) for one link."""
    pj = np.asarray(pj, dtype=float)
    pts = np.asarray(pi, dtype=float) + offsets
    p_bar = 0.0
    g_bar = 0.0
    dp = np.zeros(3)
    dg = np.zeros(3)
    dg_yaw = 0.0
    for q in pts:
        p_bar += channel_power(q, pj, budget)
        dp += channel_power_gradient(q, pj, budget)
        g_bar += _gain_at(q, yaw, pj, budget)
        gy, gp = hybrid_gain_gradient(yaw, q, pj, budget)
        dg += gp
        dg_yaw += gy
    m = len(pts)
    return p_bar / m, g_bar / m, dp / m, dg / m, dg_yaw / m


def smoothed_snr(pi, yaw: float, pj, budget: LinkBudget, cfg: SmoothingConfig) -> SmoothedLink:
    p_bar = smoothed_channel_power(pi, pj, budget, cfg)
    g_eps = smoothed_hybrid_gain(pi, yaw, pj, budget, cfg)
    snr = budget.snr0 * p_bar * g_eps
    return SmoothedLink(p_bar, g_eps, snr, link_capacity(snr, budget))


def stencil_mean_capacity(pi, yaw: float, pj, budget: LinkBudget, cfg: SmoothingConfig) -> float:
    """Stencil average of the raw (unsmoothed) link capacity; bounded above by the surrogate."""
    pj = np.asarray(pj, dtype=float)
    return smooth_field(
        lambda q: link_capacity(budget.snr0 * channel_power(q, pj, budget) * _gain_at(q, yaw, pj, budget),
                                budget),
        pi, cfg)


def surrogate_cost(agent: AgentState, neighbors: Sequence[AgentState], budget: LinkBudget,
                   cfg: SmoothingConfig) -> float:
    """Sum of surrogate link capacities (bit/s) from ``agent`` to each neighbour."""
    if len(neighbors) == 0:
        logger.warning("surrogate_cost called with an empty neighbour set; returning 0")
        return 0.0
    return sum(smoothed_snr(agent.position, agent.yaw, nb.position, budget, cfg).surrogate_capacity
               for nb in neighbors)


def _surrogate_value_grad(pi, yaw, neighbor_positions, budget, offsets):
    total = 0.0
    grad_p = np.zeros(3)
    grad_yaw = 0.0
    scale = budget.bandwidth_hz / LN2
    for pj in neighbor_positions:
        p_bar, g_bar, dp, dg, dg_yaw = _link_terms(pi, yaw, pj, budget, offsets)
        snr = budget.snr0 * p_bar * g_bar
        total += budget.bandwidth_hz * math.log2(1.0 + snr)
        w = scale / (1.0 + snr)
        grad_p += w * budget.snr0 * (g_bar * dp + p_bar * dg)
        grad_yaw += w * budget.snr0 * p_bar * dg_yaw
    return total, grad_p, grad_yaw


def regularized_gradient(agent: AgentState, neighbors: Sequence[AgentState], budget: LinkBudget,
                         cfg: SmoothingConfig) -> tuple[np.ndarray, float]:
    """Exact gradient of :func:`surrogate_cost` w.r.t. the agent's position and yaw.

    Stencil offsets are constant, so the smoothed gradients are stencil means of
    the raw-field gradients; the per-link weight is ``(W/ln 2) / (1 + snr_bar)``.
    """
    _, grad_p, grad_yaw = _surrogate_value_grad(
        agent.position, agent.yaw, [nb.position for nb in neighbors], budget,
        stencil_offsets(cfg.epsilon))
    return grad_p, grad_yaw


def raw_capacity_gradient(pi, yaw: float, pj, budget: LinkBudget) -> tuple[float, np.ndarray, float]:
    """Unsmoothed capacity and gradient; used only to contrast against the surrogate."""
    return _surrogate_value_grad(pi, yaw, [pj], budget, stencil_offsets(0.0))


@dataclass(frozen=True)
class SampleRegion:
    """Link geometries over which the gradient Lipschitz constant is probed.

    The agent sits above the origin; the neighbour is placed at a random
    azimuth and horizontal range, and the agent's yaw points at it up to a
    Gaussian pointing error.
    """

    altitude: tuple = (8.0, 12.0)
    horizontal_range: tuple = (5.0, 45.0)
    yaw_jitter: float = 0.05
    pair_step: float = 1e-4


def _kernel_consts(budget: LinkBudget) -> np.ndarray:
    from . import _kernels as K

    c = np.zeros(K.N_CONSTS)
    c[K.WAVENUMBER] = 2.0 * math.pi / budget.wavelength_m
    c[K.GAMMA] = budget.gamma_refl
    c[K.SNR0] = budget.snr0
    c[K.BANDWIDTH] = budget.bandwidth_hz
    c[K.N_ULA] = budget.n_ula
    c[K.KAPPA] = budget.kappa
    c[K.SIGMA] = budget.sigma_rad
    c[K.FOV] = budget.fov_rad
    return c


def estimate_lipschitz(budget: LinkBudget, cfg: Optional[SmoothingConfig], sample_region: SampleRegion,
                       n_samples: int, seed: int = 0) -> float:
    """Empirical sup of ``|grad(x) - grad(y)| / |x - y|`` over sampled nearby pairs.

    ``cfg=None`` probes the raw (unsmoothed) capacity instead of the surrogate.
    The gradient is the position gradient of one link's capacity in bit/s/m, so
    the result is in bit/s/m^2. Pairs are ``pair_step`` apart in a random
    direction, which makes each ratio a directional Hessian estimate.
    """
    from . import _kernels as K

    if n_samples < 100:
        raise ValueError("estimate_lipschitz needs n_samples >= 100")
    rng = np.random.default_rng(seed)
    reg = sample_region
    n = n_samples
    pos = np.zeros((n, 3))
    pos[:, 2] = rng.uniform(*reg.altitude, n)
    azimuth = rng.uniform(-math.pi, math.pi, n)
    dist = rng.uniform(*reg.horizontal_range, n)
    nbr = np.column_stack([dist * np.cos(azimuth), dist * np.sin(azimuth), rng.uniform(*reg.altitude, n)])
    yaw = wrap_angle(azimuth + rng.normal(0.0, reg.yaw_jitter, n))
    direction = rng.normal(size=(n, 3))
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    offsets = np.ascontiguousarray(stencil_offsets(0.0 if cfg is None else cfg.epsilon))
    consts = _kernel_consts(budget)
    nbr3 = np.ascontiguousarray(nbr[:, None, :])
    _, g1, _ = K.comm_value_grad(pos, yaw, nbr3, consts, offsets)
    _, g2, _ = K.comm_value_grad(np.ascontiguousarray(pos + reg.pair_step * direction), yaw, nbr3, consts,
                                 offsets)
    ratios = np.linalg.norm(np.asarray(g1) - np.asarray(g2), axis=1) / reg.pair_step
    return float(ratios.max())

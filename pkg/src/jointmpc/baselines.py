"""Comparison controllers and the antenna evaluations applied to their trajectories.

Ideal, Ele and Std share one kinematic-MPC trajectory per realisation and differ
only in how the antenna is evaluated on it. PID is a reactive potential-field
law evaluated with omnidirectional antennas.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel import LinkBudget
from .cost import CostWeights
from .dynamics import AgentState, ControlInput, DynamicsParams, clamp_input, wrap_angle


class BaselineKind(enum.Enum):
    IDEAL_MPC = "ideal"
    ELE_MPC = "ele"
    STD_MPC = "std"
    PID = "pid"


@dataclass(frozen=True)
class PidGains:
    kp: float = 1.2
    kd: float = 1.8
    krep: float = 30.0
    range_factor: float = 2.0

    def __post_init__(self):
        if min(self.kp, self.kd, self.krep, self.range_factor) < 0:
            raise ValueError("baselines PID gains must be >= 0")


def kinematic_weights(weights: CostWeights) -> CostWeights:
    """Weights of the standard kinematic MPC: the same problem without the comm term."""
    return weights.with_(w_comm=0.0)


def pid_step(agent_states: Sequence[AgentState], refs: Sequence, gains: PidGains,
             params: DynamicsParams) -> list[ControlInput]:
    """PD tracking plus inverse-square repulsion inside ``range_factor * d_min``; yaw rate 0."""
    out = []
    reach = gains.range_factor * params.d_min
    for i, x in enumerate(agent_states):
        acc = gains.kp * (np.asarray(refs[i], dtype=float) - x.position) - gains.kd * x.velocity
        for j, other in enumerate(agent_states):
            if j == i:
                continue
            diff = x.position - other.position
            d = float(np.linalg.norm(diff))
            if 0.0 < d < reach:
                acc = acc + gains.krep * diff / d**3
        out.append(clamp_input(ControlInput(acc, 0.0), params))
    return out


def _raw_power(pi: np.ndarray, pj: np.ndarray, budget: LinkBudget) -> np.ndarray:
    los = pi - pj
    d1 = np.linalg.norm(los, axis=-1)
    d2 = np.sqrt(los[..., 0] ** 2 + los[..., 1] ** 2 + (pi[..., 2] + pj[..., 2]) ** 2)
    g = budget.gamma_refl
    k = 2.0 * math.pi / budget.wavelength_m
    return 1.0 / d1**2 + g * g / d2**2 + 2.0 * g * np.cos(k * (d2 - d1)) / (d1 * d2)


def _los_azimuth(pi: np.ndarray, pj: np.ndarray) -> np.ndarray:
    return np.arctan2(pj[..., 1] - pi[..., 1], pj[..., 0] - pi[..., 0])


def hybrid_gain_array(misalign: np.ndarray, budget: LinkBudget) -> np.ndarray:
    dpsi = wrap_angle(misalign)
    elec = np.clip(dpsi, -budget.fov_rad, budget.fov_rad)
    res = dpsi - elec
    return budget.n_ula * np.cos(elec) ** budget.kappa * np.exp(-res**2 / (2.0 * budget.sigma_rad**2))


def _capacity(snr: np.ndarray, budget: LinkBudget) -> np.ndarray:
    return budget.bandwidth_hz * np.log2(1.0 + snr)


def _link_positions(trajectory: np.ndarray, links):
    src = np.array([i for i, _ in links])
    dst = np.array([j for _, j in links])
    return trajectory[:, src, 0:3], trajectory[:, dst, 0:3], src


def evaluate_directional(trajectory: np.ndarray, topology, budget: LinkBudget, yaw: np.ndarray):
    """Capacity and |misalignment| per (step, link) for a given yaw series ``(T, N)``."""
    links = topology.links()
    pi, pj, src = _link_positions(trajectory, links)
    misalign = wrap_angle(_los_azimuth(pi, pj) - yaw[:, src])
    gain = hybrid_gain_array(misalign, budget)
    cap = _capacity(budget.snr0 * _raw_power(pi, pj, budget) * gain, budget)
    return cap, np.abs(misalign)


def evaluate_ideal(trajectory: np.ndarray, topology, budget: LinkBudget) -> np.ndarray:
    """Perfect instantaneous alignment: full array gain on every link."""
    pi, pj, _ = _link_positions(trajectory, topology.links())
    return _capacity(budget.snr0 * _raw_power(pi, pj, budget) * budget.n_ula, budget)


def velocity_yaw(trajectory: np.ndarray, initial_yaw, hover_speed: float = 0.1) -> np.ndarray:
    """Yaw aligned with horizontal velocity; held at the previous value when hovering."""
    T, N = trajectory.shape[:2]
    yaw = np.empty((T, N))
    prev = np.asarray(initial_yaw, dtype=float).copy()
    for t in range(T):
        v = trajectory[t, :, 3:5]
        moving = np.hypot(v[:, 0], v[:, 1]) >= hover_speed
        prev = np.where(moving, np.arctan2(v[:, 1], v[:, 0]), prev)
        yaw[t] = prev
    return yaw


def evaluate_ele(trajectory: np.ndarray, topology, budget: LinkBudget, hover_speed: float = 0.1):
    """Velocity-aligned airframe with electronic steering inside the field of view."""
    yaw = velocity_yaw(trajectory, trajectory[0, :, 6], hover_speed)
    return evaluate_directional(trajectory, topology, budget, yaw)


def evaluate_omni(trajectory: np.ndarray, topology, budget: LinkBudget) -> np.ndarray:
    pi, pj, _ = _link_positions(trajectory, topology.links())
    return _capacity(budget.snr0 * _raw_power(pi, pj, budget), budget)

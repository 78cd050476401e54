"""Discrete-time double-integrator dynamics with a decoupled yaw integrator.

State layout used by the array-level helpers is ``[px, py, pz, vx, vy, vz, yaw]``
and input layout is ``[ax, ay, az, yaw_rate]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

STATE_DIM = 7
INPUT_DIM = 4


class CorruptedStateError(ValueError):
    """Raised when a state or input contains NaN/inf."""


def wrap_angle(angle):
    """Wrap an angle (scalar or array) into ``(-pi, pi]``."""
    wrapped = np.mod(np.asarray(angle, dtype=float) + np.pi, 2.0 * np.pi)
    wrapped = np.where(wrapped <= 0.0, wrapped + 2.0 * np.pi, wrapped) - np.pi
    if np.ndim(wrapped) == 0:
        return float(wrapped)
    return wrapped


@dataclass(frozen=True)
class DynamicsParams:
    Ts: float = 0.1
    a_max: float = 4.0
    omega_max: float = 1.5
    d_min: float = 3.5

    def __post_init__(self):
        for name in ("Ts", "a_max", "omega_max", "d_min"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"dynamics.{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class AgentState:
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float).reshape(3))
        object.__setattr__(self, "velocity", np.asarray(self.velocity, dtype=float).reshape(3))
        object.__setattr__(self, "yaw", float(self.yaw))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.position, self.velocity, [self.yaw]])

    @classmethod
    def from_array(cls, x) -> "AgentState":
        x = np.asarray(x, dtype=float)
        return cls(x[0:3], x[3:6], x[6])

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))
                    and math.isfinite(self.yaw))


@dataclass(frozen=True)
class ControlInput:
    accel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw_rate: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "accel", np.asarray(self.accel, dtype=float).reshape(3))
        object.__setattr__(self, "yaw_rate", float(self.yaw_rate))

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.accel, [self.yaw_rate]])

    @classmethod
    def from_array(cls, u) -> "ControlInput":
        u = np.asarray(u, dtype=float)
        return cls(u[0:3], u[3])


def step(state: AgentState, control: ControlInput, params: DynamicsParams) -> AgentState:
    """Advance one sampling period with the exact zero-order-hold double integrator."""
    if not state.is_finite() or not (np.all(np.isfinite(control.accel)) and math.isfinite(control.yaw_rate)):
        raise CorruptedStateError("non-finite state or input passed to step()")
    Ts = params.Ts
    position = state.position + state.velocity * Ts + 0.5 * control.accel * Ts * Ts
    velocity = state.velocity + control.accel * Ts
    yaw = wrap_angle(state.yaw + control.yaw_rate * Ts)
    return AgentState(position, velocity, yaw)


def rollout(x0: AgentState, inputs: Sequence[ControlInput], params: DynamicsParams) -> list[AgentState]:
    """Predicted states ``x(1) .. x(N)``; element ``k`` is ``step`` applied ``k+1`` times."""
    if len(inputs) == 0:
        raise ValueError("rollout requires at least one input")
    states = []
    x = x0
    for u in inputs:
        x = step(x, u, params)
        states.append(x)
    return states


def rollout_array(x0: np.ndarray, U: np.ndarray, Ts: float) -> np.ndarray:
    """Vectorised rollout on raw arrays; returns an ``(N, 7)`` array of states x(1)..x(N).

    Yaw is returned unwrapped here (callers wrap when they need it).
    """
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] == 0:
        raise ValueError("rollout_array requires a non-empty (N, 4) input array")
    acc = U[:, :3]
    vel = x0[3:6] + Ts * np.cumsum(acc, axis=0)
    vel_prev = np.vstack([x0[3:6], vel[:-1]])
    pos = x0[0:3] + np.cumsum(vel_prev * Ts + 0.5 * acc * Ts * Ts, axis=0)
    yaw = x0[6] + Ts * np.cumsum(U[:, 3])
    return np.column_stack([pos, vel, yaw])


def clamp_input(control: ControlInput, params: DynamicsParams) -> ControlInput:
    accel = np.clip(control.accel, -params.a_max, params.a_max)
    yaw_rate = min(max(control.yaw_rate, -params.omega_max), params.omega_max)
    return ControlInput(accel, yaw_rate)


def input_bounds(params: DynamicsParams, horizon: int) -> tuple[np.ndarray, np.ndarray]:
    """Stage-major lower/upper bounds for a flattened ``(horizon, 4)`` input vector."""
    upper = np.tile([params.a_max, params.a_max, params.a_max, params.omega_max], horizon)
    return -upper, upper


def min_pairwise_distance(states: Sequence[AgentState]) -> float:
    if len(states) < 2:
        raise ValueError("min_pairwise_distance needs at least two agents")
    return min(float(np.linalg.norm(a.position - b.position))
               for a, b in itertools.combinations(states, 2))

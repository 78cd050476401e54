"""Per-agent stage cost and the horizon objective with its adjoint gradient.

The communication term enters the cost in Gbit/s (``COMM_UNIT``) so that a
unit ``w_comm`` is commensurate with the metre-scale tracking weights.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .channel import LinkBudget
from .dynamics import AgentState, ControlInput, DynamicsParams, rollout_array
from .surrogate import SmoothingConfig, stencil_offsets, surrogate_cost

COMM_UNIT = 1e9
BARRIER_FLOOR = _kernels._fallback.BARRIER_FLOOR


@dataclass(frozen=True)
class CostWeights:
    q_pos: np.ndarray = field(default_factory=lambda: 2.0 * np.eye(3))
    r_diag: np.ndarray = field(default_factory=lambda: np.array([0.1, 0.1, 0.1, 0.001]))
    w_comm: float = 1.0
    w_safe: float = 500.0
    mu: float = 6.0

    def __post_init__(self):
        q = np.asarray(self.q_pos, dtype=float)
        if q.ndim == 0:
            q = float(q) * np.eye(3)
        elif q.ndim == 1:
            q = np.diag(q)
        r = np.asarray(self.r_diag, dtype=float).reshape(-1)
        object.__setattr__(self, "q_pos", q)
        object.__setattr__(self, "r_diag", r)
        if q.shape != (3, 3) or not np.allclose(q, q.T):
            raise ValueError("cost.q_pos must be a symmetric 3x3 matrix")
        if np.linalg.eigvalsh(q).min() <= 0:
            raise ValueError("cost.q_pos must be positive definite")
        if r.shape != (4,) or np.any(r < 0):
            raise ValueError("cost.r_diag must be 4 non-negative weights")
        if self.w_comm < 0 or self.w_safe < 0:
            raise ValueError("cost.w_comm and cost.w_safe must be >= 0")
        if not self.mu > 0:
            raise ValueError("cost.mu must be > 0")

    def with_(self, **changes) -> "CostWeights":
        values = dict(q_pos=self.q_pos, r_diag=self.r_diag, w_comm=self.w_comm,
                      w_safe=self.w_safe, mu=self.mu)
        values.update(changes)
        return CostWeights(**values)


@dataclass(frozen=True)
class HorizonPlan:
    """An agent's input sequence and the predicted states ``x(1)..x(N)`` it produces."""

    inputs: np.ndarray
    states: np.ndarray
    stamp: int = 0

    @property
    def horizon(self) -> int:
        return self.inputs.shape[0]

    @property
    def positions(self) -> np.ndarray:
        return self.states[:, 0:3]

    @classmethod
    def from_inputs(cls, x0, inputs, params: DynamicsParams, stamp: int = 0) -> "HorizonPlan":
        if isinstance(x0, AgentState):
            x0 = x0.as_array()
        U = np.array([u.as_array() if isinstance(u, ControlInput) else u for u in inputs], dtype=float)
        return cls(U, rollout_array(np.asarray(x0, dtype=float), U, params.Ts), stamp)

    def control_inputs(self) -> list[ControlInput]:
        return [ControlInput.from_array(u) for u in self.inputs]


def tracking_cost(state: AgentState, ref_pos, control: ControlInput, weights: CostWeights) -> float:
    err = state.position - np.asarray(ref_pos, dtype=float)
    u = control.as_array()
    return float(err @ weights.q_pos @ err + np.sum(weights.r_diag * u * u))


def safety_cost(pi, neighbor_positions, weights: CostWeights, d_min: float) -> float:
    """Relaxed inverse barrier. Below a denominator of ``BARRIER_FLOOR`` the
    barrier continues linearly, so it keeps growing (and repelling) instead of
    flipping sign."""
    pi = np.asarray(pi, dtype=float)
    total = 0.0
    for pj in neighbor_positions:
        diff = pi - np.asarray(pj, dtype=float)
        den = float(diff @ diff) - d_min**2 + weights.mu
        if den > BARRIER_FLOOR:
            total += weights.w_safe / den
        else:
            total += weights.w_safe / BARRIER_FLOOR + weights.w_safe / BARRIER_FLOOR**2 * (BARRIER_FLOOR - den)
    return total


def barrier_active(pi, neighbor_positions, weights: CostWeights, d_min: float) -> bool:
    """True if any pair has fallen below the barrier floor (diagnostic flag)."""
    pi = np.asarray(pi, dtype=float)
    return any(float(np.sum((pi - np.asarray(pj)) ** 2)) - d_min**2 + weights.mu <= BARRIER_FLOOR
               for pj in neighbor_positions)


def stage_cost(agent: AgentState, control: ControlInput, ref_pos, neighbor_states: Sequence[AgentState],
               weights: CostWeights, budget: LinkBudget, cfg: SmoothingConfig, params: DynamicsParams,
               safety_states: Optional[Sequence[AgentState]] = None) -> float:
    """Tracking + regularisation + safety - w_comm * surrogate capacity (Gbit/s).

    ``neighbor_states`` are the communication neighbours; the barrier is taken over
    ``safety_states`` when given, otherwise over the same neighbours.
    """
    if safety_states is None:
        safety_states = neighbor_states
    value = tracking_cost(agent, ref_pos, control, weights)
    if weights.w_safe:
        value += safety_cost(agent.position, [s.position for s in safety_states], weights, params.d_min)
    if weights.w_comm and len(neighbor_states):
        value -= weights.w_comm * surrogate_cost(agent, neighbor_states, budget, cfg) / COMM_UNIT
    return value


def kernel_consts(weights: CostWeights, budget: LinkBudget, params: DynamicsParams) -> np.ndarray:
    c = np.zeros(_kernels.N_CONSTS)
    c[_kernels.TS] = params.Ts
    c[_kernels.W_COMM] = weights.w_comm / COMM_UNIT
    c[_kernels.W_SAFE] = weights.w_safe
    c[_kernels.MU] = weights.mu
    c[_kernels.D_MIN] = params.d_min
    c[_kernels.WAVENUMBER] = 2.0 * math.pi / budget.wavelength_m
    c[_kernels.GAMMA] = budget.gamma_refl
    c[_kernels.SNR0] = budget.snr0
    c[_kernels.BANDWIDTH] = budget.bandwidth_hz
    c[_kernels.N_ULA] = budget.n_ula
    c[_kernels.KAPPA] = budget.kappa
    c[_kernels.SIGMA] = budget.sigma_rad
    c[_kernels.FOV] = budget.fov_rad
    return c


def _stack_positions(plans, horizon: int) -> np.ndarray:
    """(horizon, J, 3) neighbour positions from plans or raw (horizon, 3) arrays."""
    cols = []
    for plan in plans:
        pos = plan.positions if isinstance(plan, HorizonPlan) else np.asarray(plan, dtype=float)
        if pos.shape != (horizon, 3):
            raise ValueError(f"neighbour prediction has shape {pos.shape}, expected ({horizon}, 3)")
        cols.append(pos)
    if not cols:
        return np.zeros((horizon, 0, 3))
    return np.ascontiguousarray(np.stack(cols, axis=1))


@functools.lru_cache(maxsize=32)
def _quadratic_hessian(q_key: tuple, r_key: tuple, Ts: float, horizon: int) -> np.ndarray:
    Q = np.array(q_key).reshape(3, 3)
    k = np.arange(horizon)
    # position at stage k+1 moves by Ts^2 (k - j + 1/2) per unit acceleration at stage j <= k
    M = np.where(k[:, None] >= k[None, :], Ts**2 * (k[:, None] - k[None, :] + 0.5), 0.0)
    H = np.zeros((horizon, 4, horizon, 4))
    H[:, :3, :, :3] = 2.0 * np.einsum("kj,kl,ab->jalb", M, M, Q)
    H[k, :, k, :] += 2.0 * np.diag(r_key)
    H = H.reshape(4 * horizon, 4 * horizon)
    H.setflags(write=False)
    return H


def quadratic_hessian(weights: CostWeights, Ts: float, horizon: int) -> np.ndarray:
    """Exact Hessian of the tracking and input terms with respect to the stacked inputs."""
    return _quadratic_hessian(tuple(np.asarray(weights.q_pos, float).ravel()),
                              tuple(np.asarray(weights.r_diag, float)), float(Ts), int(horizon))


class HorizonProblem:
    """One agent's finite-horizon objective with frozen neighbour predictions.

    Decision variables are stage-major: ``[ax0, ay0, az0, w0, ax1, ...]``.
    """

    def __init__(self, x0, refs, comm_plans, weights: CostWeights, budget: LinkBudget,
                 cfg: SmoothingConfig, params: DynamicsParams, safety_plans=None):
        self.x0 = np.ascontiguousarray(x0.as_array() if isinstance(x0, AgentState) else x0, dtype=float)
        self.refs = np.ascontiguousarray(refs, dtype=float)
        if self.refs.ndim != 2 or self.refs.shape[1] != 3:
            raise ValueError("refs must have shape (N, 3)")
        self.horizon = self.refs.shape[0]
        self.comm_nbr = _stack_positions(comm_plans, self.horizon)
        self.safe_nbr = _stack_positions(comm_plans if safety_plans is None else safety_plans, self.horizon)
        self.weights = weights
        self.params = params
        self.consts = kernel_consts(weights, budget, params)
        self.offsets = np.ascontiguousarray(stencil_offsets(cfg.epsilon))
        self.lower = -np.tile([params.a_max] * 3 + [params.omega_max], self.horizon)
        self.upper = -self.lower
        self.n_evals = 0

    @property
    def n_vars(self) -> int:
        return 4 * self.horizon

    def value_grad(self, u_flat: np.ndarray) -> tuple[float, np.ndarray]:
        U = np.ascontiguousarray(np.asarray(u_flat, dtype=float).reshape(self.horizon, 4))
        self.n_evals += 1
        f, g = _kernels.horizon_eval(self.x0, U, self.refs, self.comm_nbr, self.safe_nbr,
                                     self.weights.q_pos, self.weights.r_diag, self.consts, self.offsets)
        return float(f), np.asarray(g).reshape(-1)

    def value(self, u_flat: np.ndarray) -> float:
        return self.value_grad(u_flat)[0]

    def quadratic_hessian(self) -> np.ndarray:
        return quadratic_hessian(self.weights, self.params.Ts, self.horizon)


def horizon_cost_and_gradient(x0, inputs, refs, neighbor_plans, weights: CostWeights, budget: LinkBudget,
                              cfg: SmoothingConfig, params: DynamicsParams,
                              safety_plans=None) -> tuple[float, np.ndarray]:
    """Total horizon cost and its ``(N, 4)`` gradient with respect to the inputs."""
    U = np.array([u.as_array() if isinstance(u, ControlInput) else u for u in inputs], dtype=float)
    refs = np.asarray(refs, dtype=float)
    if U.ndim != 2 or U.shape[1] != 4 or U.shape[0] == 0:
        raise ValueError("inputs must be a non-empty sequence of 4-vectors")
    if refs.shape != (U.shape[0], 3):
        raise ValueError(f"refs shape {refs.shape} does not match horizon {U.shape[0]}")
    problem = HorizonProblem(x0, refs, neighbor_plans, weights, budget, cfg, params, safety_plans)
    f, g = problem.value_grad(U.reshape(-1))
    return f, g.reshape(U.shape)

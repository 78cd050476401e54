"""Decentralised block-coordinate coordination of the agents' horizon solves.

Each agent reads only its neighbours' published :class:`HorizonPlan` values.
In the default Gauss-Seidel mode agents solve one after another in index order
and later agents see the plans already updated in the same sweep.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .channel import LinkBudget
from .cost import CostWeights, HorizonPlan, HorizonProblem
from .dynamics import AgentState, ControlInput, DynamicsParams, clamp_input, rollout_array, step
from .solver import SolveDiagnostics, SolverConfig, shift_warm_start, solve_fhocp
from .surrogate import SmoothingConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SwarmTopology:
    n_agents: int
    neighbor_sets: tuple

    def __post_init__(self):
        sets = tuple(tuple(int(j) for j in s) for s in self.neighbor_sets)
        if len(sets) != self.n_agents:
            raise ValueError("topology needs one neighbour set per agent")
        for i, s in enumerate(sets):
            if i in s:
                raise ValueError(f"agent {i} lists itself as a neighbour")
            if any(not 0 <= j < self.n_agents for j in s):
                raise ValueError(f"agent {i} has an out-of-range neighbour")
        object.__setattr__(self, "neighbor_sets", sets)

    @classmethod
    def ring(cls, n_agents: int) -> "SwarmTopology":
        if n_agents == 1:
            return cls(1, ((),))
        return cls(n_agents, tuple(((i + 1) % n_agents,) for i in range(n_agents)))

    def links(self) -> list[tuple[int, int]]:
        return [(i, j) for i, s in enumerate(self.neighbor_sets) for j in s]

    def others(self, i: int) -> list[int]:
        return [j for j in range(self.n_agents) if j != i]


@dataclass(frozen=True)
class SwarmSettings:
    """Everything an agent needs to pose its local problem."""

    weights: CostWeights
    budget: LinkBudget
    smoothing: SmoothingConfig
    params: DynamicsParams
    solver: SolverConfig = SolverConfig()
    mode: str = "gauss-seidel"
    n_sweeps: int = 1
    safety_scope: str = "neighbors"

    def __post_init__(self):
        if self.mode not in ("gauss-seidel", "jacobi"):
            raise ValueError("swarm.mode must be 'gauss-seidel' or 'jacobi'")
        if self.safety_scope not in ("all", "neighbors"):
            raise ValueError("swarm.safety_scope must be 'all' or 'neighbors'")
        if self.n_sweeps < 1:
            raise ValueError("swarm.n_sweeps must be >= 1")


@dataclass(frozen=True)
class RoundReport:
    sweep_count: int
    global_cost_before: float
    global_cost_after: float
    max_plan_delta: float
    contraction_ratio_estimate: float
    deltas: tuple = ()
    diagnostics: tuple = ()


def _safety_ids(i: int, topology: SwarmTopology, settings: SwarmSettings):
    if settings.safety_scope == "all":
        return topology.others(i)
    return list(topology.neighbor_sets[i])


def local_problem(i: int, x0, refs, plans, topology: SwarmTopology, settings: SwarmSettings) -> HorizonProblem:
    return HorizonProblem(x0, refs, [plans[j] for j in topology.neighbor_sets[i]], settings.weights,
                          settings.budget, settings.smoothing, settings.params,
                          [plans[j] for j in _safety_ids(i, topology, settings)])


def global_cost(agent_states, plans, refs, topology: SwarmTopology, settings: SwarmSettings) -> float:
    total = 0.0
    for i, x in enumerate(agent_states):
        prob = local_problem(i, x, refs[i], plans, topology, settings)
        total += prob.value(plans[i].inputs.reshape(-1))
    return total


def _solve_agent(i, agent_states, plans, refs, topology, settings, stamp):
    return solve_fhocp(
        agent_states[i], refs[i], [plans[j] for j in topology.neighbor_sets[i]], settings.weights,
        settings.budget, settings.smoothing, settings.params, warm_start=plans[i], scfg=settings.solver,
        safety_plans=[plans[j] for j in _safety_ids(i, topology, settings)], stamp=stamp)


def bcd_sweep(agent_states: Sequence, plans: Sequence[HorizonPlan], refs: Sequence[np.ndarray],
              topology: SwarmTopology, settings: SwarmSettings, stamp: int = 0,
              previous_delta: Optional[float] = None) -> tuple[list[HorizonPlan], RoundReport]:
    """One block-coordinate sweep over all agents."""
    if len(plans) != topology.n_agents or len(agent_states) != topology.n_agents:
        raise ValueError("bcd_sweep needs one state and one plan per agent")
    before = global_cost(agent_states, plans, refs, topology, settings)
    new_plans = list(plans)
    snapshot = list(plans)
    diags: list[SolveDiagnostics] = []
    for i in range(topology.n_agents):
        source = new_plans if settings.mode == "gauss-seidel" else snapshot
        try:
            plan, diag = _solve_agent(i, agent_states, source, refs, topology, settings, stamp)
        except (FloatingPointError, ValueError) as exc:
            logger.error("agent %d solve failed: %s", i, exc)
            report = RoundReport(1, before, math.nan, math.nan, math.nan, (), tuple(diags))
            raise SweepAborted(new_plans, report) from exc
        new_plans[i] = plan
        diags.append(diag)
    delta = max(float(np.max(np.abs(new.positions - old.positions))) for new, old in zip(new_plans, plans))
    after = global_cost(agent_states, new_plans, refs, topology, settings)
    ratio = delta / previous_delta if previous_delta else math.nan
    return new_plans, RoundReport(1, before, after, delta, ratio, (delta,), tuple(diags))


class SweepAborted(RuntimeError):
    def __init__(self, plans, report):
        super().__init__("BCD sweep aborted after a solver error")
        self.plans = plans
        self.report = report


def cold_start_plan(x0, horizon: int, params: DynamicsParams, stamp: int = 0) -> HorizonPlan:
    """Zero inputs; states from a pure drift rollout."""
    x0 = x0.as_array() if isinstance(x0, AgentState) else np.asarray(x0, dtype=float)
    U = np.zeros((horizon, 4))
    return HorizonPlan(U, rollout_array(x0, U, params.Ts), stamp)


def reference_window(ref_fn: Callable[[float], np.ndarray], t: float, horizon: int, Ts: float) -> np.ndarray:
    """Reference positions for predicted stages ``t+Ts .. t+horizon*Ts``."""
    return np.array([ref_fn(t + (k + 1) * Ts) for k in range(horizon)])


@dataclass
class SimState:
    agents: list
    plans: list
    k: int = 0
    time: float = 0.0
    last_delta: Optional[float] = None
    history: list = field(default_factory=list)


def receding_horizon_step(sim: SimState, ref_fns: Sequence[Callable], topology: SwarmTopology,
                          settings: SwarmSettings, horizon: int):
    """Run the configured sweeps, apply every agent's first input, shift warm starts.

    Returns ``(next_sim_state, applied_inputs, reports)``.
    """
    Ts = settings.params.Ts
    refs = [reference_window(fn, sim.time, horizon, Ts) for fn in ref_fns]
    plans = sim.plans
    reports = []
    delta = sim.last_delta
    for _ in range(settings.n_sweeps):
        plans, report = bcd_sweep(sim.agents, plans, refs, topology, settings, stamp=sim.k,
                                  previous_delta=delta)
        delta = report.max_plan_delta
        reports.append(report)
    applied = [clamp_input(ControlInput.from_array(p.inputs[0]), settings.params) for p in plans]
    agents = [step(x, u, settings.params) for x, u in zip(sim.agents, applied)]
    shifted = [shift_warm_start(p, settings.params) for p in plans]
    nxt = SimState(agents, shifted, sim.k + 1, sim.time + Ts, delta)
    return nxt, applied, reports


def check_contraction(weights: CostWeights, L_hat: float) -> tuple[float, bool]:
    """Diagonal-dominance ratio ``w_comm * L_hat / lambda_min(Q_pos)``.

    ``L_hat`` must be in the cost's units (Gbit/s per m^2); divide the output of
    :func:`jointmpc.surrogate.estimate_lipschitz` (bit/s per m^2) by
    :data:`jointmpc.cost.COMM_UNIT` first.
    """
    lam_min = float(np.linalg.eigvalsh(weights.q_pos).min())
    ratio = weights.w_comm * L_hat / lam_min
    return ratio, ratio < 1.0

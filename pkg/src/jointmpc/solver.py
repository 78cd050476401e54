"""Bound-constrained SQP for one agent's horizon problem.

The dynamics are eliminated by substituting the rollout, so the only explicit
constraints left are the per-input boxes. Each iteration builds a quadratic
model from a BFGS Hessian approximation, minimises it over the variables that
are not pinned at an active bound, and takes an Armijo-backtracked step along
the projection arc.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .channel import LinkBudget
from .cost import CostWeights, HorizonPlan, HorizonProblem
from .dynamics import DynamicsParams, rollout_array
from .surrogate import SmoothingConfig


@dataclass(frozen=True)
class SolverConfig:
    max_iters: int = 300
    grad_tol: float = 1e-4
    step_tol: float = 1e-8
    ftol: float = 1e-7
    armijo_c: float = 1e-4
    backtrack_ratio: float = 0.5
    max_backtracks: int = 25

    def __post_init__(self):
        if self.max_iters < 1 or self.max_backtracks < 1:
            raise ValueError("solver.max_iters and solver.max_backtracks must be >= 1")
        if not (0 < self.armijo_c <= 0.5):
            raise ValueError("solver.armijo_c must lie in (0, 0.5]")
        if not (0 < self.backtrack_ratio < 1):
            raise ValueError("solver.backtrack_ratio must lie in (0, 1)")
        if not (self.grad_tol > 0 and self.step_tol > 0 and self.ftol >= 0):
            raise ValueError("solver tolerances must be > 0")


@dataclass(frozen=True)
class SolveDiagnostics:
    iterations: int
    converged: bool
    final_grad_norm: float
    objective: float
    wall_time: float
    initial_objective: float = math.nan
    n_evals: int = 0
    status: str = ""


def _projected_gradient(x, g, lower, upper):
    return x - np.clip(x - g, lower, upper)


def _kkt_residual(x, g, lower, upper, bound_tol):
    """Gradient with the components held by an active bound zeroed.

    Unlike the projected gradient it is not capped by the box width, so a
    relative tolerance stays meaningful when the objective is large.
    """
    r = g.copy()
    r[(x <= lower + bound_tol) & (g > 0)] = 0.0
    r[(x >= upper - bound_tol) & (g < 0)] = 0.0
    return float(np.max(np.abs(r))) if r.size else 0.0


def _search_direction(x, g, B, lower, upper, bound_tol):
    """Quasi-Newton step on the variables not held by an active bound."""
    n = x.size
    at_lower = (x <= lower + bound_tol) & (g > 0)
    at_upper = (x >= upper - bound_tol) & (g < 0)
    free = ~(at_lower | at_upper)
    d = np.zeros(n)
    if np.any(free):
        try:
            L = np.linalg.cholesky(B[np.ix_(free, free)])
            d[free] = -np.linalg.solve(L.T, np.linalg.solve(L, g[free]))
        except np.linalg.LinAlgError:
            d[free] = -g[free]
    if not float(g @ d) < 0:
        d = -_projected_gradient(x, g, lower, upper)
    return d


def minimize_box(fun, x0: np.ndarray, lower: np.ndarray, upper: np.ndarray,
                 scfg: SolverConfig = SolverConfig(), B0: Optional[np.ndarray] = None):
    """Minimise ``fun`` (returning value and gradient) over the box ``[lower, upper]``.

    ``B0`` seeds the BFGS matrix; without it the identity is rescaled after the
    first accepted step. Stops on a small projected gradient, a small step, or
    a relative decrease below ``ftol`` (the SLSQP-style test).

    Returns ``(x, f, iterations, converged, pg_norm, status, f_initial)``. The
    returned point is never worse than the (clipped) starting point.
    """
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    f, g = fun(x)
    if not math.isfinite(f) or not np.all(np.isfinite(g)):
        raise FloatingPointError("non-finite objective at the starting point")
    f_init = f
    n = x.size
    B_init = np.eye(n) if B0 is None else np.array(B0, dtype=float)
    B = B_init.copy()
    scaled = B0 is not None
    span = upper - lower
    bound_tol = 1e-12 * np.maximum(1.0, span)
    status = "max_iters"
    converged = False
    it = 0
    pg_norm = _kkt_residual(x, g, lower, upper, bound_tol)
    for it in range(1, scfg.max_iters + 1):
        if pg_norm <= scfg.grad_tol * max(1.0, abs(f)):
            converged, status, it = True, "grad_tol", it - 1
            break
        accepted = False
        for attempt in range(2):
            d = _search_direction(x, g, B, lower, upper, bound_tol)
            alpha = 1.0
            for _ in range(scfg.max_backtracks):
                x_new = np.clip(x + alpha * d, lower, upper)
                step = x_new - x
                decrease = float(g @ step)
                f_new, g_new = fun(x_new)
                if math.isfinite(f_new) and decrease < 0 and f_new <= f + scfg.armijo_c * decrease:
                    accepted = True
                    break
                alpha *= scfg.backtrack_ratio
            if accepted or attempt:
                break
            # stale curvature: restart from the initial metric once
            B = B_init.copy()
        if not accepted:
            status = "line_search_failed"
            break

        s = step
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            if not scaled:
                B = (float(y @ y) / sy) * np.eye(n)
                scaled = True
            Bs = B @ s
            B += np.outer(y, y) / sy - np.outer(Bs, Bs) / float(s @ Bs)
        f_prev = f
        x, f, g = x_new, f_new, g_new
        pg_norm = _kkt_residual(x, g, lower, upper, bound_tol)
        if float(np.linalg.norm(s)) <= scfg.step_tol:
            converged, status = True, "step_tol"
            break
        if f_prev - f <= scfg.ftol * max(1.0, abs(f)):
            converged, status = True, "ftol"
            break
    else:
        if pg_norm <= scfg.grad_tol * max(1.0, abs(f)):
            converged, status = True, "grad_tol"
    return x, f, it, converged, pg_norm, status, f_init


def solve_fhocp(x0, refs, neighbor_plans, weights: CostWeights, budget: LinkBudget, cfg: SmoothingConfig,
                params: DynamicsParams, warm_start: Optional[HorizonPlan] = None,
                scfg: SolverConfig = SolverConfig(), safety_plans=None, stamp: int = 0,
                ) -> tuple[HorizonPlan, SolveDiagnostics]:
    """Solve one agent's finite-horizon problem against frozen neighbour predictions."""
    t0 = time.perf_counter()
    problem = HorizonProblem(x0, refs, neighbor_plans, weights, budget, cfg, params, safety_plans)
    N = problem.horizon
    if warm_start is None:
        u0 = np.zeros(4 * N)
    else:
        if warm_start.horizon != N:
            raise ValueError(f"warm start has horizon {warm_start.horizon}, expected {N}")
        u0 = warm_start.inputs.reshape(-1)
    u, f, iters, converged, pg, status, f_init = minimize_box(
        problem.value_grad, u0, problem.lower, problem.upper, scfg, problem.quadratic_hessian())
    U = u.reshape(N, 4)
    plan = HorizonPlan(U, rollout_array(problem.x0, U, params.Ts), stamp)
    diag = SolveDiagnostics(iters, converged, pg, f, time.perf_counter() - t0, f_init,
                            problem.n_evals, status)
    return plan, diag


def shift_warm_start(plan: HorizonPlan, params: Optional[DynamicsParams] = None) -> HorizonPlan:
    """Drop the first input and repeat the last one.

    Predicted states are shifted the same way (the tail is extended by one step
    with the repeated input) so neighbours can keep reading them until the
    owner re-solves from its new state.
    """
    U = np.vstack([plan.inputs[1:], plan.inputs[-1:]])
    states = plan.states
    if params is not None:
        tail = rollout_array(states[-1], plan.inputs[-1:], params.Ts)
        states = np.vstack([states[1:], tail])
    else:
        states = np.vstack([states[1:], states[-1:]])
    return HorizonPlan(U, states, plan.stamp + 1)

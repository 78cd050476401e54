"""Closed-loop episodes, Table-style metrics, Monte Carlo batches and theory checks."""

from __future__ import annotations

import csv
import io
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .baselines import (BaselineKind, evaluate_directional, evaluate_ele, evaluate_ideal, evaluate_omni,
                        kinematic_weights, pid_step)
from .config import ScenarioConfig, config_hash
from .cost import COMM_UNIT
from .dynamics import ControlInput, clamp_input, step
from .scenario import antipodal_scenario
from .solver import shift_warm_start
from .surrogate import SampleRegion, SmoothingConfig, estimate_lipschitz, stencil_offsets
from .swarm import SwarmSettings, SweepAborted, bcd_sweep, check_contraction, cold_start_plan, reference_window

logger = logging.getLogger(__name__)

CSV_SCHEMA_VERSION = 1
CONTROLLERS = ("joint", "ideal", "ele", "std", "pid")
_KINEMATIC = ("ideal", "ele", "std")
_LABELS = {"joint": "Joint-MPC", "ideal": "Ideal-MPC", "ele": "Ele-MPC", "std": "Std-MPC", "pid": "PID"}


def realization_seed(base_seed: int, index: int) -> int:
    """Seed of realization ``index``: child ``index`` of ``SeedSequence(base_seed)``.

    Children are addressed by spawn key, so growing the batch leaves earlier seeds alone.
    """
    child = np.random.SeedSequence(int(base_seed), spawn_key=(int(index),))
    return int(child.generate_state(1, dtype=np.uint32)[0])


@dataclass
class Trajectory:
    """Raw closed-loop output before any antenna evaluation."""

    states: np.ndarray          # (T, N, 7) state at the start of each step
    inputs: np.ndarray          # (T, N, 4) applied inputs
    converged: np.ndarray       # (T, S) one column per solve call in the step
    iterations: np.ndarray      # (T, S)
    solve_ms: np.ndarray        # (T, S)
    plan_delta: np.ndarray      # (T,) last BCD plan change, 0 for reactive control
    aborted_steps: int = 0


@dataclass
class EpisodeRecord:
    controller: str
    seed: int
    config_hash: str
    Ts: float
    links: tuple
    states: np.ndarray
    inputs: np.ndarray
    capacity: np.ndarray                 # (T, L) bit/s
    misalignment: Optional[np.ndarray]   # (T, L) rad, None for omni antennas
    min_distance: np.ndarray             # (T,)
    solver_converged: np.ndarray
    solver_iterations: np.ndarray
    solver_ms: np.ndarray
    plan_delta: np.ndarray
    aborted_steps: int = 0

    @property
    def n_steps(self) -> int:
        return self.states.shape[0]

    @property
    def step_solver_ms(self) -> np.ndarray:
        """Solver wall time per control step, summed over agents and sweeps."""
        return self.solver_ms.sum(axis=1)


@dataclass(frozen=True)
class AggregateMetrics:
    n_records: int
    min_dist_avg: float
    min_dist_var: float
    min_dist_min: float
    avg_capacity: float
    outage_prob: float
    avg_misalign: float
    avg_effort: float
    avg_solver_ms: float
    solver_success_rate: float

    def __post_init__(self):
        if not 0.0 <= self.outage_prob <= 1.0:
            raise ValueError("outage_prob outside [0, 1]")


def _settings(cfg: ScenarioConfig, kind: str, smoothing: Optional[SmoothingConfig] = None) -> SwarmSettings:
    weights = kinematic_weights(cfg.weights) if kind in _KINEMATIC else cfg.weights
    return cfg.swarm_settings(weights=weights, smoothing=smoothing)


def _scenario(cfg: ScenarioConfig, seed: int):
    topo = cfg.make_topology()
    paths, initial = antipodal_scenario(cfg.n_agents, cfg.geometry, cfg.duration, seed=seed,
                                        neighbor_sets=topo.neighbor_sets)
    return topo, paths, initial


def simulate_mpc(cfg: ScenarioConfig, seed: int, kinematic: bool = False,
                 smoothing: Optional[SmoothingConfig] = None) -> Trajectory:
    """Receding-horizon BCD loop. A failed sweep keeps the best-so-far plans and carries on."""
    topo, paths, agents = _scenario(cfg, seed)
    settings = _settings(cfg, "std" if kinematic else "joint", smoothing)
    params, Ts, H = cfg.dynamics, cfg.dynamics.Ts, cfg.horizon
    T, N, S = cfg.n_steps, cfg.n_agents, cfg.n_sweeps * cfg.n_agents
    states = np.empty((T, N, 7))
    inputs = np.empty((T, N, 4))
    conv = np.zeros((T, S), dtype=bool)
    iters = np.zeros((T, S), dtype=int)
    ms = np.zeros((T, S))
    delta_hist = np.zeros(T)
    plans = [cold_start_plan(a, H, params) for a in agents]
    delta, aborted = None, 0
    for k in range(T):
        t = k * Ts
        states[k] = [a.as_array() for a in agents]
        refs = [reference_window(p, t, H, Ts) for p in paths]
        diags = []
        for _ in range(cfg.n_sweeps):
            try:
                plans, report = bcd_sweep(agents, plans, refs, topo, settings, stamp=k, previous_delta=delta)
                delta = report.max_plan_delta
            except SweepAborted as exc:
                aborted += 1
                plans, report = list(exc.plans), exc.report
            diags.extend(report.diagnostics)
        for c, d in enumerate(diags):
            conv[k, c] = d.converged
            iters[k, c] = d.iterations
            ms[k, c] = 1e3 * d.wall_time
        delta_hist[k] = delta if delta is not None and math.isfinite(delta) else 0.0
        applied = [clamp_input(ControlInput.from_array(p.inputs[0]), params) for p in plans]
        inputs[k] = [u.as_array() for u in applied]
        agents = [step(a, u, params) for a, u in zip(agents, applied)]
        plans = [shift_warm_start(p, params) for p in plans]
    return Trajectory(states, inputs, conv, iters, ms, delta_hist, aborted)


def simulate_pid(cfg: ScenarioConfig, seed: int) -> Trajectory:
    _, paths, agents = _scenario(cfg, seed)
    params, Ts = cfg.dynamics, cfg.dynamics.Ts
    T, N = cfg.n_steps, cfg.n_agents
    states = np.empty((T, N, 7))
    inputs = np.empty((T, N, 4))
    for k in range(T):
        states[k] = [a.as_array() for a in agents]
        refs = [p(k * Ts) for p in paths]
        applied = pid_step(agents, refs, cfg.pid, params)
        inputs[k] = [u.as_array() for u in applied]
        agents = [step(a, u, params) for a, u in zip(agents, applied)]
    empty = np.zeros((T, 0))
    return Trajectory(states, inputs, empty.astype(bool), empty.astype(int), empty, np.zeros(T))


def _min_distance_series(states: np.ndarray) -> np.ndarray:
    if states.shape[1] < 2:
        return np.full(states.shape[0], math.inf)
    P = states[:, :, 0:3]
    d = np.linalg.norm(P[:, :, None, :] - P[:, None, :, :], axis=-1)
    iu = np.triu_indices(P.shape[1], 1)
    return d[:, iu[0], iu[1]].min(axis=1)


def evaluate_trajectory(traj: Trajectory, cfg: ScenarioConfig, kind: str, seed: int) -> EpisodeRecord:
    """Attach the antenna model of ``kind`` to a simulated trajectory."""
    topo, budget = cfg.make_topology(), cfg.link
    X = traj.states
    mis = None
    if kind == "joint":
        cap, mis = evaluate_directional(X, topo, budget, X[:, :, 6])
    elif kind == "ideal":
        cap = evaluate_ideal(X, topo, budget)
        mis = np.zeros_like(cap)
    elif kind == "ele":
        cap, mis = evaluate_ele(X, topo, budget)
    elif kind in ("std", "pid"):
        cap = evaluate_omni(X, topo, budget)
    else:
        raise ValueError(f"unknown controller kind {kind!r}")
    return EpisodeRecord(kind, int(seed), config_hash(cfg), cfg.dynamics.Ts, tuple(topo.links()), X, traj.inputs,
                         cap, mis, _min_distance_series(X), traj.converged, traj.iterations, traj.solve_ms,
                         traj.plan_delta, traj.aborted_steps)


def _normalize_kind(kind) -> str:
    if isinstance(kind, BaselineKind):
        kind = kind.value
    kind = str(kind).lower()
    if kind not in CONTROLLERS:
        raise ValueError(f"controller must be one of {CONTROLLERS}, got {kind!r}")
    return kind


def simulate(cfg: ScenarioConfig, kind: str, seed: int, smoothing: Optional[SmoothingConfig] = None) -> Trajectory:
    kind = _normalize_kind(kind)
    if kind == "pid":
        return simulate_pid(cfg, seed)
    return simulate_mpc(cfg, seed, kinematic=kind in _KINEMATIC, smoothing=smoothing)


def run_episode(cfg: ScenarioConfig, controller_kind, seed: int) -> EpisodeRecord:
    kind = _normalize_kind(controller_kind)
    return evaluate_trajectory(simulate(cfg, kind, seed), cfg, kind, seed)


def compute_metrics(records: Sequence[EpisodeRecord], outage_threshold: float = 1e9) -> AggregateMetrics:
    """Aggregate a set of episodes of one controller.

    Min distance is reduced per episode first (the global minimum over time),
    then averaged; its variance is the population variance over episodes.
    """
    records = list(records)
    if not records:
        raise ValueError("compute_metrics needs at least one record")
    per_ep = np.array([float(np.min(r.min_distance)) for r in records])
    caps = np.concatenate([r.capacity.ravel() for r in records])
    mis = [r.misalignment.ravel() for r in records if r.misalignment is not None]
    effort = np.concatenate([np.sum(r.inputs**2, axis=-1).ravel() for r in records])
    step_ms = np.concatenate([r.step_solver_ms for r in records if r.solver_ms.shape[1] > 0] or [np.zeros(0)])
    conv = np.concatenate([r.solver_converged.ravel() for r in records])
    return AggregateMetrics(
        n_records=len(records),
        min_dist_avg=float(per_ep.mean()),
        min_dist_var=float(per_ep.var()),
        min_dist_min=float(per_ep.min()),
        avg_capacity=float(caps.mean()) if caps.size else math.nan,
        outage_prob=float(np.mean(caps < outage_threshold)) if caps.size else 0.0,
        avg_misalign=float(np.concatenate(mis).mean()) if mis else math.nan,
        avg_effort=float(effort.mean()),
        avg_solver_ms=float(step_ms.mean()) if step_ms.size else math.nan,
        solver_success_rate=float(conv.mean()) if conv.size else math.nan,
    )


# ---------------------------------------------------------------- batches

def _realization(args):
    cfg, kinds, index, seed = args
    out = {}
    kin = None
    for kind in kinds:
        if kind in _KINEMATIC:
            # Ideal/Ele/Std share one kinematic trajectory per realization.
            if kin is None:
                kin = simulate_mpc(cfg, seed, kinematic=True)
            traj = kin
        else:
            traj = simulate(cfg, kind, seed)
        out[kind] = evaluate_trajectory(traj, cfg, kind, seed)
    return index, out


def _map(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, jobs))


@dataclass
class MonteCarloResult:
    kinds: tuple
    seeds: tuple
    records: dict                 # kind -> list[EpisodeRecord] in realization order
    metrics: dict                 # kind -> AggregateMetrics
    wall_time: float = 0.0
    per_kind_seconds: dict = field(default_factory=dict)


def monte_carlo(cfg: ScenarioConfig, kinds: Iterable = CONTROLLERS, n_real: Optional[int] = None,
                base_seed: Optional[int] = None, workers: int = 1) -> MonteCarloResult:
    """Paired Monte Carlo: every controller sees the same realization seeds."""
    kinds = tuple(dict.fromkeys(_normalize_kind(k) for k in kinds))
    n_real = cfg.realizations if n_real is None else int(n_real)
    if n_real < 1:
        raise ValueError("n_real must be >= 1")
    base = cfg.seed if base_seed is None else int(base_seed)
    seeds = tuple(realization_seed(base, r) for r in range(n_real))
    t0 = time.perf_counter()
    results = _map(_realization, [(cfg, kinds, r, s) for r, s in enumerate(seeds)], workers)
    wall = time.perf_counter() - t0
    results.sort(key=lambda item: item[0])
    records = {k: [res[k] for _, res in results] for k in kinds}
    metrics = {k: compute_metrics(records[k], cfg.outage_threshold_bps) for k in kinds}
    return MonteCarloResult(kinds, seeds, records, metrics, wall)


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    success_rate: float
    avg_capacity: float
    avg_misalign: float
    n_solves: int


def epsilon_sweep(cfg: ScenarioConfig, epsilons: Sequence[float], n_real: int = 3,
                  base_seed: Optional[int] = None, workers: int = 1) -> list[SweepRow]:
    """Joint-MPC solver success rate, capacity and misalignment per smoothing radius."""
    if any(not e > 0 for e in epsilons):
        raise ValueError("all smoothing radii must be > 0")
    rows = []
    for eps in epsilons:
        sub = cfg.with_(smoothing=SmoothingConfig(float(eps), cfg.smoothing.stencil_size))
        res = monte_carlo(sub, ("joint",), n_real, base_seed, workers)
        recs = res.records["joint"]
        m = res.metrics["joint"]
        n_solves = int(sum(r.solver_converged.size for r in recs))
        rows.append(SweepRow(float(eps), m.solver_success_rate, m.avg_capacity, m.avg_misalign, n_solves))
    return rows


# ---------------------------------------------------------------- theory checks

def ball_quadrature(n_r: int = 30, n_mu: int = 30, n_phi: int = 30) -> tuple[np.ndarray, np.ndarray]:
    """Midpoint rule over the unit ball in (r, cos theta, phi); weights sum to one."""
    r = (np.arange(n_r) + 0.5) / n_r
    mu = -1.0 + 2.0 * (np.arange(n_mu) + 0.5) / n_mu
    phi = 2.0 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    R, M, P = np.meshgrid(r, mu, phi, indexing="ij")
    s = np.sqrt(1.0 - M**2)
    pts = np.stack([R * s * np.cos(P), R * s * np.sin(P), R * M], axis=-1).reshape(-1, 3)
    w = (R**2).reshape(-1)
    return pts, w / w.sum()


def synthetic_snr_field(source=(2.0, 0.5, -0.3), scale: float = 400.0):
    """Smooth free-space SNR ``scale / |p - source|^2``; its Laplacian is nonzero everywhere."""
    src = np.asarray(source, dtype=float)

    def field_fn(p: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(p) - src
        return scale / np.sum(d * d, axis=-1)

    return field_fn


@dataclass(frozen=True)
class QuadratureRow:
    epsilon: float
    error: float
    error_half: float

    @property
    def ratio(self) -> float:
        """error(eps) / error(eps/2); about 4 for a second-order error."""
        return self.error / self.error_half

    @property
    def ratio_half_over_full(self) -> float:
        return self.error_half / self.error


def quadrature_order_check(epsilons: Sequence[float] = (0.02, 0.05, 0.1), bandwidth_hz: float = 2.16e9,
                           point=(0.0, 0.0, 0.0), field_fn=None, n_per_axis: int = 30) -> list[QuadratureRow]:
    """Stencil surrogate vs ball-averaged capacity, at eps and eps/2."""
    field_fn = field_fn or synthetic_snr_field()
    p = np.asarray(point, dtype=float)
    unit, w = ball_quadrature(n_per_axis, n_per_axis, n_per_axis)

    def err(eps):
        cont = float(w @ field_fn(p + eps * unit))
        surr = float(np.mean(field_fn(p + stencil_offsets(eps))))
        return abs(bandwidth_hz * (math.log2(1.0 + cont) - math.log2(1.0 + surr)))

    return [QuadratureRow(float(e), err(e), err(e / 2.0)) for e in epsilons]


@dataclass(frozen=True)
class TheoryReport:
    lipschitz_raw: float
    lipschitz: tuple               # ((eps, L_hat), ...) bit/s per m^2
    quadrature: tuple
    contraction_ratio: float
    contraction_stable: bool
    n_samples: int

    def rows(self) -> list[tuple[str, str, str]]:
        out = [("lipschitz", "raw", repr(self.lipschitz_raw))]
        out += [("lipschitz", repr(e), repr(v)) for e, v in self.lipschitz]
        for q in self.quadrature:
            out.append(("quadrature_error", repr(q.epsilon), repr(q.error)))
            out.append(("quadrature_error_half", repr(q.epsilon), repr(q.error_half)))
            out.append(("quadrature_ratio", repr(q.epsilon), repr(q.ratio)))
        out.append(("contraction_ratio", repr(self.lipschitz[0][0]) if self.lipschitz else "", repr(self.contraction_ratio)))
        out.append(("contraction_stable", "", str(self.contraction_stable).lower()))
        return out


def theory_report(cfg: ScenarioConfig, epsilons: Sequence[float] = (0.01, 0.05, 0.2), n_samples: int = 20000,
                  seed: Optional[int] = None, region: Optional[SampleRegion] = None) -> TheoryReport:
    """Empirical Lipschitz constants, quadrature order and the contraction ratio.

    The contraction ratio uses L_hat at the configured smoothing radius.
    """
    region = region or SampleRegion()
    seed = cfg.seed if seed is None else seed
    raw = estimate_lipschitz(cfg.link, None, region, n_samples, seed)
    lips = tuple((float(e), estimate_lipschitz(cfg.link, SmoothingConfig(float(e), cfg.smoothing.stencil_size),
                                               region, n_samples, seed)) for e in epsilons)
    L_cfg = estimate_lipschitz(cfg.link, cfg.smoothing, region, n_samples, seed)
    ratio, stable = check_contraction(cfg.weights, L_cfg / COMM_UNIT)
    if not stable:
        logger.warning("contraction condition fails: w_comm*L/lambda_min = %.3g", ratio)
    quad = tuple(quadrature_order_check(bandwidth_hz=cfg.link.bandwidth_hz))
    return TheoryReport(raw, lips, quad, ratio, stable, n_samples)


# ---------------------------------------------------------------- files

def _f(x: float) -> str:
    return "" if x is None or (isinstance(x, float) and math.isnan(x)) else repr(float(x))


def link_rows(records: dict, seeds: Sequence[int]):
    yield ("schema_version", "realization", "seed", "controller", "step", "time_s", "src", "dst",
           "capacity_bps", "misalignment_rad")
    for kind, recs in records.items():
        for r, rec in enumerate(recs):
            for k in range(rec.n_steps):
                t = _f(k * rec.Ts)
                for l, (i, j) in enumerate(rec.links):
                    mis = "" if rec.misalignment is None else _f(rec.misalignment[k, l])
                    yield (CSV_SCHEMA_VERSION, r, seeds[r], kind, k, t, i, j, _f(rec.capacity[k, l]), mis)


def kinematic_rows(records: dict, seeds: Sequence[int]):
    n = next(iter(records.values()))[0].states.shape[1]
    cols = []
    for i in range(n):
        cols += [f"a{i}_{c}" for c in ("px", "py", "pz", "vx", "vy", "vz", "yaw", "ax", "ay", "az", "yaw_rate")]
    yield ("schema_version", "realization", "seed", "controller", "step", "time_s", "min_distance_m",
           "solver_converged", "solver_calls", *cols)
    for kind, recs in records.items():
        for r, rec in enumerate(recs):
            for k in range(rec.n_steps):
                vals = np.concatenate([rec.states[k], rec.inputs[k]], axis=1).ravel()
                yield (CSV_SCHEMA_VERSION, r, seeds[r], kind, k, _f(k * rec.Ts), _f(rec.min_distance[k]),
                       int(rec.solver_converged[k].sum()), rec.solver_converged.shape[1], *(_f(v) for v in vals))


_AGG_COLS = ("controller", "n_realizations", "min_dist_avg_m", "min_dist_var_m2", "min_dist_min_m",
             "avg_capacity_gbps", "outage_prob", "avg_misalign_deg", "avg_effort", "solver_success_rate")


def aggregate_rows(metrics: dict):
    """Deterministic aggregate table. Wall-clock timing lives in the manifest and text table only."""
    yield _AGG_COLS
    for kind, m in metrics.items():
        yield (kind, m.n_records, _f(m.min_dist_avg), _f(m.min_dist_var), _f(m.min_dist_min),
               _f(m.avg_capacity / 1e9), _f(m.outage_prob), _f(math.degrees(m.avg_misalign)), _f(m.avg_effort),
               _f(m.solver_success_rate))


def aggregate_text(metrics: dict) -> str:
    head = ("Method", "Min Dist Avg", "Var", "Min", "Avg Cap (Gbps)", "Outage", "Misalign (deg)",
            "Effort", "Solver ms/step", "Success")
    body = []
    for kind, m in metrics.items():
        def g(x, fmt):
            return "-" if x is None or math.isnan(x) else format(x, fmt)
        body.append((_LABELS.get(kind, kind), g(m.min_dist_avg, ".2f"), g(m.min_dist_var, ".3f"),
                     g(m.min_dist_min, ".2f"), g(m.avg_capacity / 1e9, ".2f"), g(m.outage_prob, ".3f"),
                     g(math.degrees(m.avg_misalign), ".2f"), g(m.avg_effort, ".3f"), g(m.avg_solver_ms, ".1f"),
                     g(m.solver_success_rate, ".3f")))
    widths = [max(len(str(row[c])) for row in [head, *body]) for c in range(len(head))]
    lines = ["  ".join(str(v).rjust(w) if c else str(v).ljust(w) for c, (v, w) in enumerate(zip(row, widths)))
             for row in [head, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def write_csv(path: str, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return path


def write_monte_carlo(result: MonteCarloResult, out_dir: str) -> dict:
    os.makedirs(out_dir, exist_ok=True)
    paths = {
        "links": write_csv(os.path.join(out_dir, "links.csv"), link_rows(result.records, result.seeds)),
        "kinematics": write_csv(os.path.join(out_dir, "kinematics.csv"),
                                kinematic_rows(result.records, result.seeds)),
        "aggregate_csv": write_csv(os.path.join(out_dir, "aggregate.csv"), aggregate_rows(result.metrics)),
    }
    txt = os.path.join(out_dir, "aggregate.txt")
    with open(txt, "w", encoding="utf-8") as fh:
        fh.write(aggregate_text(result.metrics))
    paths["aggregate_txt"] = txt
    return paths

"""Command-line entry point: ``jointmpc {run,montecarlo,sweep-epsilon,theory,plot}``."""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import platform
import sys
import time
from typing import Optional, Sequence

import numpy as np

from . import __version__, _kernels
from .config import ConfigError, ScenarioConfig, config_hash, dump_config, load_config
from .harness import (CONTROLLERS, EpisodeRecord, MonteCarloResult, aggregate_text, epsilon_sweep,
                      monte_carlo, theory_report, write_csv, write_monte_carlo)

logger = logging.getLogger("jointmpc")

DEFAULT_EPSILONS_CM = (1.0, 3.0, 5.0, 8.0, 15.0, 20.0)


def _sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _write_manifest(out_dir: str, command: str, cfg: ScenarioConfig, args: argparse.Namespace,
                    files: dict, wall: dict) -> str:
    manifest = {
        "command": command,
        "argv": sys.argv[1:],
        "config_hash": config_hash(cfg),
        "config_path": args.config,
        "seed": args.seed,
        "versions": {"jointmpc": __version__, "python": platform.python_version(), "numpy": np.__version__,
                     "kernel_backend": _kernels.BACKEND},
        "wall_time_s": wall,
        "files": {k: {"path": os.path.basename(p), "sha256": _sha256(p)} for k, p in sorted(files.items())},
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "config.ini"), "w", encoding="utf-8") as fh:
        fh.write(dump_config(cfg))
    return path


def _solver_wall(result: MonteCarloResult) -> dict:
    out = {"total": result.wall_time}
    for kind, m in result.metrics.items():
        if m.avg_solver_ms == m.avg_solver_ms:
            out[f"{kind}_avg_solver_ms_per_step"] = m.avg_solver_ms
            steps = np.concatenate([r.step_solver_ms for r in result.records[kind]])
            out[f"{kind}_median_solver_ms_per_step"] = float(np.median(steps))
    return out


def _maybe_plots(result: MonteCarloResult, cfg: ScenarioConfig, out_dir: str, enabled: bool) -> dict:
    if not enabled:
        return {}
    from .plots import emit_plots
    first = [recs[0] for recs in result.records.values()]
    return emit_plots(first, out_dir, cfg.dynamics.d_min)


def cmd_montecarlo(args, cfg: ScenarioConfig, kinds: Sequence[str], n_real: int, command: str) -> int:
    base = cfg.seed if args.seed is None else args.seed
    result = monte_carlo(cfg, kinds, n_real, base, workers=args.workers)
    files = write_monte_carlo(result, args.out)
    t0 = time.perf_counter()
    files.update(_maybe_plots(result, cfg, args.out, not args.no_plots))
    wall = _solver_wall(result)
    wall["plots"] = time.perf_counter() - t0
    _write_manifest(args.out, command, cfg, args, files, wall)
    sys.stdout.write(aggregate_text(result.metrics))
    return 0


def cmd_run(args, cfg: ScenarioConfig) -> int:
    return cmd_montecarlo(args, cfg, [args.controller or "joint"], 1, "run")


def cmd_sweep(args, cfg: ScenarioConfig) -> int:
    eps = [e / 100.0 for e in (args.epsilons_cm or DEFAULT_EPSILONS_CM)]
    n_real = args.realizations or 3
    t0 = time.perf_counter()
    rows = epsilon_sweep(cfg, eps, n_real, args.seed, workers=args.workers)
    wall = time.perf_counter() - t0
    os.makedirs(args.out, exist_ok=True)
    table = [("epsilon_m", "success_rate", "avg_capacity_gbps", "avg_misalign_deg", "n_solves")]
    table += [(repr(r.epsilon), repr(r.success_rate), repr(r.avg_capacity / 1e9),
               repr(float(np.degrees(r.avg_misalign))), r.n_solves) for r in rows]
    path = write_csv(os.path.join(args.out, "sweep_epsilon.csv"), table)
    lines = [f"{'eps (cm)':>9}  {'success':>8}  {'cap (Gbps)':>10}  {'misalign (deg)':>14}"]
    lines += [f"{100 * r.epsilon:9.1f}  {100 * r.success_rate:7.2f}%  {r.avg_capacity / 1e9:10.2f}  "
              f"{np.degrees(r.avg_misalign):14.2f}" for r in rows]
    text = "\n".join(lines) + "\n"
    txt = os.path.join(args.out, "sweep_epsilon.txt")
    with open(txt, "w", encoding="utf-8") as fh:
        fh.write(text)
    _write_manifest(args.out, "sweep-epsilon", cfg, args, {"sweep_csv": path, "sweep_txt": txt}, {"total": wall})
    sys.stdout.write(text)
    return 0


def cmd_theory(args, cfg: ScenarioConfig) -> int:
    t0 = time.perf_counter()
    rep = theory_report(cfg, n_samples=args.samples, seed=args.seed)
    wall = time.perf_counter() - t0
    os.makedirs(args.out, exist_ok=True)
    path = write_csv(os.path.join(args.out, "theory.csv"), [("check", "epsilon_m", "value"), *rep.rows()])
    lines = [f"gradient Lipschitz estimate, {rep.n_samples} pairs (Gbit/s per m^2)",
             f"  raw field            {rep.lipschitz_raw / 1e9:.4g}"]
    lines += [f"  eps = {e:<6g} m       {v / 1e9:.4g}" for e, v in rep.lipschitz]
    lines.append("stencil vs ball-average error (bit/s)")
    lines += [f"  eps = {q.epsilon:<6g} m  err {q.error:.4g}  err(eps/2) {q.error_half:.4g}  ratio {q.ratio:.3f}"
              for q in rep.quadrature]
    lines.append(f"contraction ratio w_comm*L/lambda_min(Q) = {rep.contraction_ratio:.4g} "
                 f"({'contractive' if rep.contraction_stable else 'not contractive'})")
    text = "\n".join(lines) + "\n"
    txt = os.path.join(args.out, "theory.txt")
    with open(txt, "w", encoding="utf-8") as fh:
        fh.write(text)
    _write_manifest(args.out, "theory", cfg, args, {"theory_csv": path, "theory_txt": txt}, {"total": wall})
    sys.stdout.write(text)
    return 0


def read_records(directory: str, Ts: float, realization: int = 0) -> list[EpisodeRecord]:
    """Rebuild plotting records for one realization from ``kinematics.csv`` and ``links.csv``."""
    rows: dict = {}
    with open(os.path.join(directory, "kinematics.csv"), newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        cols = [c for c in reader.fieldnames if c[0] == "a" and c[1:].split("_")[0].isdigit()]
        for row in reader:
            if int(row["realization"]) == realization:
                rows.setdefault(row["controller"], []).append(row)
    if not rows:
        raise ValueError(f"no rows for realization {realization} in {directory}")
    caps: dict = {}
    with open(os.path.join(directory, "links.csv"), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            if int(row["realization"]) == realization:
                key = (row["controller"], int(row["step"]))
                caps.setdefault(key, []).append((int(row["src"]), int(row["dst"]), float(row["capacity_bps"])))
    out = []
    for kind, kin in rows.items():
        vals = np.array([[float(r[c]) for c in cols] for r in kin]).reshape(len(kin), -1, 11)
        steps = [caps[(kind, int(r["step"]))] for r in kin]
        links = tuple((i, j) for i, j, _ in steps[0])
        cap = np.array([[c for _, _, c in s] for s in steps])
        empty = np.zeros((len(kin), 0))
        out.append(EpisodeRecord(kind, int(kin[0]["seed"]), "", Ts, links, vals[:, :, :7], vals[:, :, 7:], cap,
                                 None, np.array([float(r["min_distance_m"]) for r in kin]), empty.astype(bool),
                                 empty.astype(int), empty, np.zeros(len(kin))))
    return out


def cmd_plot(args, cfg: ScenarioConfig) -> int:
    from .plots import emit_plots
    source = args.input or args.out
    records = read_records(source, cfg.dynamics.Ts, args.realization)
    files = emit_plots(records, args.out, cfg.dynamics.d_min)
    for p in files.values():
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file overlaid on the packaged defaults")
    common.add_argument("--seed", type=int, default=None, help="base seed (u64); realization r uses child r")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="jointmpc", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="one closed-loop episode")
    p.add_argument("--controller", choices=CONTROLLERS, default="joint")
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(workers=1)

    p = sub.add_parser("montecarlo", parents=[common], help="paired Monte Carlo over all controllers")
    p.add_argument("--realizations", type=int, default=None)
    p.add_argument("--controller", choices=CONTROLLERS, action="append",
                   help="restrict to these controllers (repeatable); default all")
    p.add_argument("--workers", type=int, default=1, help="processes for independent realizations")
    p.add_argument("--no-plots", action="store_true")

    p = sub.add_parser("sweep-epsilon", parents=[common], help="Joint-MPC sensitivity to the smoothing radius")
    p.add_argument("--realizations", type=int, default=None)
    p.add_argument("--epsilons-cm", type=float, nargs="+", default=None)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("theory", parents=[common], help="Lipschitz, quadrature-order and contraction checks")
    p.add_argument("--samples", type=int, default=20000)

    p = sub.add_parser("plot", parents=[common], help="SVG panels from a previous run's CSV files")
    p.add_argument("--input", default=None, help="directory holding kinematics.csv/links.csv (default --out)")
    p.add_argument("--realization", type=int, default=0)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            return cmd_run(args, cfg)
        if args.command == "montecarlo":
            n_real = args.realizations or cfg.realizations
            return cmd_montecarlo(args, cfg, args.controller or CONTROLLERS, n_real, "montecarlo")
        if args.command == "sweep-epsilon":
            return cmd_sweep(args, cfg)
        if args.command == "theory":
            return cmd_theory(args, cfg)
        return cmd_plot(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""SVG figures: top-down trajectories, minimum separation and link capacity over time."""

from __future__ import annotations

import os
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .harness import _LABELS, EpisodeRecord  # noqa: E402

# deterministic SVG ids so reruns diff cleanly
plt.rcParams["svg.hashsalt"] = "jointmpc"
plt.rcParams["svg.fonttype"] = "none"


def _time(rec: EpisodeRecord) -> np.ndarray:
    return np.arange(rec.n_steps) * rec.Ts


def plot_trajectories(rec: EpisodeRecord, path: str) -> str:
    fig, ax = plt.subplots(figsize=(5.5, 5))
    for i in range(rec.states.shape[1]):
        xy = rec.states[:, i, 0:2]
        line, = ax.plot(xy[:, 0], xy[:, 1], lw=1.4, label=f"UAV {i}")
        ax.plot(*xy[0], "o", color=line.get_color(), ms=5)
        ax.plot(*xy[-1], "s", color=line.get_color(), ms=5)
    ax.set_aspect("equal", adjustable="datalim")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title(f"{_LABELS.get(rec.controller, rec.controller)} trajectories (top view)")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_min_distance(records: Sequence[EpisodeRecord], d_min: float, path: str) -> str:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for rec in records:
        ax.plot(_time(rec), rec.min_distance, lw=1.3, label=_LABELS.get(rec.controller, rec.controller))
    ax.axhline(d_min, color="red", ls="--", lw=1.2, label=f"d_min = {d_min:g} m")
    ax.set_xlabel("time [s]")
    ax.set_ylabel("min pairwise distance [m]")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_capacity(records: Sequence[EpisodeRecord], path: str) -> str:
    """Network capacity per step: the sum over links, in Gbit/s."""
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for rec in records:
        ax.plot(_time(rec), rec.capacity.sum(axis=1) / 1e9, lw=1.2,
                label=_LABELS.get(rec.controller, rec.controller))
    ax.set_xlabel("time [s]")
    ax.set_ylabel("network capacity [Gbit/s]")
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def emit_plots(records: Sequence[EpisodeRecord], out_dir: str, d_min: float = 3.5) -> dict:
    """Write the three panels. The trajectory panel uses the first record."""
    records = list(records)
    if not records:
        raise ValueError("emit_plots needs at least one record")
    os.makedirs(out_dir, exist_ok=True)
    return {
        "trajectories": plot_trajectories(records[0], os.path.join(out_dir, "trajectories.svg")),
        "min_distance": plot_min_distance(records, d_min, os.path.join(out_dir, "min_distance.svg")),
        "capacity": plot_capacity(records, os.path.join(out_dir, "capacity.svg")),
    }

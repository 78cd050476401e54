"""Reference trajectories: Akima splines through waypoints and the antipodal crossing."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dynamics import AgentState


@dataclass(frozen=True)
class Waypoint:
    time: float
    position: np.ndarray


def akima_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Knot derivatives from Akima's weighted-average rule (1-D ``y``).

    Two extra segment slopes are extrapolated linearly at each end, which is
    Akima's own end treatment and also covers 3 or 4 knots. Two knots give the
    straight line.
    """
    n = len(x)
    m = np.diff(y) / np.diff(x)
    if n == 2:
        return np.array([m[0], m[0]])
    ext = np.empty(n + 3)
    ext[2:-2] = m
    ext[1] = 2.0 * m[0] - m[1]
    ext[0] = 2.0 * ext[1] - m[0]
    ext[-2] = 2.0 * m[-1] - m[-2]
    ext[-1] = 2.0 * ext[-2] - m[-1]
    t = np.empty(n)
    for i in range(n):
        # ext[i + 2] is the slope of segment i
        w1 = abs(ext[i + 3] - ext[i + 2])
        w2 = abs(ext[i + 1] - ext[i])
        if w1 + w2 == 0.0:
            t[i] = 0.5 * (ext[i + 1] + ext[i + 2])
        else:
            t[i] = (w1 * ext[i + 1] + w2 * ext[i + 2]) / (w1 + w2)
    return t


class AkimaPath:
    """Per-axis Akima interpolant of a waypoint list; queries outside the span clamp."""

    def __init__(self, waypoints: Sequence[Waypoint]):
        if len(waypoints) < 2:
            raise ValueError("an Akima path needs at least two waypoints")
        self.times = np.array([w.time for w in waypoints], dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("waypoint times must be strictly increasing")
        self.points = np.array([np.asarray(w.position, dtype=float) for w in waypoints])
        self.slopes = np.column_stack([akima_slopes(self.times, self.points[:, a]) for a in range(3)])

    def __call__(self, t: float) -> np.ndarray:
        return self.evaluate(t)[0]

    def evaluate(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Position and velocity at time ``t``."""
        x = self.times
        if t <= x[0]:
            return self.points[0].copy(), np.zeros(3)
        if t >= x[-1]:
            return self.points[-1].copy(), np.zeros(3)
        i = int(np.searchsorted(x, t, side="right") - 1)
        h = x[i + 1] - x[i]
        s = (t - x[i]) / h
        y0, y1 = self.points[i], self.points[i + 1]
        d0, d1 = self.slopes[i], self.slopes[i + 1]
        s2, s3 = s * s, s * s * s
        pos = ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0
               + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1)
        vel = ((6 * s2 - 6 * s) * y0 / h + (3 * s2 - 4 * s + 1) * d0
               + (-6 * s2 + 6 * s) * y1 / h + (3 * s2 - 2 * s) * d1)
        return pos, vel


def akima_interpolate(waypoints: Sequence[Waypoint], t: float) -> np.ndarray:
    return AkimaPath(waypoints)(t)


@dataclass(frozen=True)
class AntipodalGeometry:
    radius: float = 12.0
    altitude: float = 10.0
    hover_time: float = 4.0
    crossing_time: float = 6.0
    formation_shift: float = 30.0
    formation_rotation_deg: float = 45.0
    jitter: float = 0.5

    def __post_init__(self):
        for name in ("radius", "altitude", "crossing_time"):
            if not getattr(self, name) > 0:
                raise ValueError(f"scenario.{name} must be > 0")
        if self.hover_time < 0 or self.jitter < 0:
            raise ValueError("scenario.hover_time and scenario.jitter must be >= 0")


def antipodal_waypoints(n_agents: int, geom: AntipodalGeometry, duration: float,
                        rng: np.random.Generator | None = None) -> list[list[Waypoint]]:
    """Waypoints of the crossing followed by a rigid formation manoeuvre.

    Agents start equally spaced on a circle, hover, fly straight through the
    centre to the diametrically opposite point, then the whole formation
    translates along +x while rotating about its centre. Every waypoint is
    perturbed by isotropic Gaussian jitter drawn from ``rng`` (the two hover
    waypoints share one draw so the agent stays put).
    """
    if n_agents < 2:
        raise ValueError("the antipodal scenario needs at least 2 agents")
    t0 = geom.hover_time
    t1 = t0 + geom.crossing_time
    if duration <= t1:
        raise ValueError("scenario duration must exceed hover_time + crossing_time")
    n_form = 3
    form_times = [t1 + (duration - t1) * (k + 1) / n_form for k in range(n_form)]
    paths = []
    for i in range(n_agents):
        theta = 2.0 * math.pi * i / n_agents
        unit = np.array([math.cos(theta), math.sin(theta), 0.0])
        lift = np.array([0.0, 0.0, geom.altitude])
        wps = [(0.0, geom.radius * unit + lift)]
        if t0 > 0:
            wps.append((t0, geom.radius * unit + lift))
        for s in (0.25, 0.5, 0.75, 1.0):
            wps.append((t0 + s * geom.crossing_time, geom.radius * (1.0 - 2.0 * s) * unit + lift))
        for k, t in enumerate(form_times):
            frac = (k + 1) / n_form
            ang = theta + math.pi + math.radians(geom.formation_rotation_deg) * frac
            centre = np.array([geom.formation_shift * frac, 0.0, geom.altitude])
            wps.append((t, centre + geom.radius * np.array([math.cos(ang), math.sin(ang), 0.0])))
        if rng is not None and geom.jitter > 0:
            noise = rng.normal(0.0, geom.jitter, size=(len(wps), 3))
            if t0 > 0:
                noise[1] = noise[0]
            wps = [(t, p + e) for (t, p), e in zip(wps, noise)]
        paths.append([Waypoint(t, p) for t, p in wps])
    return paths


def antipodal_scenario(n_agents: int, geom: AntipodalGeometry, duration: float, seed: int | None = None,
                       neighbor_sets=None):
    """Reference paths and initial states for the crossing.

    Initial yaw points at the first communication neighbour (ring by default).
    ``seed=None`` gives the unjittered nominal geometry.
    """
    rng = None if seed is None else np.random.default_rng(seed)
    paths = [AkimaPath(w) for w in antipodal_waypoints(n_agents, geom, duration, rng)]
    if neighbor_sets is None:
        neighbor_sets = [((i + 1) % n_agents,) for i in range(n_agents)]
    starts = [p(0.0) for p in paths]
    initial = []
    for i, p0 in enumerate(starts):
        yaw = 0.0
        if neighbor_sets[i]:
            q = starts[neighbor_sets[i][0]]
            yaw = math.atan2(q[1] - p0[1], q[0] - p0[0])
        initial.append(AgentState(p0, np.zeros(3), yaw))
    return paths, initial

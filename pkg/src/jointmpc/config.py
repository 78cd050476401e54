"""Scenario configuration: an INI file with one flat section per module.

Every key is optional; missing keys take the packaged defaults in
``defaults.ini``. Unknown sections or keys are rejected so typos fail loudly.
"""

from __future__ import annotations

import configparser
import hashlib
import io
import math
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import PidGains
from .channel import LinkBudget
from .cost import CostWeights
from .dynamics import DynamicsParams
from .scenario import AntipodalGeometry
from .solver import SolverConfig
from .surrogate import SmoothingConfig
from .swarm import SwarmSettings, SwarmTopology

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; carries the offending ``section.key`` and line if known."""

    def __init__(self, message: str, field_path: str = "", line: Optional[int] = None):
        where = field_path
        if line is not None:
            where = f"{where} (line {line})" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)
        self.field_path = field_path
        self.line = line


def calibrate_snr0(bandwidth_hz: float = 2.16e9, n_ula: float = 16.0, range_m: float = 20.0,
                   target_bps: float = 4.8e9) -> float:
    """Reference SNR giving ``target_bps`` on an ideally aligned free-space link at ``range_m``.

    The two-ray term is left out, so this pins the line-of-sight scale only.
    """
    snr = 2.0 ** (target_bps / bandwidth_hz) - 1.0
    return snr * range_m**2 / n_ula


@dataclass(frozen=True)
class ScenarioConfig:
    n_agents: int = 3
    duration: float = 40.0
    seed: int = 0
    horizon: int = 15
    realizations: int = 50
    outage_threshold_bps: float = 1e9
    geometry: AntipodalGeometry = field(default_factory=AntipodalGeometry)
    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    link: LinkBudget = field(default_factory=LinkBudget)
    smoothing: SmoothingConfig = field(default_factory=SmoothingConfig)
    weights: CostWeights = field(default_factory=CostWeights)
    solver: SolverConfig = field(default_factory=SolverConfig)
    topology: str = "ring"
    mode: str = "gauss-seidel"
    n_sweeps: int = 1
    safety_scope: str = "neighbors"
    pid: PidGains = field(default_factory=PidGains)

    def __post_init__(self):
        if self.n_agents < 1:
            raise ConfigError("must be >= 1", "scenario.n_agents")
        if not self.duration > 0:
            raise ConfigError("must be > 0", "scenario.duration")
        if self.horizon < 1:
            raise ConfigError("must be >= 1", "scenario.horizon")
        if self.realizations < 1:
            raise ConfigError("must be >= 1", "harness.realizations")
        if self.topology != "ring":
            raise ConfigError("only 'ring' is supported", "swarm.topology")

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.dynamics.Ts))

    def make_topology(self) -> SwarmTopology:
        return SwarmTopology.ring(self.n_agents)

    def swarm_settings(self, weights: Optional[CostWeights] = None,
                       smoothing: Optional[SmoothingConfig] = None) -> SwarmSettings:
        return SwarmSettings(weights or self.weights, self.link, smoothing or self.smoothing, self.dynamics,
                             self.solver, self.mode, self.n_sweeps, self.safety_scope)

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


# (section, key) -> (attribute path, kind)
_FIELDS = {
    ("scenario", "n_agents"): ("n_agents", int),
    ("scenario", "duration"): ("duration", float),
    ("scenario", "seed"): ("seed", int),
    ("scenario", "horizon"): ("horizon", int),
    ("scenario", "radius"): ("geometry.radius", float),
    ("scenario", "altitude"): ("geometry.altitude", float),
    ("scenario", "hover_time"): ("geometry.hover_time", float),
    ("scenario", "crossing_time"): ("geometry.crossing_time", float),
    ("scenario", "formation_shift"): ("geometry.formation_shift", float),
    ("scenario", "formation_rotation_deg"): ("geometry.formation_rotation_deg", float),
    ("scenario", "jitter"): ("geometry.jitter", float),
    ("dynamics", "ts"): ("dynamics.Ts", float),
    ("dynamics", "a_max"): ("dynamics.a_max", float),
    ("dynamics", "omega_max"): ("dynamics.omega_max", float),
    ("dynamics", "d_min"): ("dynamics.d_min", float),
    ("link", "carrier_hz"): ("link.carrier_hz", float),
    ("link", "bandwidth_hz"): ("link.bandwidth_hz", float),
    ("link", "n_ula"): ("link.n_ula", float),
    ("link", "hpbw_deg"): ("link.hpbw_rad", "deg"),
    ("link", "fov_deg"): ("link.fov_rad", "deg"),
    ("link", "kappa"): ("link.kappa", float),
    ("link", "snr0"): ("link.snr0", float),
    ("link", "gamma_refl"): ("link.gamma_refl", float),
    ("smoothing", "epsilon"): ("smoothing.epsilon", float),
    ("cost", "q_pos"): ("weights.q_pos", "matrix"),
    ("cost", "r_diag"): ("weights.r_diag", "vector"),
    ("cost", "w_comm"): ("weights.w_comm", float),
    ("cost", "w_safe"): ("weights.w_safe", float),
    ("cost", "mu"): ("weights.mu", float),
    ("solver", "max_iters"): ("solver.max_iters", int),
    ("solver", "grad_tol"): ("solver.grad_tol", float),
    ("solver", "step_tol"): ("solver.step_tol", float),
    ("solver", "ftol"): ("solver.ftol", float),
    ("solver", "armijo_c"): ("solver.armijo_c", float),
    ("solver", "backtrack_ratio"): ("solver.backtrack_ratio", float),
    ("solver", "max_backtracks"): ("solver.max_backtracks", int),
    ("swarm", "topology"): ("topology", str),
    ("swarm", "mode"): ("mode", str),
    ("swarm", "n_sweeps"): ("n_sweeps", int),
    ("swarm", "safety_scope"): ("safety_scope", str),
    ("baselines", "pid_kp"): ("pid.kp", float),
    ("baselines", "pid_kd"): ("pid.kd", float),
    ("baselines", "pid_krep"): ("pid.krep", float),
    ("baselines", "pid_range_factor"): ("pid.range_factor", float),
    ("harness", "realizations"): ("realizations", int),
    ("harness", "outage_threshold_bps"): ("outage_threshold_bps", float),
}
_SUB = {"geometry": AntipodalGeometry, "dynamics": DynamicsParams, "link": LinkBudget,
        "smoothing": SmoothingConfig, "weights": CostWeights, "solver": SolverConfig, "pid": PidGains}


def _parse_value(raw: str, kind, path: str, line):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            value = float(raw)
            if not math.isfinite(value):
                raise ValueError("not finite")
            return value
        if kind is str:
            return raw.strip()
        if kind == "deg":
            return math.radians(float(raw))
        numbers = [float(v) for v in re.split(r"[,\s]+", raw.strip()) if v]
        if kind == "vector":
            return np.array(numbers)
        if len(numbers) == 1:
            return numbers[0] * np.eye(3)
        if len(numbers) == 3:
            return np.diag(numbers)
        if len(numbers) == 9:
            return np.array(numbers).reshape(3, 3)
        raise ValueError("expected 1, 3 or 9 numbers")
    except ValueError as exc:
        raise ConfigError(f"cannot parse {raw!r}: {exc}", path, line) from None


def _line_numbers(text: str) -> dict:
    lines = {}
    section = None
    for no, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        m = re.match(r"\[([^\]]+)\]", stripped)
        if m:
            section = m.group(1).strip().lower()
            continue
        m = re.match(r"([A-Za-z0-9_]+)\s*[=:]", stripped)
        if m and section:
            lines[(section, m.group(1).lower())] = no
    return lines


def _default_text() -> str:
    return resources.files("jointmpc").joinpath("defaults.ini").read_text()


def parse_config(text: str, base: Optional[ScenarioConfig] = None) -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"parse error: {exc}", line=getattr(exc, "lineno", None)) from None
    lines = _line_numbers(text)
    top: dict = {}
    sub: dict = {name: {} for name in _SUB}
    for section in parser.sections():
        sec = section.lower()
        if sec == "meta":
            for key, raw in parser.items(section):
                if key != "schema_version":
                    raise ConfigError("unknown key", f"meta.{key}", lines.get((sec, key)))
                if int(raw) != SCHEMA_VERSION:
                    raise ConfigError(f"unsupported schema version {raw}", "meta.schema_version",
                                      lines.get((sec, key)))
            continue
        for key, raw in parser.items(section):
            path = f"{sec}.{key}"
            line = lines.get((sec, key))
            if (sec, key) not in _FIELDS:
                raise ConfigError("unknown key", path, line)
            attr, kind = _FIELDS[(sec, key)]
            value = _parse_value(raw, kind, path, line)
            if "." in attr:
                group, name = attr.split(".")
                sub[group][name] = (value, path, line)
            else:
                top[attr] = (value, path, line)

    base = base or ScenarioConfig()
    built = {}
    for group, cls in _SUB.items():
        current = getattr(base, group)
        values = {f: getattr(current, f) for f in cls.__dataclass_fields__ if cls.__dataclass_fields__[f].init}
        for name, (value, _, _) in sub[group].items():
            values[name] = value
        try:
            built[group] = cls(**values)
        except ValueError as exc:
            path, line = next(((p, ln) for _, p, ln in sub[group].values()), (group, None))
            for name, (_, p, ln) in sub[group].items():
                if name.lower() in str(exc).lower():
                    path, line = p, ln
            raise ConfigError(str(exc), path, line) from None
    kwargs = {name: value for name, (value, _, _) in top.items()}
    try:
        cfg = replace(base, **built, **kwargs)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if cfg.duration <= cfg.geometry.hover_time + cfg.geometry.crossing_time:
        raise ConfigError("must exceed hover_time + crossing_time", "scenario.duration",
                          top.get("duration", (None, None, None))[2])
    if cfg.mode not in ("gauss-seidel", "jacobi"):
        raise ConfigError("must be 'gauss-seidel' or 'jacobi'", "swarm.mode", lines.get(("swarm", "mode")))
    if cfg.safety_scope not in ("all", "neighbors"):
        raise ConfigError("must be 'all' or 'neighbors'", "swarm.safety_scope",
                          lines.get(("swarm", "safety_scope")))
    return cfg


def default_config() -> ScenarioConfig:
    return parse_config(_default_text(), ScenarioConfig())


def load_config(path=None) -> ScenarioConfig:
    """Packaged defaults overlaid with the file at ``path`` (if given)."""
    defaults = default_config()
    if path is None:
        return defaults
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    return parse_config(text, defaults)


def _fmt(value) -> str:
    if isinstance(value, np.ndarray):
        return ", ".join(repr(float(v)) for v in value.reshape(-1))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ScenarioConfig) -> str:
    """Serialise to the INI schema; ``parse_config(dump_config(c))`` reproduces ``c``."""
    sections: dict = {"meta": {"schema_version": str(SCHEMA_VERSION)}}
    for (sec, key), (attr, kind) in _FIELDS.items():
        obj = cfg
        for part in attr.split("."):
            obj = getattr(obj, part)
        if kind == "deg":
            obj = math.degrees(obj)
        sections.setdefault(sec, {})[key] = _fmt(obj)
    out = io.StringIO()
    for sec, items in sections.items():
        out.write(f"[{sec}]\n")
        for key, value in items.items():
            out.write(f"{key} = {value}\n")
        out.write("\n")
    return out.getvalue()


def config_hash(cfg: ScenarioConfig) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()[:16]

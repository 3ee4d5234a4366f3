"""Experiment configuration: YAML schema, validation and round-trip.

A config file has the sections ``physics``, ``signal``, ``sensors``,
``time``, ``sources``, ``grid``, ``noise``, ``solver`` and
``postprocess``; see ``configs/`` for complete examples. Validation errors
name the offending field as a dotted path, e.g. ``noise.level``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np
import yaml

from .core import (
    SamplingGrid,
    SensorArray,
    Signal,
    StaticSourceSet,
    TimeGrid,
    Trajectory,
    TRAJECTORY_KINDS,
    sensor_selection,
    sphere_sensors,
)
from .errors import ValidationError
from .invstatic import SolverOptions


def _vec3(v, path):
    try:
        t = tuple(float(x) for x in v)
    except (TypeError, ValueError):
        raise ValidationError("expected three numbers", path) from None
    if len(t) != 3:
        raise ValidationError("expected three numbers", path)
    return t


def _points(v, path):
    if not isinstance(v, (list, tuple)) or not v:
        raise ValidationError("expected a non-empty list of 3D points", path)
    return tuple(_vec3(p, f"{path}[{i}]") for i, p in enumerate(v))


def _num(v, path, kind=float):
    if isinstance(v, bool):
        raise ValidationError(f"expected a {kind.__name__}", path)
    try:
        x = kind(v)
    except (TypeError, ValueError):
        raise ValidationError(f"expected a {kind.__name__}", path) from None
    if kind is int and x != v:
        raise ValidationError("expected an integer", path)
    return x


def _section(d, name, allowed):
    sec = d.get(name, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise ValidationError("expected a mapping", name)
    unknown = set(sec) - set(allowed)
    if unknown:
        raise ValidationError(f"unknown keys {sorted(unknown)}", name)
    return sec


@dataclass(frozen=True)
class SensorSpec:
    kind: str = "sphere"
    radius: float = 5.0
    n_phi: int = 8
    n_theta: int = 8
    phi_select: Optional[Tuple[int, ...]] = None
    theta_select: Optional[Tuple[int, ...]] = None
    points: Optional[Tuple[Tuple[float, float, float], ...]] = None

    def build(self) -> SensorArray:
        if self.kind == "points":
            return SensorArray(self.points)
        arr = sphere_sensors(self.radius, self.n_phi, self.n_theta)
        if self.phi_select is None and self.theta_select is None:
            return arr
        return sensor_selection(arr, self.n_theta, self.phi_select, self.theta_select)

    def to_dict(self):
        if self.kind == "points":
            return {"kind": "points", "points": [list(p) for p in self.points]}
        d = {"kind": "sphere", "radius": self.radius, "n_phi": self.n_phi,
             "n_theta": self.n_theta}
        if self.phi_select is not None:
            d["phi_select"] = list(self.phi_select)
        if self.theta_select is not None:
            d["theta_select"] = list(self.theta_select)
        return d


@dataclass(frozen=True)
class SourceSpec:
    kind: str = "static"
    locations: Optional[Tuple[Tuple[float, float, float], ...]] = None
    intensities: Optional[Tuple[float, ...]] = None
    trajectory: Optional[str] = None
    times: Optional[Tuple[float, ...]] = None
    points: Optional[Tuple[Tuple[float, float, float], ...]] = None

    @property
    def is_static(self):
        return self.kind == "static"

    def static_sources(self) -> StaticSourceSet:
        return StaticSourceSet(self.locations, self.intensities)

    def build_trajectory(self, T=None) -> Trajectory:
        if self.trajectory == "piecewise_linear":
            return Trajectory.piecewise_linear(self.times, self.points, T)
        if self.trajectory == "stationary":
            return Trajectory.stationary(self.points[0])
        return Trajectory(self.trajectory)

    def to_dict(self):
        if self.is_static:
            return {"kind": "static", "locations": [list(p) for p in self.locations],
                    "intensities": list(self.intensities)}
        d = {"kind": "trajectory", "trajectory": self.trajectory}
        if self.times is not None:
            d["times"] = list(self.times)
        if self.points is not None:
            d["points"] = [list(p) for p in self.points]
        return d


@dataclass(frozen=True)
class GridSpec:
    lower: Tuple[float, float, float] = (-2.0, -2.0, -2.0)
    upper: Tuple[float, float, float] = (2.0, 2.0, 2.0)
    shape: Tuple[int, int, int] = (21, 21, 21)

    def build(self) -> SamplingGrid:
        return SamplingGrid(self.lower, self.upper, self.shape)


@dataclass(frozen=True)
class NoiseSpec:
    level: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class PostSpec:
    fourier_order: int = 5
    repair_threshold: float = 1e-4
    gap_threshold: float = 0.3
    segment_order: int = 3


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    c: float = 1.0
    signal: dict = field(default_factory=lambda: Signal.gaussian_sine().to_dict())
    sensors: SensorSpec = SensorSpec()
    T: float = 15.0
    N_T: int = 64
    sources: SourceSpec = SourceSpec()
    grid: GridSpec = GridSpec()
    noise: NoiseSpec = NoiseSpec()
    solver: SolverOptions = SolverOptions()
    postprocess: PostSpec = PostSpec()

    def build_signal(self) -> Signal:
        return Signal.from_dict(self.signal)

    def build_timegrid(self) -> TimeGrid:
        return TimeGrid(self.T, self.N_T)

    def to_dict(self):
        return {
            "name": self.name,
            "physics": {"c": self.c},
            "signal": dict(self.signal),
            "sensors": self.sensors.to_dict(),
            "time": {"T": self.T, "N_T": self.N_T},
            "sources": self.sources.to_dict(),
            "grid": {"lower": list(self.grid.lower), "upper": list(self.grid.upper),
                     "shape": list(self.grid.shape)},
            "noise": asdict(self.noise),
            "solver": asdict(self.solver),
            "postprocess": asdict(self.postprocess),
        }


def _parse_sensors(d):
    sec = _section(d, "sensors", ["kind", "radius", "n_phi", "n_theta", "phi_select",
                                  "theta_select", "points"])
    kind = sec.get("kind", "sphere")
    if kind == "points":
        return SensorSpec(kind="points", points=_points(sec.get("points"), "sensors.points"))
    if kind != "sphere":
        raise ValidationError(f"unknown kind {kind!r}", "sensors.kind")
    sel = {}
    for key in ("phi_select", "theta_select"):
        if sec.get(key) is not None:
            sel[key] = tuple(_num(v, f"sensors.{key}", int) for v in sec[key])
    return SensorSpec(radius=_num(sec.get("radius", 5.0), "sensors.radius"),
                      n_phi=_num(sec.get("n_phi", 8), "sensors.n_phi", int),
                      n_theta=_num(sec.get("n_theta", 8), "sensors.n_theta", int), **sel)


def _parse_sources(d):
    sec = _section(d, "sources", ["kind", "locations", "intensities", "trajectory", "times",
                                  "points", "point"])
    kind = sec.get("kind", "static")
    if kind == "static":
        locs = _points(sec.get("locations"), "sources.locations")
        ints = sec.get("intensities", [1.0] * len(locs))
        if not isinstance(ints, (list, tuple)):
            raise ValidationError("expected a list", "sources.intensities")
        return SourceSpec(locations=locs,
                          intensities=tuple(_num(a, "sources.intensities") for a in ints))
    if kind != "trajectory":
        raise ValidationError(f"unknown kind {kind!r}", "sources.kind")
    traj = sec.get("trajectory")
    if traj not in TRAJECTORY_KINDS:
        raise ValidationError(f"unknown trajectory {traj!r}", "sources.trajectory")
    spec = SourceSpec(kind="trajectory", trajectory=traj)
    if traj == "piecewise_linear":
        times = sec.get("times")
        if not isinstance(times, (list, tuple)):
            raise ValidationError("expected a list", "sources.times")
        spec = SourceSpec(kind="trajectory", trajectory=traj,
                          times=tuple(_num(t, "sources.times") for t in times),
                          points=_points(sec.get("points"), "sources.points"))
    elif traj == "stationary":
        pt = sec.get("point", (sec.get("points") or [None])[0])
        spec = SourceSpec(kind="trajectory", trajectory=traj,
                          points=(_vec3(pt, "sources.point"),))
    return spec


def config_from_dict(d) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ValidationError("config must be a mapping", "config")
    known = {"name", "physics", "signal", "sensors", "time", "sources", "grid", "noise",
             "solver", "postprocess"}
    unknown = set(d) - known
    if unknown:
        raise ValidationError(f"unknown sections {sorted(unknown)}", "config")
    phys = _section(d, "physics", ["c"])
    c = _num(phys.get("c", 1.0), "physics.c")
    if not c > 0:
        raise ValidationError("must be > 0", "physics.c")

    sig = d.get("signal") or {}
    if not isinstance(sig, dict):
        raise ValidationError("expected a mapping", "signal")
    signal = Signal.from_dict(sig).to_dict()

    tm = _section(d, "time", ["T", "N_T"])
    T = _num(tm.get("T", 15.0), "time.T")
    N_T = _num(tm.get("N_T", 64), "time.N_T", int)
    TimeGrid(T, N_T)

    gr = _section(d, "grid", ["lower", "upper", "shape"])
    grid = GridSpec(_vec3(gr.get("lower", (-2, -2, -2)), "grid.lower"),
                    _vec3(gr.get("upper", (2, 2, 2)), "grid.upper"),
                    tuple(_num(n, "grid.shape", int) for n in gr.get("shape", (21, 21, 21))))
    grid.build()

    nz = _section(d, "noise", ["level", "seed"])
    noise = NoiseSpec(_num(nz.get("level", 0.0), "noise.level"),
                      _num(nz.get("seed", 0), "noise.seed", int))
    if not noise.level >= 0:
        raise ValidationError("must be >= 0", "noise.level")

    sv = _section(d, "solver", list(SolverOptions.__dataclass_fields__))
    kinds = {"max_iter": int, "max_peaks": int, "memory_budget": int}
    solver = SolverOptions(**{k: _num(v, f"solver.{k}", kinds.get(k, float))
                              for k, v in sv.items()})

    pp = _section(d, "postprocess", list(PostSpec.__dataclass_fields__))
    kinds = {"fourier_order": int, "segment_order": int}
    post = PostSpec(**{k: _num(v, f"postprocess.{k}", kinds.get(k, float))
                       for k, v in pp.items()})
    if post.fourier_order < 0 or post.segment_order < 0:
        raise ValidationError("Fourier orders must be >= 0", "postprocess")

    sensors = _parse_sensors(d)
    sensors.build()
    sources = _parse_sources(d)
    if sources.is_static:
        sources.static_sources()
    else:
        sources.build_trajectory(T)

    return ExperimentConfig(name=str(d.get("name", "experiment")), c=c, signal=signal,
                            sensors=sensors, T=T, N_T=N_T, sources=sources, grid=grid,
                            noise=noise, solver=solver, postprocess=post)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ValidationError(f"cannot parse YAML: {exc}", str(path)) from None
    return config_from_dict(raw)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def save_config(cfg: ExperimentConfig, path):
    with open(path, "w") as fh:
        fh.write(dump_config(cfg))


def trajectory_speed_ratio(cfg: ExperimentConfig) -> Optional[float]:
    """Sampled max ``|v| / c`` of the configured trajectory, if any."""
    if cfg.sources.is_static:
        return None
    traj = cfg.sources.build_trajectory(cfg.T)
    ts = np.concatenate([[0.0], cfg.build_timegrid().times])
    return float(np.max(np.linalg.norm(traj.velocity(ts), axis=-1)) / cfg.c)

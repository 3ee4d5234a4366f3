"""Domain types shared by the forward and inverse stages.

All containers are frozen dataclasses holding read-only numpy arrays, so a
value can be passed between threads or stages without defensive copies.

Conventions
-----------
* Time samples are ``t_k = k T / N_T`` for ``k = 1..N_T``. The ``k = 0``
  sample carries no information (the field vanishes there by causality) and
  is never stored.
* Sampling grids enumerate points in row-major order with the third axis
  fastest: ``l = (i * n2 + j) * n3 + k``.
* Sphere sensors are ordered polar-angle major: ``index = i * n_theta + j``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError

#: Identifier of the bit generator used by :func:`add_noise`.
NOISE_GENERATOR = "numpy.PCG64"


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _as_points(points, name):
    p = np.asarray(points, dtype=float)
    if p.ndim == 1 and p.size == 3:
        p = p.reshape(1, 3)
    if p.ndim != 2 or p.shape[1] != 3:
        raise ValidationError(f"expected an (N, 3) array, got shape {p.shape}", name)
    if not np.all(np.isfinite(p)):
        raise ValidationError("coordinates must be finite", name)
    return _frozen(p)


def _pairwise_distinct(p, name):
    if len(p) > 1 and len(np.unique(p, axis=0)) != len(p):
        raise ValidationError("points must be pairwise distinct", name)


def distances(a, b):
    """Euclidean distance matrix between point sets ``a`` (N,3) and ``b`` (M,3).

    Every distance in the package goes through here so that different code
    paths produce bitwise identical radii for the same pair of points.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d = a[..., :, None, :] - b[..., None, :, :]
    return np.sqrt(np.einsum("...j,...j->...", d, d))


# --------------------------------------------------------------------------
# signals


@dataclass(frozen=True)
class Signal:
    """Causal scalar source signal.

    Two kinds are supported: ``"gaussian_sine"``, i.e.
    ``sin(omega t) exp(-decay (t - center)^2)`` for ``t >= 0``, and
    ``"tabulated"``, a piecewise linear table that is zero outside its range.
    Both vanish identically for ``t < 0``.
    """

    kind: str = "gaussian_sine"
    omega: float = 10.0
    center: float = 3.0
    decay: float = 0.3
    times: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    causal: bool = field(default=True, init=False)

    def __post_init__(self):
        if self.kind == "gaussian_sine":
            for name in ("omega", "center", "decay"):
                if not np.isfinite(getattr(self, name)):
                    raise ValidationError("must be finite", f"signal.{name}")
            if self.decay < 0:
                raise ValidationError("must be >= 0", "signal.decay")
        elif self.kind == "tabulated":
            if self.times is None or self.values is None:
                raise ValidationError("tabulated signal needs times and values", "signal")
            t = _frozen(self.times)
            v = _frozen(self.values)
            if t.ndim != 1 or t.shape != v.shape or len(t) < 2:
                raise ValidationError("times and values must be equal-length 1D sequences "
                                      "with at least two entries", "signal")
            if not (np.all(np.isfinite(t)) and np.all(np.isfinite(v))):
                raise ValidationError("must be finite", "signal.values")
            if np.any(np.diff(t) <= 0):
                raise ValidationError("must be strictly increasing", "signal.times")
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "values", v)
            # The causal extension must be continuous at the onset.
            onset = v[0] if t[0] >= 0 else np.interp(0.0, t, v)
            if onset != 0.0:
                raise ValidationError("signal must start from zero at its causal onset "
                                      f"(got {onset!r})", "signal.values")
        else:
            raise ValidationError(f"unknown kind {self.kind!r}", "signal.kind")

    @classmethod
    def gaussian_sine(cls, omega=10.0, center=3.0, decay=0.3):
        return cls("gaussian_sine", float(omega), float(center), float(decay))

    @classmethod
    def tabulated(cls, times, values):
        return cls("tabulated", times=times, values=values)

    def __call__(self, t):
        return eval_signal(self, t)

    def to_dict(self):
        if self.kind == "gaussian_sine":
            return {"kind": self.kind, "omega": self.omega, "center": self.center,
                    "decay": self.decay}
        return {"kind": self.kind, "times": self.times.tolist(), "values": self.values.tolist()}

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        kind = d.pop("kind", "gaussian_sine")
        if kind == "tabulated":
            return cls.tabulated(d.get("times"), d.get("values"))
        if kind != "gaussian_sine":
            raise ValidationError(f"unknown kind {kind!r}", "signal.kind")
        unknown = set(d) - {"omega", "center", "decay"}
        if unknown:
            raise ValidationError(f"unknown keys {sorted(unknown)}", "signal")
        return cls.gaussian_sine(**d)


def eval_signal(sig, t):
    """Evaluate ``sig`` at time(s) ``t``; zero for negative times."""
    t = np.asarray(t, dtype=float)
    if sig.kind == "gaussian_sine":
        with np.errstate(invalid="ignore", over="ignore"):
            val = np.sin(sig.omega * t) * np.exp(-sig.decay * (t - sig.center) ** 2)
    else:
        val = np.interp(t, sig.times, sig.values, left=0.0, right=0.0)
    out = np.where(t < 0, 0.0, val)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# geometry


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling of ``(0, T]`` with ``N_T`` steps."""

    T: float
    n_steps: int

    def __post_init__(self):
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValidationError("must be > 0", "time.T")
        if int(self.n_steps) != self.n_steps or self.n_steps < 2:
            raise ValidationError("must be an integer >= 2", "time.N_T")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self):
        return self.T / self.n_steps

    @property
    def times(self):
        return np.arange(1, self.n_steps + 1) * self.T / self.n_steps


@dataclass(frozen=True)
class SensorArray:
    points: np.ndarray

    def __post_init__(self):
        p = _as_points(self.points, "sensors")
        if len(p) < 1:
            raise ValidationError("need at least one sensor", "sensors")
        _pairwise_distinct(p, "sensors")
        object.__setattr__(self, "points", p)

    def __len__(self):
        return len(self.points)

    def subset(self, indices):
        return SensorArray(self.points[np.asarray(indices, dtype=int)])


def sphere_sensors(radius, n_phi, n_theta):
    """Sensors on a sphere centred at the origin.

    Polar angles ``phi_i = (2i - 1) pi / (2 n_phi)``, ``i = 1..n_phi`` and
    azimuths ``theta_j = 2 pi j / n_theta``, ``j = 0..n_theta-1``. Point
    ``(i, j)`` is stored at index ``(i - 1) * n_theta + j``.
    """
    if not radius > 0:
        raise ValidationError("must be > 0", "sensors.radius")
    for name, n in (("n_phi", n_phi), ("n_theta", n_theta)):
        if int(n) != n or n < 1:
            raise ValidationError("must be an integer >= 1", f"sensors.{name}")
    i = np.arange(1, n_phi + 1)
    j = np.arange(n_theta)
    phi = (2 * i - 1) * np.pi / (2 * n_phi)
    theta = 2 * np.pi * j / n_theta
    P, TH = np.meshgrid(phi, theta, indexing="ij")
    pts = radius * np.stack(
        [np.sin(P) * np.cos(TH), np.sin(P) * np.sin(TH), np.cos(P)], axis=-1
    )
    return SensorArray(pts.reshape(-1, 3))


@dataclass(frozen=True)
class SamplingGrid:
    """Axis-aligned uniform lattice of candidate source points."""

    lower: np.ndarray
    upper: np.ndarray
    shape: tuple

    def __post_init__(self):
        lo = _frozen(self.lower)
        hi = _frozen(self.upper)
        if lo.shape != (3,) or hi.shape != (3,):
            raise ValidationError("corners must be 3D coordinates", "grid")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValidationError("corners must be finite", "grid")
        if np.any(hi <= lo):
            raise ValidationError("upper corner must exceed lower corner componentwise", "grid")
        shape = tuple(int(n) for n in self.shape)
        if len(shape) != 3 or any(n < 2 for n in shape) or tuple(self.shape) != shape:
            raise ValidationError("resolution must be three integers >= 2", "grid.shape")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "shape", shape)

    @classmethod
    def cube(cls, half_width, n):
        h = float(half_width)
        return cls((-h, -h, -h), (h, h, h), (n, n, n))

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def spacing(self):
        return (self.upper - self.lower) / (np.array(self.shape) - 1)

    def axes(self):
        return [np.linspace(self.lower[a], self.upper[a], self.shape[a]) for a in range(3)]

    def points(self):
        ax = self.axes()
        mesh = np.meshgrid(*ax, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def index_of(self, ijk):
        """Flat index of the cell triple(s) ``ijk``."""
        ijk = np.asarray(ijk, dtype=int)
        return np.ravel_multi_index(tuple(np.moveaxis(ijk, -1, 0)), self.shape)

    def ijk_of(self, index):
        """Inverse of :meth:`index_of`."""
        return np.stack(np.unravel_index(np.asarray(index, dtype=int), self.shape), axis=-1)

    def point_of(self, index):
        return self.lower + self.ijk_of(index) * self.spacing

    def contains(self, points, closed=True):
        p = np.asarray(points, dtype=float)
        if closed:
            return np.all((p >= self.lower) & (p <= self.upper), axis=-1)
        return np.all((p > self.lower) & (p < self.upper), axis=-1)

    def to_dict(self):
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist(),
                "shape": list(self.shape)}


def grid_points(grid):
    return grid.points()


# --------------------------------------------------------------------------
# sources


@dataclass(frozen=True)
class StaticSourceSet:
    locations: np.ndarray
    intensities: np.ndarray

    def __post_init__(self):
        loc = _as_points(self.locations, "sources.locations")
        a = _frozen(np.atleast_1d(np.asarray(self.intensities, dtype=float)))
        if len(loc) < 1:
            raise ValidationError("need at least one source", "sources")
        if a.shape != (len(loc),):
            raise ValidationError("one intensity per location required", "sources.intensities")
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise ValidationError("intensities must be finite and > 0", "sources.intensities")
        _pairwise_distinct(loc, "sources.locations")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "intensities", a)

    def __len__(self):
        return len(self.locations)


TRAJECTORY_KINDS = ("circle_modulated", "helix", "expanding_helix", "piecewise_linear",
                    "stationary")


@dataclass(frozen=True)
class Trajectory:
    """Path ``s(t)`` of a single moving source.

    Analytic kinds::

        circle_modulated   (2 + 0.3 cos 3t) (cos t, sin t, 0)
        helix              2 (sin 2t, cos 2t, t/pi - 1)
        expanding_helix    2 (t/pi sin 2t, t/pi cos 2t, t/pi - 1)
        stationary         constant point

    ``piecewise_linear`` interpolates ``points`` at ``times`` and holds the end
    values outside the table; its velocity is a central difference with step
    ``fd_step``.
    """

    kind: str
    times: Optional[np.ndarray] = None
    points: Optional[np.ndarray] = None
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.kind not in TRAJECTORY_KINDS:
            raise ValidationError(f"unknown kind {self.kind!r}", "sources.trajectory")
        if self.kind == "stationary":
            p = _as_points(self.points, "sources.points")
            if len(p) != 1:
                raise ValidationError("stationary trajectory takes one point", "sources.points")
            object.__setattr__(self, "points", p)
        elif self.kind == "piecewise_linear":
            if self.times is None or self.points is None:
                raise ValidationError("piecewise_linear needs times and points", "sources")
            t = _frozen(self.times)
            p = _as_points(self.points, "sources.points")
            if t.ndim != 1 or len(t) != len(p) or len(t) < 2:
                raise ValidationError("one time per point, at least two", "sources.times")
            if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
                raise ValidationError("must be finite and strictly increasing", "sources.times")
            object.__setattr__(self, "times", t)
            object.__setattr__(self, "points", p)

    @classmethod
    def stationary(cls, point):
        return cls("stationary", points=point)

    @classmethod
    def piecewise_linear(cls, times, points, T=None):
        fd = 1e-6 * (T if T is not None else float(np.ptp(np.asarray(times, dtype=float))))
        return cls("piecewise_linear", times=times, points=points, fd_step=fd)

    def position(self, t):
        """``s(t)``; ``t`` may be any array shape, the result gains a last axis of 3."""
        t = np.asarray(t, dtype=float)
        k = self.kind
        if k == "circle_modulated":
            r = 2.0 + 0.3 * np.cos(3 * t)
            return np.stack([r * np.cos(t), r * np.sin(t), np.zeros_like(t)], axis=-1)
        if k == "helix":
            return 2.0 * np.stack([np.sin(2 * t), np.cos(2 * t), t / np.pi - 1], axis=-1)
        if k == "expanding_helix":
            q = t / np.pi
            return 2.0 * np.stack([q * np.sin(2 * t), q * np.cos(2 * t), q - 1], axis=-1)
        if k == "stationary":
            return np.broadcast_to(self.points[0], t.shape + (3,)).copy()
        return np.stack([np.interp(t, self.times, self.points[:, a]) for a in range(3)],
                        axis=-1)

    def velocity(self, t):
        t = np.asarray(t, dtype=float)
        k = self.kind
        if k == "circle_modulated":
            r = 2.0 + 0.3 * np.cos(3 * t)
            dr = -0.9 * np.sin(3 * t)
            return np.stack([dr * np.cos(t) - r * np.sin(t),
                             dr * np.sin(t) + r * np.cos(t),
                             np.zeros_like(t)], axis=-1)
        if k == "helix":
            return 2.0 * np.stack([2 * np.cos(2 * t), -2 * np.sin(2 * t),
                                   np.full_like(t, 1 / np.pi)], axis=-1)
        if k == "expanding_helix":
            q = t / np.pi
            return 2.0 * np.stack([np.sin(2 * t) / np.pi + 2 * q * np.cos(2 * t),
                                   np.cos(2 * t) / np.pi - 2 * q * np.sin(2 * t),
                                   np.full_like(t, 1 / np.pi)], axis=-1)
        if k == "stationary":
            return np.zeros(t.shape + (3,))
        h = self.fd_step
        return (self.position(t + h) - self.position(t - h)) / (2 * h)

    def __call__(self, t):
        return self.position(t)

    def to_dict(self):
        d = {"kind": self.kind}
        if self.kind == "stationary":
            d["point"] = self.points[0].tolist()
        elif self.kind == "piecewise_linear":
            d["times"] = self.times.tolist()
            d["points"] = self.points.tolist()
        return d


# --------------------------------------------------------------------------
# measurements


@dataclass(frozen=True)
class PhysicsParams:
    c: float

    def __post_init__(self):
        if not (np.isfinite(self.c) and self.c > 0):
            raise ValidationError("wave speed must be > 0", "physics.c")


@dataclass(frozen=True)
class NoiseInfo:
    level: float
    seed: int
    generator: str = NOISE_GENERATOR


@dataclass(frozen=True)
class MeasurementSet:
    """Sampled boundary data ``u(x_i, t_k)``, shape ``(N_x, N_T)``."""

    sensors: SensorArray
    timegrid: TimeGrid
    c: float
    samples: np.ndarray
    noise: Optional[NoiseInfo] = None
    provenance: str = "external"

    def __post_init__(self):
        PhysicsParams(self.c)
        u = _frozen(self.samples)
        if u.shape != (len(self.sensors), self.timegrid.n_steps):
            raise ValidationError(
                f"sample matrix has shape {u.shape}, expected "
                f"{(len(self.sensors), self.timegrid.n_steps)}", "samples")
        if not np.all(np.isfinite(u)):
            raise ValidationError("samples must be finite", "samples")
        if self.provenance not in ("static", "moving", "external"):
            raise ValidationError(f"unknown provenance {self.provenance!r}", "provenance")
        object.__setattr__(self, "samples", u)

    @property
    def times(self):
        return self.timegrid.times

    def with_samples(self, samples):
        return replace(self, samples=samples)


def add_noise(data, level, seed):
    """Multiplicative noise ``(1 + level * r) u`` with ``r ~ U[-1, 1]``.

    Draws are taken sensor-major (one row of the sample matrix after the
    other) from a PCG64 stream seeded with ``seed``.
    """
    if not (np.isfinite(level) and level >= 0):
        raise ValidationError("must be >= 0", "noise.level")
    info = NoiseInfo(float(level), int(seed))
    if level == 0:
        return replace(data, noise=info)
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    r = rng.uniform(-1.0, 1.0, size=data.samples.shape)
    return replace(data, samples=(1.0 + level * r) * data.samples, noise=info)


def sensor_selection(sensors: SensorArray, n_theta: int, phi_select: Sequence[int] = None,
                     theta_select: Sequence[int] = None) -> SensorArray:
    """Restrict sphere sensors by zero-based polar/azimuth positions."""
    n_phi = len(sensors) // n_theta
    ii = np.arange(n_phi) if phi_select is None else np.asarray(phi_select, dtype=int)
    jj = np.arange(n_theta) if theta_select is None else np.asarray(theta_select, dtype=int)
    if ii.size == 0 or jj.size == 0 or ii.min() < 0 or ii.max() >= n_phi \
            or jj.min() < 0 or jj.max() >= n_theta:
        raise ValidationError("selection out of range", "sensors.select")
    idx = (ii[:, None] * n_theta + jj[None, :]).ravel()
    return sensors.subset(idx)

"""Reconstruction of a single moving point source.

At every time step the source is located independently by scanning the
sampling grid for the point whose stationary-source prediction best matches
the boundary data (the maximum of the indicator). The raw per-step estimate
is then cleaned up: steps where the signal is nearly silent are re-filled
from their neighbours, and the path is smoothed with a truncated Fourier
series, optionally stroke by stroke.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import List, Optional, Tuple

import numpy as np

from . import kernels
from .core import distances, eval_signal
from .errors import CoincidentPointError, ValidationError
from .invstatic import check_sensor_geometry

#: Squared misfits below this count as an exact match ...
MISFIT_FLOOR = 1e-24
#: ... and map to this indicator value.
INDICATOR_CAP = 1e12


def _indicator_from_ss(ss):
    ss = np.asarray(ss, dtype=float)
    return np.where(ss < MISFIT_FLOOR, INDICATOR_CAP, 1.0 / np.sqrt(np.maximum(ss, MISFIT_FLOOR)))


def indicator(z, k, data, sig):
    """Reciprocal L2 misfit between data at step ``k`` and a unit source at ``z``.

    ``k`` is a zero-based column of ``data.samples``. Returns
    :data:`INDICATOR_CAP` when the squared misfit is below
    :data:`MISFIT_FLOOR` (exact match).
    """
    z = np.reshape(np.asarray(z, dtype=float), (1, 3))
    r = distances(z, data.sensors.points)
    if np.any(r == 0.0):
        raise CoincidentPointError("sampling point coincides with a sensor", "z")
    ss = kernels.misfit_field(r, data.times[k], data.samples[:, k], data.c,
                              kernels.signal_params(sig))
    return float(_indicator_from_ss(ss)[0])


def _grid_distances(data, grid):
    """Grid-to-sensor distances and the flat indices of usable grid points.

    Grid points that coincide with a sensor (the kernel is singular there)
    are dropped from the scan with a warning.
    """
    check_sensor_geometry(data.sensors, grid, strict=False)
    rT = distances(grid.points(), data.sensors.points)
    keep = np.flatnonzero(np.all(rT > 0.0, axis=1))
    if len(keep) < grid.size:
        warnings.warn(f"{grid.size - len(keep)} grid point(s) coincide with a sensor and "
                      "are excluded from the scan", stacklevel=3)
        if not len(keep):
            raise CoincidentPointError("every grid point coincides with a sensor", "grid")
        rT = rT[keep]
    return np.ascontiguousarray(rT), keep


def indicator_field(data, grid, sig, k):
    """Indicator at every grid point for step ``k``, shaped like the grid."""
    rT, keep = _grid_distances(data, grid)
    ss = kernels.misfit_field(rT, data.times[k], data.samples[:, k], data.c,
                              kernels.signal_params(sig))
    out = np.zeros(grid.size)
    out[keep] = _indicator_from_ss(ss)
    return out.reshape(grid.shape)


@dataclass(frozen=True)
class TrajectoryEstimate:
    times: np.ndarray
    locations: np.ndarray
    indicator: np.ndarray
    repaired: np.ndarray
    grid_index: Optional[np.ndarray] = None

    def __post_init__(self):
        n = len(self.times)
        loc = np.asarray(self.locations, dtype=float)
        if loc.shape != (n, 3) or len(self.indicator) != n or len(self.repaired) != n:
            raise ValidationError("times, locations, indicator and repaired flags must "
                                  "have equal lengths", "estimate")
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "indicator", np.asarray(self.indicator, dtype=float))
        object.__setattr__(self, "repaired", np.asarray(self.repaired, dtype=bool))

    def __len__(self):
        return len(self.times)


def locate_per_step(data, grid, sig):
    """Grid point of maximal indicator at every time step.

    Ties go to the lowest flat grid index. Grid points sitting exactly on a
    sensor are skipped.
    """
    rT, keep = _grid_distances(data, grid)
    best, best_ss = kernels.misfit_scan(rT, data.times, data.samples, data.c,
                                        kernels.signal_params(sig), MISFIT_FLOOR)
    best = keep[best]
    n = len(best)
    return TrajectoryEstimate(data.times.copy(), grid.point_of(best),
                              _indicator_from_ss(best_ss), np.zeros(n, dtype=bool), best)


def repair_trajectory(est, sig, threshold=1e-4):
    """Refill steps whose signal value ``|lam(t_k)|`` is below ``threshold``.

    A silent first (last) step is linearly extrapolated from the next two
    (previous two) valid steps, an isolated silent interior step becomes the
    midpoint of its neighbours, and longer interior runs are linearly
    interpolated between the nearest valid steps.
    """
    n = len(est)
    if n < 3:
        raise ValidationError("need at least three steps", "estimate")
    invalid = np.abs(eval_signal(sig, est.times)) < threshold
    valid = np.flatnonzero(~invalid)
    if len(valid) < 2:
        raise ValidationError("fewer than two valid steps to repair from", "estimate")
    if not invalid.any():
        return est

    loc = est.locations.copy()
    idx = np.arange(n)
    for a in range(3):
        loc[invalid, a] = np.interp(idx[invalid], valid, est.locations[valid, a])
    v0, v1 = valid[0], valid[1]
    lead = idx[invalid & (idx < v0)]
    loc[lead] = est.locations[v0] + (lead - v0)[:, None] * (
        est.locations[v1] - est.locations[v0]) / (v1 - v0)
    w0, w1 = valid[-1], valid[-2]
    trail = idx[invalid & (idx > w0)]
    loc[trail] = est.locations[w0] + (trail - w0)[:, None] * (
        est.locations[w0] - est.locations[w1]) / (w0 - w1)
    return replace(est, locations=loc, repaired=est.repaired | invalid)


@dataclass(frozen=True)
class FourierModel:
    """``s(t) = a0 + sum_n a_n cos(2 pi n tau / P) + b_n sin(2 pi n tau / P)``
    with ``tau = t - offset``."""

    a0: np.ndarray
    a: np.ndarray  # (N, 3)
    b: np.ndarray  # (N, 3)
    period: float = 2 * np.pi
    offset: float = 0.0

    @property
    def order(self):
        return len(self.a)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        n = np.arange(1, self.order + 1)
        ph = 2 * np.pi * np.multiply.outer(t - self.offset, n) / self.period
        return self.a0 + np.cos(ph) @ self.a + np.sin(ph) @ self.b

    def to_rows(self):
        rows = [(0, *self.a0, 0.0, 0.0, 0.0)]
        rows += [(n + 1, *self.a[n], *self.b[n]) for n in range(self.order)]
        return rows


def _fourier_coeffs(points, phase_t, order, period):
    m = len(points)
    n = np.arange(1, order + 1)
    ph = 2 * np.pi * np.multiply.outer(n, phase_t) / period  # (N, m)
    a0 = points.sum(axis=0) / m
    a = 2.0 / m * (np.cos(ph) @ points)
    b = 2.0 / m * (np.sin(ph) @ points)
    return a0, a, b


def fourier_smooth(est, order, period=None):
    """Truncated Fourier series fitted to a full-period uniform sampling.

    ``period`` defaults to the last sample time, i.e. ``T`` for the standard
    time grid ``t_k = k T / N_T``.
    """
    m = len(est)
    if order < 0 or m < 2 * order + 1:
        raise ValidationError(f"need N_T >= 2N+1 samples (have {m}, order {order})",
                              "fourier.order")
    period = float(est.times[-1] if period is None else period)
    a0, a, b = _fourier_coeffs(est.locations, est.times, order, period)
    return FourierModel(a0, a, b, period)


def fit_segment(times, points, order):
    """Fourier model of an open stroke via its mirrored (even) extension.

    The ``m`` uniformly spaced samples are reflected to a ``2m``-periodic
    sequence so the periodic model has no jump at the stroke ends.
    """
    times = np.asarray(times, dtype=float)
    points = np.asarray(points, dtype=float)
    m = len(times)
    if m < 2 * order + 1:
        raise ValidationError("segment too short for the requested order", "fourier.order")
    dt = (times[-1] - times[0]) / (m - 1)
    ext = np.concatenate([points, points[::-1]])
    phase_t = (np.arange(2 * m) + 0.5) * dt
    period = 2 * m * dt
    a0, a, b = _fourier_coeffs(ext, phase_t, order, period)
    return FourierModel(a0, a, b, period, offset=times[0] - 0.5 * dt)


@dataclass(frozen=True)
class SegmentedTrajectory:
    segments: List[Tuple[int, int]]  # half-open index ranges
    models: List[Optional[FourierModel]]
    breaks: np.ndarray

    def __len__(self):
        return len(self.segments)


def segment_strokes(est, gap_threshold=0.3, order=3):
    """Split the estimate at jumps longer than ``gap_threshold``.

    An interior step is a break point when the distance to either neighbour
    exceeds the threshold. Maximal runs of non-break steps become segments;
    those with at least ``2 order + 1`` samples get a Fourier model, shorter
    ones keep ``None`` and are used as polylines.
    """
    loc = est.locations
    n = len(loc)
    step = np.linalg.norm(np.diff(loc, axis=0), axis=-1)
    breaks = np.zeros(n, dtype=bool)
    if n >= 3:
        breaks[1:-1] = np.maximum(step[:-1], step[1:]) > gap_threshold
    segments = []
    start = None
    for k in range(n + 1):
        if k < n and not breaks[k]:
            if start is None:
                start = k
        elif start is not None:
            segments.append((start, k))
            start = None
    models = []
    for s, e in segments:
        if e - s >= 2 * order + 1:
            models.append(fit_segment(est.times[s:e], loc[s:e], order))
        else:
            models.append(None)
    return SegmentedTrajectory(segments, models, breaks)


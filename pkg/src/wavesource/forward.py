"""Exact boundary data for stationary and moving point sources.

A stationary unit source radiating the causal signal ``lam`` produces

    u(x, t) = lam(t - |x - s| / c) / (4 pi |x - s|)

and several sources superpose linearly. For a source moving on ``s(t)``
with ``|v| < c`` the field is the retarded potential

    u(x, t) = lam(tau) / (4 pi R (1 - v(tau) . R_hat / c)),

with ``R = x - s(tau)`` and the emission time ``tau`` solving
``t - tau = |x - s(tau)| / c``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import MeasurementSet, distances, eval_signal
from .errors import CoincidentPointError, ConvergenceError, SuperluminalError, ValidationError


@dataclass(frozen=True)
class RetardedSolveParams:
    """Stopping rules for the emission-time solve.

    ``tolerance=None`` means ``1e-12 * max(1, T)`` where ``T`` is the latest
    observation time passed in.
    """

    tolerance: Optional[float] = None
    max_iter: int = 200

    def __post_init__(self):
        if self.tolerance is not None and not self.tolerance > 0:
            raise ValidationError("must be > 0", "retarded.tolerance")
        if self.max_iter < 1:
            raise ValidationError("must be >= 1", "retarded.max_iter")


def green_conv(x, t, z, sig, c):
    """Time-convolved Green kernel for a unit source at ``z``, observed at ``(x, t)``."""
    r = float(distances(np.reshape(x, (1, 3)), np.reshape(z, (1, 3)))[0, 0])
    if r == 0.0:
        raise CoincidentPointError("kernel is singular at coincident points", "x")
    return eval_signal(sig, t - r / c) / (4.0 * np.pi * r)


def synthesize_static(sources, sensors, timegrid, sig, c):
    """Sample the superposed field of ``sources`` at every sensor and time step."""
    if not c > 0:
        raise ValidationError("wave speed must be > 0", "physics.c")
    r = distances(sensors.points, sources.locations)  # (N_x, M)
    if np.any(r == 0.0):
        raise CoincidentPointError("a sensor coincides with a source", "sensors")
    t = timegrid.times
    u = np.zeros((len(sensors), len(t)))
    for j, a in enumerate(sources.intensities):
        rj = r[:, j : j + 1]
        u += a * eval_signal(sig, t[None, :] - rj / c) / (4.0 * np.pi * rj)
    return MeasurementSet(sensors, timegrid, float(c), u, provenance="static")


def max_speed(traj, times):
    ts = np.concatenate([[0.0], np.asarray(times, dtype=float)])
    return float(np.max(np.linalg.norm(traj.velocity(ts), axis=-1)))


def check_subluminal(traj, times, c):
    vmax = max_speed(traj, times)
    if not vmax < c:
        raise SuperluminalError(
            f"superluminal trajectory: sampled max speed {vmax:.6g} >= wave speed {c:.6g}")
    return vmax


def _residual(x, t, traj, c, tau):
    return t - tau - np.linalg.norm(x - traj.position(tau), axis=-1) / c


def solve_retarded(x, t, traj, c, params=None):
    """Vectorised emission-time solve.

    ``x`` has shape (..., 3) and ``t`` shape (...). Fixed-point iteration
    ``tau <- t - |x - s(tau)| / c`` from ``tau = t`` contracts with factor
    ``|v| / c``; entries still unconverged after ``max_iter`` sweeps are
    finished by bisection on ``[0, t]``. When the signal could only have left
    before the source started (``t < |x - s(0)| / c``) the returned value is
    ``t - |x - s(0)| / c < 0`` and the causal signal makes its contribution
    vanish.
    """
    params = params or RetardedSolveParams()
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    x, t = np.broadcast_arrays(x, t[..., None])
    shape = t.shape[:-1]
    x = x.reshape(-1, 3)
    t = t[..., 0].ravel()
    tol = params.tolerance
    if tol is None:
        tol = 1e-12 * max(1.0, float(np.max(t, initial=0.0)))

    early = t - np.linalg.norm(x - traj.position(np.zeros_like(t)), axis=-1) / c
    before_start = early < 0
    tau = t.copy()
    active = ~before_start
    for _ in range(params.max_iter):
        if not active.any():
            break
        new = t[active] - np.linalg.norm(x[active] - traj.position(tau[active]), axis=-1) / c
        done = np.abs(new - tau[active]) <= tol
        tau[active] = new
        idx = np.flatnonzero(active)
        active[idx[done]] = False

    if active.any():
        idx = np.flatnonzero(active)
        lo = np.zeros(len(idx))
        hi = t[idx].copy()
        xa, ta = x[idx], t[idx]
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            g = _residual(xa, ta, traj, c, mid)
            lo = np.where(g > 0, mid, lo)
            hi = np.where(g > 0, hi, mid)
            if np.all(hi - lo <= tol):
                break
        tau[idx] = 0.5 * (lo + hi)
        res = np.abs(_residual(xa, ta, traj, c, tau[idx]))
        if np.any(res > 10 * tol):
            raise ConvergenceError("retarded-time solve did not converge")

    tau[before_start] = early[before_start]
    return tau.reshape(shape)


def retarded_time(x, t, traj, c, params=None):
    """Emission time for a single observation point ``x`` and time ``t``."""
    return float(solve_retarded(np.asarray(x, dtype=float), float(t), traj, c, params))


def synthesize_moving(traj, sensors, timegrid, sig, c, params=None):
    """Retarded-potential data of a single source moving on ``traj``."""
    if not c > 0:
        raise ValidationError("wave speed must be > 0", "physics.c")
    t = timegrid.times
    check_subluminal(traj, t, c)
    X = np.broadcast_to(sensors.points[:, None, :], (len(sensors), len(t), 3))
    Tm = np.broadcast_to(t[None, :], (len(sensors), len(t)))
    tau = solve_retarded(X, Tm, traj, c, params)

    R = X - traj.position(np.maximum(tau, 0.0))
    dist = np.sqrt(np.einsum("...j,...j->...", R, R))
    if np.any(dist == 0.0):
        raise CoincidentPointError("a sensor lies on the trajectory", "sensors")
    doppler = 1.0 - np.einsum("...j,...j->...", traj.velocity(tau), R) / (c * dist)
    assert np.all(doppler > 0), "Doppler factor must stay positive for |v| < c"
    u = eval_signal(sig, tau) / (4.0 * np.pi * dist * doppler)
    return MeasurementSet(sensors, timegrid, float(c), u, provenance="moving")

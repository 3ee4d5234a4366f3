"""Reconstruction of stationary point sources.

Boundary data are expanded in time-convolved Green kernels anchored at the
points ``z_l`` of a sampling grid,

    sum_l c(z_l) (G * lam)(x_i, t_k; z_l) = u(x_i, t_k),

and the coefficients are fitted in the least-squares sense by conjugate
gradients on the normal equations. Sources show up as local maxima of
``c``; :func:`extract_peaks` turns the field into a list of locations with
intensities by summing coefficients over 3x3x3 neighbourhoods.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from . import kernels
from .core import SamplingGrid, distances
from .errors import CoincidentPointError, ValidationError

log = logging.getLogger(__name__)

DEFAULT_MEMORY_BUDGET = 1 << 30


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 2000
    tol: float = 1e-6
    tikhonov: float = 0.0
    intensity_threshold: float = 1.0
    isosurface_fraction: float = 0.7
    max_peaks: int = 100
    memory_budget: int = DEFAULT_MEMORY_BUDGET

    def __post_init__(self):
        if int(self.max_iter) != self.max_iter or self.max_iter < 1:
            raise ValidationError("must be an integer >= 1", "solver.max_iter")
        if not self.tol > 0:
            raise ValidationError("must be > 0", "solver.tol")
        if not self.tikhonov >= 0:
            raise ValidationError("must be >= 0", "solver.tikhonov")
        if not np.isfinite(self.intensity_threshold):
            raise ValidationError("must be finite", "solver.intensity_threshold")
        if not 0 < self.isosurface_fraction <= 1:
            raise ValidationError("must lie in (0, 1]", "solver.isosurface_fraction")
        if self.max_peaks < 1:
            raise ValidationError("must be >= 1", "solver.max_peaks")
        if self.memory_budget < 0:
            raise ValidationError("must be >= 0", "solver.memory_budget")


def check_sensor_geometry(sensors, grid, strict=True):
    """Reject sensors the sampling grid could put a kernel singularity on.

    With ``strict`` every sensor must lie outside the closed grid box.
    Otherwise only exact coincidence with a grid point is an error and
    sensors inside the box produce a warning.
    """
    inside = grid.contains(sensors.points)
    if strict and inside.any():
        raise ValidationError(
            f"{int(inside.sum())} sensor(s) inside the sampling grid box", "grid")
    if inside.any():
        warnings.warn(f"{int(inside.sum())} sensor(s) inside the sampling grid box",
                      stacklevel=3)


class KernelOperator:
    """Matrix-free kernel matrix ``A`` of shape ``(N_x * N_T, N_z)``.

    Row ``i * N_T + k`` belongs to sensor ``i`` and time ``t_k``. When the
    dense matrix fits in ``memory_budget`` bytes it is assembled once and
    products go through BLAS.
    """

    def __init__(self, sensors, timegrid, grid, sig, c, memory_budget=DEFAULT_MEMORY_BUDGET,
                 strict=True):
        check_sensor_geometry(sensors, grid, strict=strict)
        self.grid = grid
        self.c = float(c)
        self.times = timegrid.times
        self.nx, self.nt = len(sensors), timegrid.n_steps
        self.rT = np.ascontiguousarray(distances(grid.points(), sensors.points))
        if np.any(self.rT == 0.0):
            raise CoincidentPointError("a sensor coincides with a grid point", "grid")
        self.sig = kernels.signal_params(sig)
        self.shape = (self.nx * self.nt, grid.size)
        self._dense = None
        if self.shape[0] * self.shape[1] * 8 <= memory_budget:
            self._dense = kernels.assemble(self.rT, self.times, self.c, self.sig)

    @property
    def cached(self):
        return self._dense is not None

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        if self._dense is not None:
            return self._dense @ x
        return kernels.forward(self.rT, self.times, x, self.c, self.sig).ravel()

    def rmatvec(self, y):
        y = np.asarray(y, dtype=float)
        if self._dense is not None:
            return self._dense.T @ y
        return kernels.adjoint(self.rT, self.times, y.reshape(self.nx, self.nt), self.c,
                               self.sig)

    def dense(self):
        if self._dense is not None:
            return self._dense
        return kernels.assemble(self.rT, self.times, self.c, self.sig)


def forward_apply(coeffs, grid, sensors, timegrid, sig, c, memory_budget=0):
    """Predicted data ``A c`` as a flat vector of length ``N_x * N_T``."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (grid.size,):
        raise ValidationError(f"expected {grid.size} coefficients, got {coeffs.shape}",
                              "coeffs")
    op = KernelOperator(sensors, timegrid, grid, sig, c, memory_budget)
    return op.matvec(coeffs)


def adjoint_apply(residual, grid, sensors, timegrid, sig, c, memory_budget=0):
    """Transpose product ``A^T r`` of length ``N_z``."""
    residual = np.asarray(residual, dtype=float).ravel()
    if residual.shape != (len(sensors) * timegrid.n_steps,):
        raise ValidationError("residual length must be N_x * N_T", "residual")
    op = KernelOperator(sensors, timegrid, grid, sig, c, memory_budget)
    return op.rmatvec(residual)


@dataclass
class SolverReport:
    iterations: int
    relative_normal_residual: float
    relative_residual: float
    converged: bool
    zero_data: bool = False
    normal_trace: List[float] = field(default_factory=list)
    residual_trace: List[float] = field(default_factory=list)

    def to_dict(self):
        return {"iterations": int(self.iterations),
                "relative_normal_residual": float(self.relative_normal_residual),
                "relative_residual": float(self.relative_residual),
                "converged": bool(self.converged), "zero_data": bool(self.zero_data)}


@dataclass(frozen=True)
class CoefficientField:
    grid: SamplingGrid
    values: np.ndarray
    report: Optional[SolverReport] = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValidationError("one value per grid point required", "values")
        if not np.all(np.isfinite(v)):
            raise ValidationError("values must be finite", "values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def as_array(self):
        return self.values.reshape(self.grid.shape)


def cgnr(op, u, opts=None):
    """Minimise ``|A c - u|^2 + alpha |c|^2`` by CG on the normal equations.

    Starts from zero and stops once ``|A^T (u - A c) - alpha c| <= tol |A^T u|``
    or after ``max_iter`` iterations.
    """
    opts = opts or SolverOptions()
    u = np.asarray(u, dtype=float).ravel()
    if not np.all(np.isfinite(u)):
        raise ValidationError("data must be finite", "samples")
    alpha = opts.tikhonov
    n = op.shape[1]
    x = np.zeros(n)
    b = op.rmatvec(u)
    bnorm = float(np.linalg.norm(b))
    unorm = float(np.linalg.norm(u))
    if bnorm == 0.0:
        return x, SolverReport(0, 0.0, 0.0 if unorm == 0 else 1.0, True, zero_data=True)

    r = u.copy()
    s = b.copy()
    p = s.copy()
    gamma = bnorm ** 2
    normal_trace = [1.0]
    residual_trace = [1.0]
    converged = False
    it = 0
    for it in range(1, opts.max_iter + 1):
        q = op.matvec(p)
        delta = q @ q + alpha * (p @ p)
        if delta <= 0:
            break
        step = gamma / delta
        x += step * p
        r -= step * q
        s = op.rmatvec(r) - alpha * x
        gamma_new = float(s @ s)
        normal_trace.append(np.sqrt(gamma_new) / bnorm)
        residual_trace.append(float(np.linalg.norm(r)) / unorm)
        if normal_trace[-1] <= opts.tol:
            converged = True
            break
        p = s + (gamma_new / gamma) * p
        gamma = gamma_new
    log.debug("cgnr: %d iterations, normal residual %.3e", it, normal_trace[-1])
    return x, SolverReport(it, normal_trace[-1], residual_trace[-1], converged,
                           normal_trace=normal_trace, residual_trace=residual_trace)


def cgnr_solve(data, grid, sig, opts=None):
    """Fit grid coefficients to ``data`` by CGNR."""
    opts = opts or SolverOptions()
    op = KernelOperator(data.sensors, data.timegrid, grid, sig, data.c, opts.memory_budget)
    x, report = cgnr(op, data.samples, opts)
    return CoefficientField(grid, x, report)


@dataclass(frozen=True)
class Peak:
    ijk: Tuple[int, int, int]
    location: np.ndarray
    intensity: float


@dataclass(frozen=True)
class PeakReport:
    peaks: List[Peak]
    termination: str
    isosurface: np.ndarray  # flat grid indices with c >= fraction * max(c)

    def __len__(self):
        return len(self.peaks)

    @property
    def locations(self):
        return np.array([p.location for p in self.peaks]).reshape(-1, 3)

    @property
    def intensities(self):
        return np.array([p.intensity for p in self.peaks])


def _box(ijk, shape):
    return tuple(slice(max(i - 1, 0), min(i + 2, n)) for i, n in zip(ijk, shape))


def extract_peaks(cfield, opts=None):
    """Greedy peak picking with 3x3x3 intensity aggregation.

    Repeatedly takes the global maximum of a working copy (lowest flat index
    on ties), sums the clipped 3x3x3 neighbourhood, and stops when that sum
    falls below ``opts.intensity_threshold``. Accepted neighbourhoods are
    zeroed before the next search.
    """
    opts = opts or SolverOptions()
    grid = cfield.grid
    C = cfield.as_array().copy()
    peaks = []
    termination = "threshold"
    while True:
        if len(peaks) >= opts.max_peaks:
            termination = "max-count"
            break
        flat = int(np.argmax(C))
        ijk = tuple(int(v) for v in np.unravel_index(flat, grid.shape))
        box = _box(ijk, grid.shape)
        total = float(C[box].sum())
        if total < opts.intensity_threshold:
            break
        peaks.append(Peak(ijk, grid.point_of(flat), total))
        C[box] = 0.0

    vmax = cfield.values.max()
    iso = (np.flatnonzero(cfield.values >= opts.isosurface_fraction * vmax)
           if vmax > 0 else np.array([], dtype=int))
    return PeakReport(peaks, termination, iso)


def local_maxima(cfield):
    """Flat indices of cells strictly above every existing 26-neighbour."""
    C = cfield.as_array()
    padded = np.pad(C, 1, constant_values=-np.inf)
    is_max = np.ones(C.shape, dtype=bool)
    n1, n2, n3 = C.shape
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            for dk in (-1, 0, 1):
                if di == dj == dk == 0:
                    continue
                nb = padded[1 + di:1 + di + n1, 1 + dj:1 + dj + n2, 1 + dk:1 + dk + n3]
                is_max &= C > nb
    return np.flatnonzero(is_max)

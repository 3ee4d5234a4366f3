import numpy as np
import pytest

from wavesource.core import SamplingGrid, SensorArray, StaticSourceSet, TimeGrid
from wavesource.errors import ValidationError
from wavesource.forward import green_conv, synthesize_static
from wavesource.invstatic import (
    CoefficientField,
    KernelOperator,
    SolverOptions,
    adjoint_apply,
    cgnr,
    cgnr_solve,
    check_sensor_geometry,
    extract_peaks,
    forward_apply,
    local_maxima,
)


@pytest.fixture
def op(sig, small_sensors, timegrid, tiny_grid):
    return KernelOperator(small_sensors, timegrid, tiny_grid, sig, 1.0)


def _oracle_matrix(sensors, timegrid, grid, sig, c):
    pts = grid.points()
    rows = []
    for x in sensors.points:
        for t in timegrid.times:
            rows.append([green_conv(x, t, z, sig, c) for z in pts])
    return np.array(rows)


def test_dense_matches_pointwise_oracle(op, sig, small_sensors, timegrid, tiny_grid):
    A = _oracle_matrix(small_sensors, timegrid, tiny_grid, sig, 1.0)
    np.testing.assert_allclose(op.dense(), A, rtol=1e-13, atol=1e-17)


def test_matrix_free_equals_cached(sig, small_sensors, timegrid, tiny_grid, rng):
    cached = KernelOperator(small_sensors, timegrid, tiny_grid, sig, 1.0)
    free = KernelOperator(small_sensors, timegrid, tiny_grid, sig, 1.0, memory_budget=0)
    assert cached.cached and not free.cached
    x = rng.standard_normal(tiny_grid.size)
    y = rng.standard_normal(cached.shape[0])
    np.testing.assert_allclose(free.matvec(x), cached.matvec(x), rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(free.rmatvec(y), cached.rmatvec(y), rtol=1e-12, atol=1e-15)


def test_adjoint_identity(sig, small_sensors, timegrid, rng):
    grid = SamplingGrid.cube(1.5, 5)
    x = rng.standard_normal(grid.size)
    y = rng.standard_normal(len(small_sensors) * timegrid.n_steps)
    Ax = forward_apply(x, grid, small_sensors, timegrid, sig, 1.0)
    ATy = adjoint_apply(y, grid, small_sensors, timegrid, sig, 1.0)
    lhs, rhs = Ax @ y, x @ ATy
    assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))


def test_forward_apply_is_superposition(sig, small_sensors, timegrid, tiny_grid):
    coeffs = np.zeros(tiny_grid.size)
    coeffs[[4, 13]] = [1.0, 2.5]
    pts = tiny_grid.points()
    data = synthesize_static(StaticSourceSet(pts[[4, 13]], [1.0, 2.5]), small_sensors,
                             timegrid, sig, 1.0)
    np.testing.assert_allclose(forward_apply(coeffs, tiny_grid, small_sensors, timegrid, sig, 1.0),
                               data.samples.ravel(), rtol=1e-13, atol=1e-17)


def test_cgnr_matches_lstsq(op, rng):
    u = rng.standard_normal(op.shape[0])
    x, rep = cgnr(op, u, SolverOptions(tol=1e-13, max_iter=2000))
    ref = np.linalg.lstsq(op.dense(), u, rcond=None)[0]
    assert rep.converged
    assert np.linalg.norm(x - ref) <= 1e-6 * np.linalg.norm(ref)


def test_cgnr_tikhonov(op, rng):
    u = rng.standard_normal(op.shape[0])
    alpha = 1e-3
    x, _ = cgnr(op, u, SolverOptions(tol=1e-13, tikhonov=alpha))
    A = op.dense()
    ref = np.linalg.solve(A.T @ A + alpha * np.eye(A.shape[1]), A.T @ u)
    np.testing.assert_allclose(x, ref, rtol=1e-7)


def test_cgnr_residual_monotone(op, rng):
    u = rng.standard_normal(op.shape[0])
    _, rep = cgnr(op, u, SolverOptions(tol=1e-10))
    assert np.all(np.diff(rep.residual_trace) <= 1e-13)


def test_cgnr_zero_data(op):
    x, rep = cgnr(op, np.zeros(op.shape[0]))
    assert rep.zero_data and rep.iterations == 0
    assert not x.any()


def test_cgnr_rejects_nonfinite(op):
    u = np.zeros(op.shape[0])
    u[3] = np.nan
    with pytest.raises(ValidationError):
        cgnr(op, u)


def test_exact_recovery_on_grid(sig, sensors, timegrid):
    """Sources on grid points of a coarse grid are recovered exactly."""
    grid = SamplingGrid.cube(1.0, 3)
    pts = grid.points()
    data = synthesize_static(StaticSourceSet(pts[[0, 14]], [1.0, 2.0]), sensors, timegrid,
                             sig, 1.0)
    field = cgnr_solve(data, grid, sig, SolverOptions(tol=1e-12))
    expect = np.zeros(grid.size)
    expect[[0, 14]] = [1.0, 2.0]
    np.testing.assert_allclose(field.values, expect, atol=1e-6)


def test_sensor_inside_box_rejected(sig, timegrid):
    sensors = SensorArray([[0.5, 0, 0], [0, 0, 5]])
    with pytest.raises(ValidationError, match="grid"):
        check_sensor_geometry(sensors, SamplingGrid.cube(1.0, 3))
    with pytest.warns(UserWarning):
        check_sensor_geometry(sensors, SamplingGrid.cube(1.0, 3), strict=False)


@pytest.mark.parametrize("kw", [{"max_iter": 0}, {"tol": 0.0}, {"tikhonov": -1.0},
                                {"isosurface_fraction": 1.5}, {"memory_budget": -1}])
def test_solver_options_validated(kw):
    with pytest.raises(ValidationError):
        SolverOptions(**kw)


class TestPeaks:
    grid = SamplingGrid.cube(1.0, 5)

    def _field(self, entries):
        v = np.zeros(self.grid.shape)
        for ijk, val in entries.items():
            v[ijk] = val
        return CoefficientField(self.grid, v.ravel())

    def test_aggregation_and_order(self):
        f = self._field({(1, 1, 1): 2.0, (1, 1, 2): 0.5, (3, 3, 3): 1.2})
        rep = extract_peaks(f, SolverOptions(intensity_threshold=1.0))
        assert [p.ijk for p in rep.peaks] == [(1, 1, 1), (3, 3, 3)]
        assert rep.intensities == pytest.approx([2.5, 1.2])
        np.testing.assert_allclose(rep.locations[0], [-0.5, -0.5, -0.5])
        assert rep.termination == "threshold"

    def test_boundary_clipping(self):
        f = self._field({(0, 0, 0): 1.0, (1, 1, 1): 1.0, (0, 1, 0): 1.0})
        rep = extract_peaks(f, SolverOptions(intensity_threshold=0.5))
        assert len(rep) == 1 and rep.intensities[0] == pytest.approx(3.0)

    def test_ties_lowest_index(self):
        f = self._field({(3, 3, 3): 1.0, (0, 0, 4): 1.0})
        rep = extract_peaks(f, SolverOptions(intensity_threshold=0.5))
        assert rep.peaks[0].ijk == (0, 0, 4)

    def test_zero_field_gives_empty_report(self):
        rep = extract_peaks(CoefficientField(self.grid, np.zeros(self.grid.size)))
        assert len(rep) == 0 and len(rep.isosurface) == 0

    def test_max_count(self):
        f = self._field({(0, 0, 0): 2.0, (4, 4, 4): 2.0})
        rep = extract_peaks(f, SolverOptions(max_peaks=1))
        assert len(rep) == 1 and rep.termination == "max-count"

    def test_isosurface(self):
        f = self._field({(2, 2, 2): 1.0, (2, 2, 3): 0.75, (0, 0, 0): 0.5})
        rep = extract_peaks(f)
        assert sorted(rep.isosurface) == sorted(self.grid.index_of([(2, 2, 2), (2, 2, 3)]))

    def test_local_maxima(self):
        f = self._field({(2, 2, 2): 1.0, (2, 2, 3): 0.5, (0, 0, 0): 0.3, (4, 4, 4): -1.0})
        got = set(local_maxima(f).tolist())
        assert self.grid.index_of((2, 2, 2)) in got
        assert self.grid.index_of((0, 0, 0)) in got
        assert self.grid.index_of((2, 2, 3)) not in got

    def test_plateau_is_not_strict_max(self):
        f = self._field({(2, 2, 2): 1.0, (2, 2, 3): 1.0})
        assert not set(local_maxima(f).tolist()) & set(self.grid.index_of([(2, 2, 2), (2, 2, 3)]))

"""Reconstruction of stationary and moving acoustic point sources from
time-domain boundary measurements."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    MeasurementSet,
    SamplingGrid,
    SensorArray,
    Signal,
    StaticSourceSet,
    TimeGrid,
    Trajectory,
    add_noise,
    sphere_sensors,
)
from .errors import NumericalError, ValidationError, WaveSourceError  # noqa: E402
from .forward import synthesize_moving, synthesize_static  # noqa: E402
from .invmoving import (  # noqa: E402
    fourier_smooth,
    locate_per_step,
    repair_trajectory,
    segment_strokes,
)
from .invstatic import SolverOptions, cgnr_solve, extract_peaks  # noqa: E402

__all__ = [
    "MeasurementSet", "SamplingGrid", "SensorArray", "Signal", "StaticSourceSet",
    "TimeGrid", "Trajectory", "add_noise", "sphere_sensors",
    "NumericalError", "ValidationError", "WaveSourceError",
    "synthesize_moving", "synthesize_static",
    "fourier_smooth", "locate_per_step", "repair_trajectory", "segment_strokes",
    "SolverOptions", "cgnr_solve", "extract_peaks",
]

"""Backend selection for the Green-kernel loops.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``WAVESOURCE_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy fallback is used. Both expose ``forward``,
``adjoint``, ``assemble``, ``misfit_scan`` and ``misfit_field``.
"""

import os

import numpy as np

from . import _pykernels

if os.environ.get("WAVESOURCE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND

_nthreads = 1


def set_num_threads(n):
    """Thread count for the compiled loops; results do not depend on it."""
    global _nthreads
    if int(n) < 1:
        raise ValueError("thread count must be >= 1")
    _nthreads = int(n)


def get_num_threads():
    return _nthreads


def signal_params(sig):
    """Flatten a :class:`~wavesource.core.Signal` for the kernel loops."""
    if sig.kind == "gaussian_sine":
        dummy = np.zeros(1)
        return (0, sig.omega, sig.center, sig.decay, dummy, dummy)
    return (1, 0.0, 0.0, 0.0, np.asarray(sig.times, dtype=float),
            np.asarray(sig.values, dtype=float))


def _f(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def forward(rT, times, coeffs, c, sig, impl=None):
    return (impl or _impl).forward(_f(rT), _f(times), _f(coeffs), float(c), sig, _nthreads)


def adjoint(rT, times, resid, c, sig, impl=None):
    return (impl or _impl).adjoint(_f(rT), _f(times), _f(resid), float(c), sig, _nthreads)


def assemble(rT, times, c, sig, impl=None):
    return (impl or _impl).assemble(_f(rT), _f(times), float(c), sig, _nthreads)


def misfit_scan(rT, times, data, c, sig, floor, impl=None):
    return (impl or _impl).misfit_scan(_f(rT), _f(times), _f(data), float(c), sig,
                                       float(floor), _nthreads)


def misfit_field(rT, t, ucol, c, sig, impl=None):
    return (impl or _impl).misfit_field(_f(rT), float(t), _f(ucol), float(c), sig, _nthreads)

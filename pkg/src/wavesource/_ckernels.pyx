# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Green-kernel loops.

Same call signatures as ``_pykernels``. Distances arrive as ``rT`` with
shape (N_z, N_x); the signal as ``(kind, omega, center, decay, tab_t,
tab_v)`` with kind 0 = gaussian sine, 1 = tabulated. Every output entry is
a sum accumulated in fixed order by a single thread, so results do not
depend on the thread count.
"""

import numpy as np
from cython.parallel cimport prange
from libc.math cimport sin, exp, M_PI

BACKEND = "cython"


cdef inline double _sig(double t, int kind, double w, double tc, double a,
                        const double[::1] tt, const double[::1] tv) noexcept nogil:
    cdef Py_ssize_t lo, hi, mid, n
    cdef double x
    if t < 0:
        return 0.0
    if kind == 0:
        x = t - tc
        return sin(w * t) * exp(-a * (x * x))
    n = tt.shape[0]
    if t < tt[0] or t > tt[n - 1]:
        return 0.0
    if t == tt[n - 1]:
        return tv[n - 1]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        mid = (lo + hi) >> 1
        if tt[mid] <= t:
            lo = mid
        else:
            hi = mid
    return (tv[lo + 1] - tv[lo]) / (tt[lo + 1] - tt[lo]) * (t - tt[lo]) + tv[lo]


def _unpack(sig):
    kind, w, tc, a, tt, tv = sig
    return (int(kind), float(w), float(tc), float(a),
            np.ascontiguousarray(tt, dtype=np.float64),
            np.ascontiguousarray(tv, dtype=np.float64))


def forward(const double[:, ::1] rT, const double[::1] times, const double[::1] coeffs,
            double c, sig, int nthreads=1):
    cdef int kind
    cdef double w, tc, a
    kind, w, tc, a, tt_arr, tv_arr = _unpack(sig)
    cdef const double[::1] tt = tt_arr
    cdef const double[::1] tv = tv_arr
    cdef Py_ssize_t nz = rT.shape[0], nx = rT.shape[1], nt = times.shape[0]
    out_arr = np.zeros((nx, nt))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, l, k
    cdef double r, amp
    for i in prange(nx, nogil=True, num_threads=nthreads, schedule="static"):
        for l in range(nz):
            if coeffs[l] == 0.0:
                continue
            r = rT[l, i]
            amp = coeffs[l] / (4.0 * M_PI * r)
            for k in range(nt):
                out[i, k] += amp * _sig(times[k] - r / c, kind, w, tc, a, tt, tv)
    return out_arr


def adjoint(const double[:, ::1] rT, const double[::1] times, const double[:, ::1] resid,
            double c, sig, int nthreads=1):
    cdef int kind
    cdef double w, tc, a
    kind, w, tc, a, tt_arr, tv_arr = _unpack(sig)
    cdef const double[::1] tt = tt_arr
    cdef const double[::1] tv = tv_arr
    cdef Py_ssize_t nz = rT.shape[0], nx = rT.shape[1], nt = times.shape[0]
    out_arr = np.zeros(nz)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, l, k
    cdef double r, acc, part
    for l in prange(nz, nogil=True, num_threads=nthreads, schedule="static"):
        acc = 0.0
        for i in range(nx):
            r = rT[l, i]
            part = 0.0
            for k in range(nt):
                part = part + _sig(times[k] - r / c, kind, w, tc, a, tt, tv) * resid[i, k]
            acc = acc + part / (4.0 * M_PI * r)
        out[l] = acc
    return out_arr


def assemble(const double[:, ::1] rT, const double[::1] times, double c, sig,
             int nthreads=1):
    """Dense kernel, rows ordered ``i * N_T + k``."""
    cdef int kind
    cdef double w, tc, a
    kind, w, tc, a, tt_arr, tv_arr = _unpack(sig)
    cdef const double[::1] tt = tt_arr
    cdef const double[::1] tv = tv_arr
    cdef Py_ssize_t nz = rT.shape[0], nx = rT.shape[1], nt = times.shape[0]
    A_arr = np.empty((nx * nt, nz))
    cdef double[:, ::1] A = A_arr
    cdef Py_ssize_t i, l, k
    cdef double r, amp
    for l in prange(nz, nogil=True, num_threads=nthreads, schedule="static"):
        for i in range(nx):
            r = rT[l, i]
            amp = 1.0 / (4.0 * M_PI * r)
            for k in range(nt):
                A[i * nt + k, l] = amp * _sig(times[k] - r / c, kind, w, tc, a, tt, tv)
    return A_arr


def misfit_scan(const double[:, ::1] rT, const double[::1] times, const double[:, ::1] data,
                double c, sig, double floor, int nthreads=1):
    """Per time step, the grid index minimising the squared misfit.

    Squared misfits below ``floor`` are clamped to ``floor``; ties go to the
    lowest index.
    """
    cdef int kind
    cdef double w, tc, a
    kind, w, tc, a, tt_arr, tv_arr = _unpack(sig)
    cdef const double[::1] tt = tt_arr
    cdef const double[::1] tv = tv_arr
    cdef Py_ssize_t nz = rT.shape[0], nx = rT.shape[1], nt = times.shape[0]
    best_arr = np.zeros(nt, dtype=np.int64)
    best_ss_arr = np.zeros(nt)
    cdef long long[::1] best = best_arr
    cdef double[::1] best_ss = best_ss_arr
    cdef Py_ssize_t i, l, k, arg
    cdef double r, d, ss, cur, t
    for k in prange(nt, nogil=True, num_threads=nthreads, schedule="dynamic"):
        t = times[k]
        cur = 1e308
        arg = 0
        for l in range(nz):
            ss = 0.0
            for i in range(nx):
                r = rT[l, i]
                d = _sig(t - r / c, kind, w, tc, a, tt, tv) / (4.0 * M_PI * r) - data[i, k]
                ss = ss + d * d
            if ss < floor:
                ss = floor
            if ss < cur:
                cur = ss
                arg = l
        best[k] = arg
        best_ss[k] = cur
    return best_arr, best_ss_arr


def misfit_field(const double[:, ::1] rT, double t, const double[::1] ucol, double c, sig,
                 int nthreads=1):
    """Squared misfit at every grid point for a single time ``t``."""
    cdef int kind
    cdef double w, tc, a
    kind, w, tc, a, tt_arr, tv_arr = _unpack(sig)
    cdef const double[::1] tt = tt_arr
    cdef const double[::1] tv = tv_arr
    cdef Py_ssize_t nz = rT.shape[0], nx = rT.shape[1]
    out_arr = np.empty(nz)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, l
    cdef double r, d, ss
    for l in prange(nz, nogil=True, num_threads=nthreads, schedule="static"):
        ss = 0.0
        for i in range(nx):
            r = rT[l, i]
            d = _sig(t - r / c, kind, w, tc, a, tt, tv) / (4.0 * M_PI * r) - ucol[i]
            ss = ss + d * d
        out[l] = ss
    return out_arr

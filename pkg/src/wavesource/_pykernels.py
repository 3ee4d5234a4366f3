"""Pure numpy implementation of the Green-kernel loops.

Drop-in replacement for the compiled ``_ckernels`` module; selected by
:mod:`wavesource.kernels` when the extension is missing or
``WAVESOURCE_PURE_PYTHON=1``. Work is chunked over grid points to bound the
size of temporaries.
"""

import numpy as np

BACKEND = "python"

_CHUNK_ELEMS = 1 << 22


def _sig(t, sig):
    kind, w, tc, a, tt, tv = sig
    if kind == 0:
        x = t - tc
        val = np.sin(w * t) * np.exp(-a * (x * x))
    else:
        val = np.interp(t, tt, tv, left=0.0, right=0.0)
    return np.where(t < 0, 0.0, val)


def _chunks(nz, per_point):
    step = max(1, _CHUNK_ELEMS // max(per_point, 1))
    for s in range(0, nz, step):
        yield slice(s, min(s + step, nz))


def _block(rT, times, c, sig):
    # (chunk, nx, nt) kernel values
    r = rT[:, :, None]
    return _sig(times[None, None, :] - r / c, sig) / (4.0 * np.pi * r)


def forward(rT, times, coeffs, c, sig, nthreads=1):
    nz, nx = rT.shape
    out = np.zeros((nx, len(times)))
    nzmask = np.flatnonzero(coeffs)
    for sl in _chunks(len(nzmask), nx * len(times)):
        idx = nzmask[sl]
        out += np.einsum("l,lik->ik", coeffs[idx], _block(rT[idx], times, c, sig))
    return out


def adjoint(rT, times, resid, c, sig, nthreads=1):
    nz, nx = rT.shape
    out = np.empty(nz)
    for sl in _chunks(nz, nx * len(times)):
        out[sl] = np.einsum("lik,ik->l", _block(rT[sl], times, c, sig), resid)
    return out


def assemble(rT, times, c, sig, nthreads=1):
    nz, nx = rT.shape
    nt = len(times)
    A = np.empty((nx * nt, nz))
    for sl in _chunks(nz, nx * nt):
        A[:, sl] = _block(rT[sl], times, c, sig).reshape(-1, nx * nt).T
    return A


def misfit_field(rT, t, ucol, c, sig, nthreads=1):
    r = rT
    d = _sig(t - r / c, sig) / (4.0 * np.pi * r) - ucol[None, :]
    return np.einsum("li,li->l", d, d)


def misfit_scan(rT, times, data, c, sig, floor, nthreads=1):
    nt = len(times)
    best = np.zeros(nt, dtype=np.int64)
    best_ss = np.zeros(nt)
    for k in range(nt):
        ss = np.maximum(misfit_field(rT, times[k], data[:, k], c, sig), floor)
        best[k] = np.argmin(ss)
        best_ss[k] = ss[best[k]]
    return best, best_ss

"""Hot loop of the first-order integrator: a linear recurrence along t.

For every frequency line ``l`` the scan computes

    forward:   w[0] = 0,     w[m+1] = a[l] * w[m] + inc[l, m]
    backward:  w[T-1] = 0,   w[m]   = a[l] * w[m+1] + inc[l, m]

The compiled kernel is used when numba imports and ``SIMPLECHAR_NO_NUMBA``
is unset (or "0"); otherwise a numpy loop over t vectorized across lines.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLED = os.environ.get("SIMPLECHAR_NO_NUMBA", "").strip() not in ("", "0")

try:
    if _DISABLED:
        raise ImportError
    # the bundled TBB is too old for numba and only produces a warning
    os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def scan_numpy(a, inc, forward):
    a = np.asarray(a, dtype=complex)
    inc = np.asarray(inc, dtype=complex)
    forward = np.asarray(forward, dtype=bool)
    L, T = inc.shape
    out = np.zeros((L, T), dtype=complex)
    if forward.any():
        f = forward
        af, incf = a[f], inc[f]
        acc = np.zeros(af.shape, dtype=complex)
        cols = np.empty((af.shape[0], T), dtype=complex)
        cols[:, 0] = 0
        for m in range(T - 1):
            acc = af * acc + incf[:, m]
            cols[:, m + 1] = acc
        out[f] = cols
    if (~forward).any():
        b = ~forward
        ab, incb = a[b], inc[b]
        acc = np.zeros(ab.shape, dtype=complex)
        cols = np.empty((ab.shape[0], T), dtype=complex)
        cols[:, T - 1] = 0
        for m in range(T - 2, -1, -1):
            acc = ab * acc + incb[:, m]
            cols[:, m] = acc
        out[b] = cols
    return out


if HAVE_NUMBA:

    @njit(parallel=True, cache=True)
    def _scan_nb(a, inc, forward, out):
        L, T = inc.shape
        for l in prange(L):
            acc = 0j
            if forward[l]:
                out[l, 0] = 0j
                for m in range(T - 1):
                    acc = a[l] * acc + inc[l, m]
                    out[l, m + 1] = acc
            else:
                out[l, T - 1] = 0j
                for m in range(T - 2, -1, -1):
                    acc = a[l] * acc + inc[l, m]
                    out[l, m] = acc

    def scan_numba(a, inc, forward):
        a = np.ascontiguousarray(a, dtype=np.complex128)
        inc = np.ascontiguousarray(inc, dtype=np.complex128)
        forward = np.ascontiguousarray(forward, dtype=np.bool_)
        out = np.empty(inc.shape, dtype=np.complex128)
        _scan_nb(a, inc, forward, out)
        return out

    def set_threads(n):
        if n:
            numba.set_num_threads(min(int(n), numba.config.NUMBA_NUM_THREADS))

    scan = scan_numba
    BACKEND = "numba"
else:
    scan_numba = None

    def set_threads(n):
        return None

    scan = scan_numpy
    BACKEND = "numpy"

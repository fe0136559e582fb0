"""Inner-loop kernels with a numba path and a pure-numpy fallback.

The numba implementations are used when numba imports cleanly and the
environment variable ``MPICSEL_DISABLE_NUMBA`` is unset (or ``0``).  Both
variants are always importable under ``*_numba`` / ``*_numpy`` names so tests
and ``benchmarks/bench_kernels.py`` can compare them directly.

Kernels
-------
cholesky_lower(a, floor)
    Lower Cholesky factor of a symmetric matrix.  Returns ``(L, fail)`` where
    ``fail`` is ``-1`` on success, otherwise the first column whose pivot
    fell to ``floor[j]`` or below (the numpy path reports 0 when LAPACK
    itself rejects the matrix).
ar1_filter(a, rho)
    Row-wise AR(1) whitening of every column of ``a``: row 0 is copied, row
    ``t`` becomes ``(a[t] - rho * a[t-1]) / sqrt(1 - rho**2)``.
lag1_sums(e)
    Pooled lag-1 cross product and lagged sum of squares over all columns.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = [
    "BACKEND",
    "cholesky_lower",
    "ar1_filter",
    "lag1_sums",
    "cholesky_lower_numpy",
    "ar1_filter_numpy",
    "lag1_sums_numpy",
    "cholesky_lower_numba",
    "ar1_filter_numba",
    "lag1_sums_numba",
    "HAVE_NUMBA",
]


# ---------------------------------------------------------------------------
# numpy fallback
# ---------------------------------------------------------------------------

def cholesky_lower_numpy(a, floor):
    a = np.ascontiguousarray(a, dtype=np.float64)
    floor = np.asarray(floor, dtype=np.float64)
    try:
        L = np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return np.zeros_like(a), 0 if a.shape[0] else -1
    piv = np.diag(L) ** 2
    bad = np.flatnonzero(~(piv > floor))
    if bad.size:
        return L, int(bad[0])
    return L, -1


def ar1_filter_numpy(a, rho):
    a = np.asarray(a, dtype=np.float64)
    out = np.empty_like(a)
    s = np.sqrt(1.0 - rho * rho)
    out[0] = a[0]
    out[1:] = (a[1:] - rho * a[:-1]) / s
    return out


def lag1_sums_numpy(e):
    e = np.asarray(e, dtype=np.float64)
    num = float(np.sum(e[1:] * e[:-1]))
    den = float(np.sum(e[:-1] * e[:-1]))
    return num, den


# ---------------------------------------------------------------------------
# numba
# ---------------------------------------------------------------------------

try:
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


if HAVE_NUMBA:

    @njit(nogil=True, cache=True)
    def _cholesky_lower_nb(a, floor):
        m = a.shape[0]
        L = np.zeros((m, m))
        for j in range(m):
            d = a[j, j]
            for c in range(j):
                d -= L[j, c] * L[j, c]
            if not (d > floor[j]):
                return L, j
            ljj = np.sqrt(d)
            L[j, j] = ljj
            for i in range(j + 1, m):
                s = a[i, j]
                for c in range(j):
                    s -= L[i, c] * L[j, c]
                L[i, j] = s / ljj
        return L, -1

    @njit(nogil=True, cache=True)
    def _ar1_filter_nb(a, rho):
        n, m = a.shape
        out = np.empty((n, m))
        s = np.sqrt(1.0 - rho * rho)
        for c in range(m):
            out[0, c] = a[0, c]
        for t in range(1, n):
            for c in range(m):
                out[t, c] = (a[t, c] - rho * a[t - 1, c]) / s
        return out

    @njit(nogil=True, cache=True)
    def _lag1_sums_nb(e):
        n, m = e.shape
        num = 0.0
        den = 0.0
        for t in range(1, n):
            for c in range(m):
                num += e[t, c] * e[t - 1, c]
                den += e[t - 1, c] * e[t - 1, c]
        return num, den

    def cholesky_lower_numba(a, floor):
        L, fail = _cholesky_lower_nb(
            np.ascontiguousarray(a, dtype=np.float64),
            np.ascontiguousarray(floor, dtype=np.float64),
        )
        return L, int(fail)

    def ar1_filter_numba(a, rho):
        a = np.asarray(a, dtype=np.float64)
        if a.ndim == 1:
            return _ar1_filter_nb(np.ascontiguousarray(a[:, None]), float(rho))[:, 0]
        return _ar1_filter_nb(np.ascontiguousarray(a), float(rho))

    def lag1_sums_numba(e):
        e = np.asarray(e, dtype=np.float64)
        if e.ndim == 1:
            e = e[:, None]
        num, den = _lag1_sums_nb(np.ascontiguousarray(e))
        return float(num), float(den)

else:  # pragma: no cover
    cholesky_lower_numba = cholesky_lower_numpy
    ar1_filter_numba = ar1_filter_numpy
    lag1_sums_numba = lag1_sums_numpy


def _numba_enabled() -> bool:
    flag = os.environ.get("MPICSEL_DISABLE_NUMBA", "").strip().lower()
    return HAVE_NUMBA and flag in ("", "0", "false", "no")


if _numba_enabled():
    BACKEND = "numba"
    cholesky_lower = cholesky_lower_numba
    ar1_filter = ar1_filter_numba
    lag1_sums = lag1_sums_numba
else:
    BACKEND = "numpy"
    cholesky_lower = cholesky_lower_numpy
    ar1_filter = ar1_filter_numpy
    lag1_sums = lag1_sums_numpy

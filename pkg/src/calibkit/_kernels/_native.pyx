# cython: language_level=3
"""Compiled twins of the kernels in ``_fallback``.

Arithmetic is ordered exactly as in the fallback so both backends produce
bitwise-identical results; see _fallback.py for the contracts.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def sweep_counts(const double[::1] scores_desc,
                 const long long[::1] labels_desc):
    cdef Py_ssize_t n = scores_desc.shape[0]
    cdef Py_ssize_t i, m, k
    if n == 0:
        empty_f = np.empty(0, dtype=np.float64)
        empty_i = np.empty(0, dtype=np.int64)
        return empty_f, empty_i, empty_i.copy()

    m = 1
    for i in range(n - 1):
        if scores_desc[i] != scores_desc[i + 1]:
            m += 1

    thresholds = np.empty(m, dtype=np.float64)
    tp = np.empty(m, dtype=np.int64)
    fp = np.empty(m, dtype=np.int64)
    cdef double[::1] thr_v = thresholds
    cdef long long[::1] tp_v = tp
    cdef long long[::1] fp_v = fp

    cdef long long tp_run = 0
    k = 0
    for i in range(n):
        tp_run += labels_desc[i]
        if i == n - 1 or scores_desc[i] != scores_desc[i + 1]:
            thr_v[k] = scores_desc[i]
            tp_v[k] = tp_run
            fp_v[k] = (i + 1) - tp_run
            k += 1
    return thresholds, tp, fp


def bin_accumulate(const double[::1] scores, const double[::1] wa,
                   const double[::1] wb, const double[::1] edges):
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t nbins = edges.shape[0] - 1
    cdef Py_ssize_t i, lo, hi, mid

    counts = np.zeros(nbins, dtype=np.int64)
    sum_a = np.zeros(nbins, dtype=np.float64)
    sum_b = np.zeros(nbins, dtype=np.float64)
    cdef long long[::1] counts_v = counts
    cdef double[::1] sa_v = sum_a
    cdef double[::1] sb_v = sum_b
    cdef double s

    for i in range(n):
        s = scores[i]
        lo = 0
        hi = nbins + 1
        while lo < hi:
            mid = (lo + hi) // 2
            if edges[mid] < s:
                lo = mid + 1
            else:
                hi = mid
        lo -= 1
        if lo < 0:
            lo = 0
        elif lo > nbins - 1:
            lo = nbins - 1
        counts_v[lo] += 1
        sa_v[lo] += wa[i]
        sb_v[lo] += wb[i]
    return counts, sum_a, sum_b


def natural_spline_basis(const double[::1] x, const double[::1] knots):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nk = knots.shape[0]
    cdef Py_ssize_t i, j

    out = np.empty((n, nk), dtype=np.float64)
    cdef double[:, ::1] out_v = out
    cdef double last = knots[nk - 1]
    cdef double penult = knots[nk - 2]
    cdef double t, xi, cube_last, cube_penult, cube, d_penult

    for i in range(n):
        xi = x[i]
        out_v[i, 0] = 1.0
        out_v[i, 1] = xi

        t = xi - last
        cube_last = (t * t) * t if t > 0.0 else 0.0

        t = xi - penult
        cube_penult = (t * t) * t if t > 0.0 else 0.0
        d_penult = (cube_penult - cube_last) / (last - penult)

        for j in range(nk - 2):
            t = xi - knots[j]
            cube = (t * t) * t if t > 0.0 else 0.0
            out_v[i, j + 2] = (cube - cube_last) / (last - knots[j]) - d_penult
    return out

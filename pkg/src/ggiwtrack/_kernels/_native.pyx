# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled event-accumulation kernels (see _fallback.py for the reference)."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def assignment_loglik_sums(const int[:, ::1] assign, const double[:, ::1] loglik):
    cdef Py_ssize_t n_events = assign.shape[0]
    cdef Py_ssize_t m = assign.shape[1]
    out = np.zeros(n_events, dtype=np.float64)
    cdef double[::1] o = out
    cdef Py_ssize_t l, j
    cdef int a
    cdef double s
    with nogil:
        for l in range(n_events):
            s = 0.0
            for j in range(m):
                a = assign[l, j]
                if a > 0:
                    s += loglik[a - 1, j]
            o[l] = s
    return out


def event_stats(const int[:, ::1] assign, const double[:, ::1] points, int n_targets):
    cdef Py_ssize_t n_events = assign.shape[0]
    cdef Py_ssize_t m = assign.shape[1]
    counts = np.zeros((n_events, n_targets + 1), dtype=np.float64)
    sy = np.zeros((n_events, n_targets, 2), dtype=np.float64)
    syy = np.zeros((n_events, n_targets, 3), dtype=np.float64)
    cdef double[:, ::1] c = counts
    cdef double[:, :, ::1] s1 = sy
    cdef double[:, :, ::1] s2 = syy
    cdef Py_ssize_t l, j
    cdef int a
    cdef double x, y
    with nogil:
        for l in range(n_events):
            for j in range(m):
                a = assign[l, j]
                c[l, a] += 1.0
                if a > 0:
                    x = points[j, 0]
                    y = points[j, 1]
                    s1[l, a - 1, 0] += x
                    s1[l, a - 1, 1] += y
                    s2[l, a - 1, 0] += x * x
                    s2[l, a - 1, 1] += x * y
                    s2[l, a - 1, 2] += y * y
    return counts, sy, syy

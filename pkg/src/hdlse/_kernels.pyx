# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled scoring kernels.

Same contract as ``hdlse._fallback``. A pass value that does not exceed the
largest mean over the other points leaves the threshold at ``l`` times that
maximum, so its count is looked up once; only larger pass values need a
binary search over the sorted means.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport log, INFINITY
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline Py_ssize_t _count_above(const double[::1] s, double t) noexcept nogil:
    # number of sorted entries strictly greater than t
    cdef Py_ssize_t lo = 0, hi = s.shape[0], mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if s[mid] <= t:
            lo = mid + 1
        else:
            hi = mid
    return s.shape[0] - lo


cdef inline void _insertion_sort(long long *a, Py_ssize_t m) noexcept nogil:
    # near-constant runs are the common case, where this is linear
    cdef Py_ssize_t i, k
    cdef long long x
    for i in range(1, m):
        x = a[i]
        k = i - 1
        while k >= 0 and a[k] > x:
            a[k + 1] = a[k]
            k -= 1
        a[k + 1] = x


def explicit_counts(passes, double h):
    cdef const double[:, ::1] p = np.ascontiguousarray(passes, dtype=np.float64)
    cdef Py_ssize_t m = p.shape[0], n = p.shape[1], i, j
    out = np.zeros(n, dtype=np.int64)
    cdef long long[::1] c = out
    cdef const double *row
    with nogil:
        for j in range(m):
            row = &p[j, 0]
            for i in range(n):
                c[i] += row[i] > h
    return out


def top_two(mu):
    cdef const double[::1] v = np.ascontiguousarray(mu, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], i, arg = 0
    cdef double best = -INFINITY, second = -INFINITY
    for i in range(n):
        if v[i] > best:
            second = best
            best = v[i]
            arg = i
        elif v[i] > second:
            second = v[i]
    return best, arg, second


cdef struct _Field:
    double best
    double second
    Py_ssize_t arg
    double l
    Py_ssize_t count_best    # entries of mu above l * best
    Py_ssize_t count_second  # entries of mu above l * second


cdef inline Py_ssize_t _q(_Field *f, const double[::1] s, double mu_i, Py_ssize_t i,
                          double v, double *t_out) noexcept nogil:
    cdef double other, t
    cdef Py_ssize_t above
    if i == f.arg:
        other = f.second
        above = f.count_second
    else:
        other = f.best
        above = f.count_best
    if v > other:
        t = f.l * v
        above = _count_above(s, t)
    else:
        t = f.l * other
    t_out[0] = t
    return above - (mu_i > t) + (v > t)


cdef _Field _field(const double[::1] s, mu, double l):
    cdef _Field f
    best, arg, second = top_two(mu)
    f.best = best
    f.second = second
    f.arg = arg
    f.l = l
    f.count_best = _count_above(s, l * f.best)
    f.count_second = _count_above(s, l * f.second)
    return f


def implicit_q(passes, mu, double l):
    cdef const double[:, ::1] p = np.ascontiguousarray(passes, dtype=np.float64)
    cdef const double[::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[::1] s = np.sort(mv)
    cdef Py_ssize_t m = p.shape[0], n = p.shape[1], i, j
    cdef _Field f = _field(s, mv, l)
    q_out = np.empty((m, n), dtype=np.int64)
    tau_out = np.empty((m, n), dtype=np.float64)
    cdef long long[:, ::1] q = q_out
    cdef double[:, ::1] tau = tau_out
    with nogil:
        for j in range(m):
            for i in range(n):
                q[j, i] = _q(&f, s, mv[i], i, p[j, i], &tau[j, i])
    return q_out, tau_out


def implicit_scores(passes, mu, double l):
    cdef const double[:, ::1] p = np.ascontiguousarray(passes, dtype=np.float64)
    cdef const double[::1] mv = np.ascontiguousarray(mu, dtype=np.float64)
    cdef const double[::1] s = np.sort(mv)
    cdef Py_ssize_t m = p.shape[0], n = p.shape[1], i, j, run
    cdef _Field f = _field(s, mv, l)
    cdef double v, t, tmax, gap, pr, h
    ent_out = np.empty(n, dtype=np.float64)
    tie_out = np.empty(n, dtype=np.int64)
    cdef double[::1] ent = ent_out
    cdef long long[::1] tie = tie_out
    cdef long long *buf = <long long *> malloc(m * sizeof(long long))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for i in range(n):
                tmax = -INFINITY
                gap = INFINITY
                for j in range(m):
                    v = p[j, i]
                    buf[j] = _q(&f, s, mv[i], i, v, &t)
                    if t > tmax:
                        tmax = t
                    if v - t < gap:
                        gap = v - t
                _insertion_sort(buf, m)
                h = 0.0
                run = 1
                for j in range(1, m + 1):
                    if j < m and buf[j] == buf[j - 1]:
                        run += 1
                    else:
                        pr = <double> run / m
                        h -= pr * log(pr)
                        run = 1
                ent[i] = h
                tie[i] = _count_above(s, tmax) - (mv[i] > tmax) + (gap > 0)
    finally:
        free(buf)
    return ent_out, tie_out

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled oracle scan kernel; mirrors ``ssmatch._pykernel.greedy_scan``."""

from libc.math cimport log, floor, INFINITY

cdef double CLASS_SLACK = 1e-9


def greedy_scan(const long long[::1] us, const long long[::1] vs, const double[::1] ws,
                const double[::1] y, unsigned char[::1] matched,
                long long[::1] out_u, long long[::1] out_v, double[::1] out_w,
                Py_ssize_t count, double lam, bint weighted, double wscale,
                double log_base, long long max_class, const double[::1] class_weights):
    cdef Py_ssize_t i, m = us.shape[0]
    cdef Py_ssize_t n_adm = 0
    cdef long long u, v, idx
    cdef double wt, wn, c, min_ratio = INFINITY
    for i in range(m):
        u = us[i]
        v = vs[i]
        if weighted:
            wn = ws[i] / wscale
            if wn <= 0:
                continue
            idx = <long long>floor(log(1.0 / wn) / log_base + CLASS_SLACK)
            if idx < 0:
                idx = 0
            if idx > max_class:
                continue
            wt = class_weights[idx]
        else:
            wt = 1.0
        c = (y[u] + y[v]) / wt
        if c < min_ratio:
            min_ratio = c
        if c <= lam:
            n_adm += 1
            if matched[u] == 0 and matched[v] == 0:
                matched[u] = 1
                matched[v] = 1
                out_u[count] = u
                out_v[count] = v
                out_w[count] = wt
                count += 1
    return count, min_ratio, n_adm

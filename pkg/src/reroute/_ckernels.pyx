# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see _pykernels.py for the reference semantics."""

import numpy as np
cimport numpy as cnp
from libc.math cimport isnan, NAN

cnp.import_array()


def route_index(group, src, dst, amount_out, amount_in, Py_ssize_t n_groups, Py_ssize_t n_nodes,
                int exporter, int importer):
    cdef const cnp.int64_t[:] g = np.ascontiguousarray(group, dtype=np.int64)
    cdef const cnp.int32_t[:] s = np.ascontiguousarray(src, dtype=np.int32)
    cdef const cnp.int32_t[:] t = np.ascontiguousarray(dst, dtype=np.int32)
    cdef const double[:] a_out = np.ascontiguousarray(amount_out, dtype=np.float64)
    cdef const double[:] a_in = np.ascontiguousarray(amount_in, dtype=np.float64)

    legs_out_arr = np.full((n_groups, n_nodes), np.nan)
    legs_in_arr = np.full((n_groups, n_nodes), np.nan)
    out_arr = np.zeros(n_groups)
    cdef double[:, ::1] legs_out = legs_out_arr
    cdef double[:, ::1] legs_in = legs_in_arr
    cdef double[::1] out = out_arr

    cdef Py_ssize_t r, k, gi
    cdef Py_ssize_t n = g.shape[0]
    cdef int si, ti
    cdef double term, acc

    with nogil:
        for r in range(n):
            si = s[r]
            ti = t[r]
            if si == exporter and ti != importer and ti != exporter:
                legs_out[g[r], ti] = a_out[r]
            elif ti == importer and si != exporter and si != importer:
                legs_in[g[r], si] = a_in[r]
        for gi in range(n_groups):
            acc = 0.0
            for k in range(n_nodes):
                term = legs_out[gi, k] + legs_in[gi, k]
                if not isnan(term):
                    acc += term
            out[gi] = acc
    return out_arr


def within_moments(entity, y, d, Py_ssize_t n_entities):
    cdef const cnp.int64_t[:] e = np.ascontiguousarray(entity, dtype=np.int64)
    cdef const double[:] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[:] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t n = e.shape[0]

    counts_arr = np.zeros(n_entities)
    ybar_arr = np.zeros(n_entities)
    dbar_arr = np.zeros(n_entities)
    cdef double[::1] counts = counts_arr
    cdef double[::1] ybar = ybar_arr
    cdef double[::1] dbar = dbar_arr

    cdef Py_ssize_t r, c
    cdef double sxx = 0.0, sxy = 0.0, rss = 0.0, beta, yt, dt, res
    cdef Py_ssize_t n_active = 0

    with nogil:
        for r in range(n):
            c = e[r]
            counts[c] += 1.0
            ybar[c] += yv[r]
            dbar[c] += dv[r]
        for c in range(n_entities):
            if counts[c] > 0:
                ybar[c] /= counts[c]
                dbar[c] /= counts[c]
                n_active += 1
        for r in range(n):
            c = e[r]
            dt = dv[r] - dbar[c]
            yt = yv[r] - ybar[c]
            sxx += dt * dt
            sxy += dt * yt
        beta = sxy / sxx if sxx > 0 else 0.0
        for r in range(n):
            c = e[r]
            res = (yv[r] - ybar[c]) - beta * (dv[r] - dbar[c])
            rss += res * res
    return sxx, sxy, rss, n_active

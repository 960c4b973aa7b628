# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled scan kernels; same contract as multiscan.kernels.pure."""

from libc.math cimport log, sqrt

import numpy as np

BACKEND = "ext"

cdef double NEG_INF = -np.inf
cdef double POS_INF = np.inf


def prefix_sums_batch(values):
    values = np.ascontiguousarray(values, dtype=np.float64)
    cdef const double[:, ::1] v = values
    cdef Py_ssize_t r = v.shape[0], n = v.shape[1]
    out_arr = np.empty((r, n + 1), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, t
    cdef long double acc
    with nogil:
        for i in range(r):
            acc = 0.0
            out[i, 0] = 0.0
            for t in range(n):
                acc = acc + v[i, t]
                out[i, t + 1] = <double> acc
    return out_arr


def prefix_sums(values):
    return prefix_sums_batch(np.atleast_2d(values))[0]


def prefix_table_2d(grid):
    return prefix_table_2d_batch(np.asarray(grid)[None, :, :])[0]


def prefix_table_2d_batch(grids):
    grids = np.ascontiguousarray(grids, dtype=np.float64)
    cdef const double[:, :, ::1] g = grids
    cdef Py_ssize_t r = g.shape[0], n1 = g.shape[1], n2 = g.shape[2]
    out_arr = np.zeros((r, n1 + 1, n2 + 1), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    col_arr = np.zeros(n2, dtype=np.longdouble)
    cdef long double[::1] col = col_arr
    cdef Py_ssize_t i, a, b
    cdef long double acc
    with nogil:
        for i in range(r):
            for b in range(n2):
                col[b] = 0.0
            for a in range(n1):
                acc = 0.0
                for b in range(n2):
                    # col holds the column-wise cumsum; acc the row scan of it
                    col[b] = col[b] + g[i, a, b]
                    acc = acc + col[b]
                    out[i, a + 1, b + 1] = <double> acc
    return out_arr


def window_stats(ps, j0, k, isw):
    cdef const double[::1] p = ps
    cdef const long[::1] a = j0, b = k
    cdef const double[::1] w = isw
    cdef Py_ssize_t nw = a.shape[0], i
    out_arr = np.empty(nw, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(nw):
            out[i] = (p[b[i]] - p[a[i]]) * w[i]
    return out_arr


def scan_reduce(ps, j0, k, isw, thr):
    """One-dataset scan reduction: (max, tie indices, exceeder indices, stats).

    Single streaming pass for the maximum, its tie count and the exceedance
    count; a second pass materializes the (usually tiny) tie and exceeder
    sets only when present.
    """
    cdef const double[::1] p = ps
    cdef const long[::1] a = j0, b = k
    cdef const double[::1] w = isw, t = thr
    cdef Py_ssize_t nw = a.shape[0], i, nt = 0, ne = 0
    cdef double best = NEG_INF, v
    with nogil:
        for i in range(nw):
            v = (p[b[i]] - p[a[i]]) * w[i]
            if v > best:
                best = v
                nt = 1
            elif v == best:
                nt += 1
            if v > t[i]:
                ne += 1
    ties_arr = np.empty(nt, dtype=np.int64)
    exc_arr = np.empty(ne, dtype=np.int64)
    stats_arr = np.empty(ne, dtype=np.float64)
    cdef long[::1] ties = ties_arr
    cdef long[::1] exc = exc_arr
    cdef double[::1] st = stats_arr
    cdef Py_ssize_t it = 0, ie = 0
    with nogil:
        for i in range(nw):
            v = (p[b[i]] - p[a[i]]) * w[i]
            if v == best:
                ties[it] = i
                it += 1
            if v > t[i]:
                exc[ie] = i
                st[ie] = v
                ie += 1
    return float(best), ties_arr, exc_arr, stats_arr


def max_excess(ps, j0, k, isw, offset):
    cdef const double[:, ::1] p = ps
    cdef const long[::1] a = j0, b = k
    cdef const double[::1] w = isw, off = offset
    cdef Py_ssize_t r = p.shape[0], nw = a.shape[0], i, t
    out_arr = np.empty(r, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double best, v
    with nogil:
        for i in range(r):
            best = NEG_INF
            for t in range(nw):
                v = (p[i, b[t]] - p[i, a[t]]) * w[t] - off[t]
                if v > best:
                    best = v
            out[i] = best
    return out_arr


def block_max(ps, j0, k, isw, bounds):
    cdef const double[:, ::1] p = ps
    cdef const long[::1] a = j0, b = k, bd = bounds
    cdef const double[::1] w = isw
    cdef Py_ssize_t r = p.shape[0], nb = bd.shape[0] - 1, i, t, blk
    out_arr = np.empty((r, nb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double best, v
    with nogil:
        for i in range(r):
            for blk in range(nb):
                best = NEG_INF
                for t in range(bd[blk], bd[blk + 1]):
                    v = (p[i, b[t]] - p[i, a[t]]) * w[t]
                    if v > best:
                        best = v
                out[i, blk] = best
    return out_arr


cdef inline double _dens_stat(const double* pts, double nn, long n, long j, long k) nogil:
    cdef double p = pts[k - 1] - pts[j - 1]
    cdef double m = <double> (k - j + 1)
    cdef double t, q
    if p <= 0.0:
        return 0.0
    if m <= nn * p:
        return 0.0
    t = m * log(m / (nn * p))
    if (k - j + 1) < n:
        q = 1.0 - p
        if q <= 0.0:
            return POS_INF
        t = t + (nn - m) * log((nn - m) / (nn * q))
    return sqrt(2.0 * t)


def density_stats(pts, j, k):
    cdef const double[::1] p = pts
    cdef const long[::1] jj = j, kk = k
    cdef long n = p.shape[0]
    cdef double nn = <double> n
    cdef Py_ssize_t nw = jj.shape[0], i
    out_arr = np.empty(nw, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(nw):
            out[i] = _dens_stat(&p[0], nn, n, jj[i], kk[i])
    return out_arr


def density_max_excess(pts, j, k, offset):
    cdef const double[:, ::1] p = pts
    cdef const long[::1] jj = j, kk = k
    cdef const double[::1] off = offset
    cdef long n = p.shape[1]
    cdef double nn = <double> n
    cdef Py_ssize_t r = p.shape[0], nw = jj.shape[0], i, t
    out_arr = np.empty(r, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double best, v
    with nogil:
        for i in range(r):
            best = NEG_INF
            for t in range(nw):
                v = _dens_stat(&p[i, 0], nn, n, jj[t], kk[t]) - off[t]
                if v > best:
                    best = v
            out[i] = best
    return out_arr


def density_block_max(pts, j, k, bounds):
    cdef const double[:, ::1] p = pts
    cdef const long[::1] jj = j, kk = k, bd = bounds
    cdef long n = p.shape[1]
    cdef double nn = <double> n
    cdef Py_ssize_t r = p.shape[0], nb = bd.shape[0] - 1, i, t, blk
    out_arr = np.empty((r, nb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double best, v
    with nogil:
        for i in range(r):
            for blk in range(nb):
                best = NEG_INF
                for t in range(bd[blk], bd[blk + 1]):
                    v = _dens_stat(&p[i, 0], nn, n, jj[t], kk[t])
                    if v > best:
                        best = v
                out[i, blk] = best
    return out_arr


def rect_stats(pt, j0a, ka, j0b, kb, isw):
    cdef const double[:, ::1] p = pt
    cdef const long[::1] a0 = j0a, a1 = ka, b0 = j0b, b1 = kb
    cdef const double[::1] w = isw
    cdef Py_ssize_t nw = a0.shape[0], i
    out_arr = np.empty(nw, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(nw):
            out[i] = (p[a1[i], b1[i]] - p[a0[i], b1[i]]
                      - p[a1[i], b0[i]] + p[a0[i], b0[i]]) * w[i]
    return out_arr


def rect_max_excess(pt, j0a, ka, j0b, kb, isw, offset):
    cdef const double[:, :, ::1] p = pt
    cdef const long[::1] a0 = j0a, a1 = ka, b0 = j0b, b1 = kb
    cdef const double[::1] w = isw, off = offset
    cdef Py_ssize_t r = p.shape[0], nw = a0.shape[0], i, t
    out_arr = np.empty(r, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double best, v
    with nogil:
        for i in range(r):
            best = NEG_INF
            for t in range(nw):
                v = (p[i, a1[t], b1[t]] - p[i, a0[t], b1[t]]
                     - p[i, a1[t], b0[t]] + p[i, a0[t], b0[t]]) * w[t] - off[t]
                if v > best:
                    best = v
            out[i] = best
    return out_arr


def rect_block_max(pt, j0a, ka, j0b, kb, isw, bounds):
    cdef const double[:, :, ::1] p = pt
    cdef const long[::1] a0 = j0a, a1 = ka, b0 = j0b, b1 = kb, bd = bounds
    cdef const double[::1] w = isw
    cdef Py_ssize_t r = p.shape[0], nb = bd.shape[0] - 1, i, t, blk
    out_arr = np.empty((r, nb), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double best, v
    with nogil:
        for i in range(r):
            for blk in range(nb):
                best = NEG_INF
                for t in range(bd[blk], bd[blk + 1]):
                    v = (p[i, a1[t], b1[t]] - p[i, a0[t], b1[t]]
                         - p[i, a1[t], b0[t]] + p[i, a0[t], b0[t]]) * w[t]
                    if v > best:
                        best = v
                out[i, blk] = best
    return out_arr

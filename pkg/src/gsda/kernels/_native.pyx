# cython: boundscheck=False, wraparound=False, cdivision=True
# cython: language_level=3
"""Compiled hot-loop kernels.

Semantics (including first-occurrence tie-breaks) must stay in lockstep
with gsda.kernels._numpy; the parity test suite compares both backends.
"""

from libc.math cimport INFINITY

import numpy as np


def nearest_sqdist(a, b):
    d2, idx = nearest_sqdist_batch(
        np.ascontiguousarray(a, dtype=np.float64)[None],
        np.ascontiguousarray(b, dtype=np.float64)[None],
    )
    return d2[0], idx[0]


def nearest_sqdist_batch(object a_in, object b_in):
    a_arr = np.ascontiguousarray(a_in, dtype=np.float64)
    b_arr = np.ascontiguousarray(b_in, dtype=np.float64)
    cdef double[:, :, ::1] a = a_arr
    cdef double[:, :, ::1] b = b_arr
    cdef Py_ssize_t nb = a.shape[0], m = a.shape[1], n = b.shape[1]
    d2_arr = np.empty((nb, m), dtype=np.float64)
    idx_arr = np.empty((nb, m), dtype=np.int64)
    cdef double[:, ::1] d2 = d2_arr
    cdef long long[:, ::1] idx = idx_arr
    cdef Py_ssize_t bi, i, j, best_j
    cdef double ax, ay, az, dx, dy, dz, dist, best
    with nogil:
        for bi in range(nb):
            for i in range(m):
                ax = a[bi, i, 0]
                ay = a[bi, i, 1]
                az = a[bi, i, 2]
                best = INFINITY
                best_j = 0
                for j in range(n):
                    dx = b[bi, j, 0] - ax
                    dy = b[bi, j, 1] - ay
                    dz = b[bi, j, 2] - az
                    dist = dx * dx + dy * dy + dz * dz
                    if dist < best:
                        best = dist
                        best_j = j
                d2[bi, i] = best
                idx[bi, i] = best_j
    return d2_arr, idx_arr


def maxpool_forward(object h_in):
    h_arr = np.ascontiguousarray(h_in, dtype=np.float64)
    cdef double[:, :, ::1] h = h_arr
    cdef Py_ssize_t nb = h.shape[0], n = h.shape[1], f = h.shape[2]
    out_arr = np.empty((nb, f), dtype=np.float64)
    am_arr = np.zeros((nb, f), dtype=np.int64)
    cdef double[:, ::1] out = out_arr
    cdef long long[:, ::1] am = am_arr
    cdef Py_ssize_t bi, i, k
    cdef double v
    with nogil:
        for bi in range(nb):
            for k in range(f):
                out[bi, k] = h[bi, 0, k]
            for i in range(1, n):
                for k in range(f):
                    v = h[bi, i, k]
                    if v > out[bi, k]:
                        out[bi, k] = v
                        am[bi, k] = i
    return out_arr, am_arr


def pool_backward_matmul(object dpool_in, object argmax_in, object wt_in, Py_ssize_t n):
    dpool_arr = np.ascontiguousarray(dpool_in, dtype=np.float64)
    am_arr = np.ascontiguousarray(argmax_in, dtype=np.int64)
    wt_arr = np.ascontiguousarray(wt_in, dtype=np.float64)
    cdef double[:, ::1] dpool = dpool_arr
    cdef long long[:, ::1] am = am_arr
    cdef double[:, ::1] wt = wt_arr
    cdef Py_ssize_t nb = dpool.shape[0], f = dpool.shape[1], fprev = wt.shape[1]
    out_arr = np.zeros((nb, n, fprev), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t bi, k, j, row
    cdef double val
    with nogil:
        for bi in range(nb):
            for k in range(f):
                val = dpool[bi, k]
                if val != 0.0:
                    row = am[bi, k]
                    for j in range(fprev):
                        out[bi, row, j] += val * wt[k, j]
    return out_arr

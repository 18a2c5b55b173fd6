# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled Tanimoto kernels on packed fingerprints.

Mirrors :mod:`genbo._tanimoto_py` exactly; see that module for the contracts.
"""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t

cnp.import_array()

cdef extern from *:
    int __builtin_popcountll(unsigned long long) nogil


def intersection_counts(const uint64_t[:, ::1] a, const uint64_t[:, ::1] b):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], words = a.shape[1]
    cdef Py_ssize_t i, j, k
    cdef int64_t acc
    if b.shape[1] != words:
        raise ValueError("packed word counts differ")
    out = np.empty((n, m), dtype=np.int64)
    cdef int64_t[:, ::1] o = out
    with nogil:
        for i in range(n):
            for j in range(m):
                acc = 0
                for k in range(words):
                    acc += __builtin_popcountll(a[i, k] & b[j, k])
                o[i, j] = acc
    return out


def pair_tanimoto(
    const int64_t[:, ::1] sx,
    const int64_t[:, ::1] sw,
    const int64_t[::1] cx,
    const int64_t[::1] cw,
    const int64_t[::1] ax,
    const int64_t[::1] aw,
    const int64_t[::1] bx,
    const int64_t[::1] bw,
):
    cdef Py_ssize_t n = ax.shape[0], m = bx.shape[0]
    cdef Py_ssize_t i, j
    cdef int64_t inter, union, na
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            na = cx[ax[i]] + cw[aw[i]]
            for j in range(m):
                inter = sx[ax[i], bx[j]] + sw[aw[i], bw[j]]
                union = na + cx[bx[j]] + cw[bw[j]] - inter
                if union == 0:
                    o[i, j] = 0.0
                else:
                    o[i, j] = <double>inter / <double>union
    return out

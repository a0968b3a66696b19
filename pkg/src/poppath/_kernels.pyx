# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory scan kernels; see ``_kernels_py`` for the reference."""
import numpy as np
cimport numpy as cnp

ctypedef long long i64


def find_windows(const i64[:] flat, const i64[:] offsets, i64 source, i64 destination):
    cdef Py_ssize_t t, i, lo, hi, next_d
    cdef Py_ssize_t n_traj = offsets.shape[0] - 1
    out = []
    for t in range(n_traj):
        lo = offsets[t]
        hi = offsets[t + 1]
        next_d = -1
        found = []
        for i in range(hi - 1, lo - 1, -1):
            if flat[i] == source and next_d >= 0:
                found.append((i, next_d + 1))
            if flat[i] == destination:
                next_d = i
        found.reverse()
        out.extend(found)
    return out


def precedence_matrix(const i64[:] dense, const i64[:] offsets, Py_ssize_t n):
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] arr = np.zeros((n, n), dtype=np.uint8)
    cdef cnp.uint8_t[:, :] m = arr
    cdef Py_ssize_t t, i, j, lo, hi, a, b
    cdef Py_ssize_t n_traj = offsets.shape[0] - 1
    for t in range(n_traj):
        lo = offsets[t]
        hi = offsets[t + 1]
        for i in range(lo, hi):
            a = dense[i]
            for j in range(i + 1, hi):
                b = dense[j]
                if a != b:
                    m[a, b] = 1
    return arr


def pair_counts(const i64[:] dense, const i64[:] offsets, Py_ssize_t n):
    cdef cnp.ndarray[cnp.int64_t, ndim=2] seg_arr = np.zeros((n, n), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] poi_arr = np.zeros(n, dtype=np.int64)
    cdef cnp.int64_t[:, :] seg = seg_arr
    cdef cnp.int64_t[:] poi = poi_arr
    cdef Py_ssize_t t, i, lo, hi
    cdef Py_ssize_t n_traj = offsets.shape[0] - 1
    for t in range(n_traj):
        lo = offsets[t]
        hi = offsets[t + 1]
        for i in range(lo, hi):
            poi[dense[i]] += 1
            if i > lo:
                seg[dense[i - 1], dense[i]] += 1
    return seg_arr, poi_arr

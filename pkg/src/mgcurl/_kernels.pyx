# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: grouped block gather/GEMM/scatter and the CSR residual."""
import numpy as np

from scipy.linalg.cython_blas cimport dgemm

DEF CHUNK = 512


def accumulate_blocks(double[::1] out, const double[::1] r, const long[:, ::1] idx,
                      const double[:, :, ::1] ops, const long[::1] group_ptr):
    """out[idx[b]] += ops[g] @ r[idx[b]] for blocks b in group g.

    Blocks of group g occupy rows group_ptr[g]:group_ptr[g+1] of idx.
    """
    cdef int s = <int> idx.shape[1]
    cdef Py_ssize_t ngroups = group_ptr.shape[0] - 1
    cdef Py_ssize_t g, lo, hi, c0, c1, b, i
    cdef int nblk
    cdef double one = 1.0, zero = 0.0
    cdef char transa = b'T', transb = b'N'
    if s == 0:
        return
    if ops.shape[0] != ngroups or ops.shape[1] != s or ops.shape[2] != s:
        raise ValueError("block operator shape does not match index shape")
    cdef double[:, ::1] gathered = np.empty((CHUNK, s))
    cdef double[:, ::1] local = np.empty((CHUNK, s))
    with nogil:
        for g in range(ngroups):
            lo = group_ptr[g]
            hi = group_ptr[g + 1]
            c0 = lo
            while c0 < hi:
                c1 = c0 + CHUNK
                if c1 > hi:
                    c1 = hi
                nblk = <int> (c1 - c0)
                for b in range(nblk):
                    for i in range(s):
                        gathered[b, i] = r[idx[c0 + b, i]]
                # column-major view: local^T (s x nblk) = ops[g] (s x s) @ gathered^T
                dgemm(&transa, &transb, &s, &nblk, &s, &one, <double*> &ops[g, 0, 0], &s,
                      &gathered[0, 0], &s, &zero, &local[0, 0], &s)
                for b in range(nblk):
                    for i in range(s):
                        out[idx[c0 + b, i]] += local[b, i]
                c0 = c1


def csr_residual(double[::1] out, const double[::1] g, const int[::1] indptr,
                 const int[::1] indices, const double[::1] data, const double[::1] z):
    """out = g - A z for A in CSR form."""
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, p
    cdef double acc
    with nogil:
        for i in range(n):
            acc = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                acc = acc + data[p] * z[indices[p]]
            out[i] = g[i] - acc

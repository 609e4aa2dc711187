# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled subsystem kernels.

Both kernels act on a batch of column vectors ``vecs`` of shape (D, C).  The
target subsystems are described by two index arrays: ``base`` lists the flat
offset of every configuration of the non-target subsystems, ``offsets`` the
flat offset of every configuration of the targets (first target most
significant).  Every flat index is ``base[r] + offsets[i]`` for exactly one
pair, so the output is fully overwritten.
"""
import numpy as np


def apply_columns(const double complex[:, ::1] op,
                  const double complex[:, ::1] vecs,
                  const Py_ssize_t[::1] base,
                  const Py_ssize_t[::1] offsets):
    cdef Py_ssize_t D = vecs.shape[0]
    cdef Py_ssize_t C = vecs.shape[1]
    cdef Py_ssize_t R = base.shape[0]
    cdef Py_ssize_t d = offsets.shape[0]
    out = np.empty((D, C), dtype=np.complex128)
    tmp_arr = np.empty(d, dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef double complex[::1] tmp = tmp_arr
    cdef Py_ssize_t r, c, i, j, b
    cdef double complex acc
    with nogil:
        for r in range(R):
            b = base[r]
            for c in range(C):
                for j in range(d):
                    tmp[j] = vecs[b + offsets[j], c]
                for i in range(d):
                    acc = 0
                    for j in range(d):
                        acc = acc + op[i, j] * tmp[j]
                    o[b + offsets[i], c] = acc
    return out


def project_columns(const double complex[:, ::1] q,
                    const double complex[:, ::1] qh,
                    const double complex[:, ::1] vecs,
                    const Py_ssize_t[::1] base,
                    const Py_ssize_t[::1] offsets):
    # q: (d, k) orthonormal columns spanning the outcome subspace; qh = q^dagger
    cdef Py_ssize_t D = vecs.shape[0]
    cdef Py_ssize_t C = vecs.shape[1]
    cdef Py_ssize_t R = base.shape[0]
    cdef Py_ssize_t d = offsets.shape[0]
    cdef Py_ssize_t k = q.shape[1]
    out = np.empty((D, C), dtype=np.complex128)
    coef_arr = np.empty(k, dtype=np.complex128)
    cdef double complex[:, ::1] o = out
    cdef double complex[::1] coef = coef_arr
    cdef Py_ssize_t r, c, i, j, kk, b
    cdef double complex acc
    with nogil:
        for r in range(R):
            b = base[r]
            for c in range(C):
                for kk in range(k):
                    acc = 0
                    for j in range(d):
                        acc = acc + qh[kk, j] * vecs[b + offsets[j], c]
                    coef[kk] = acc
                for i in range(d):
                    acc = 0
                    for kk in range(k):
                        acc = acc + q[i, kk] * coef[kk]
                    o[b + offsets[i], c] = acc
    return out

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_kernels_py``.

Same signatures and buffer conventions; see that module for the maths.
"""

from libc.math cimport sqrt

import numpy as np


cdef inline void _cr3bp_row(const double[::1] x, double mu, int order,
                            double[::1] drift, double[:, ::1] jac,
                            double[:, :, ::1] hess) noexcept nogil:
    cdef double r[3]
    cdef double p1[3]
    cdef double p2[3]
    cdef int i, j, k
    cdef double m1 = 1.0 - mu
    cdef double m2 = mu
    cdef double l1sq, l2sq, l1, l2, i31, i32, i51, i52, c71, c72, val
    for i in range(3):
        r[i] = x[i]
        p1[i] = x[i]
        p2[i] = x[i]
    p1[0] += mu
    p2[0] += mu - 1.0
    l1sq = p1[0] * p1[0] + p1[1] * p1[1] + p1[2] * p1[2]
    l2sq = p2[0] * p2[0] + p2[1] * p2[1] + p2[2] * p2[2]
    l1 = sqrt(l1sq)
    l2 = sqrt(l2sq)
    i31 = m1 / (l1sq * l1)
    i32 = m2 / (l2sq * l2)

    drift[0] = x[3]
    drift[1] = x[4]
    drift[2] = x[5]
    drift[3] = r[0] - i31 * p1[0] - i32 * p2[0] + 2.0 * x[4]
    drift[4] = r[1] - i31 * p1[1] - i32 * p2[1] - 2.0 * x[3]
    drift[5] = -i31 * p1[2] - i32 * p2[2]
    if order < 1:
        return

    i51 = 3.0 * m1 / (l1sq * l1sq * l1)
    i52 = 3.0 * m2 / (l2sq * l2sq * l2)
    for i in range(6):
        for j in range(6):
            jac[i, j] = 0.0
    jac[0, 3] = 1.0
    jac[1, 4] = 1.0
    jac[2, 5] = 1.0
    for i in range(3):
        for j in range(3):
            val = i51 * p1[i] * p1[j] + i52 * p2[i] * p2[j]
            if i == j:
                val -= i31 + i32
                if i < 2:
                    val += 1.0
            jac[3 + i, j] = val
    jac[3, 4] = 2.0
    jac[4, 3] = -2.0
    if order < 2:
        return

    for i in range(6):
        for j in range(6):
            for k in range(6):
                hess[i, j, k] = 0.0
    c71 = 5.0 * i51 / l1sq
    c72 = 5.0 * i52 / l2sq
    for i in range(3):
        for j in range(3):
            for k in range(3):
                val = -c71 * p1[i] * p1[j] * p1[k] - c72 * p2[i] * p2[j] * p2[k]
                if i == j:
                    val += i51 * p1[k] + i52 * p2[k]
                if i == k:
                    val += i51 * p1[j] + i52 * p2[j]
                if j == k:
                    val += i51 * p1[i] + i52 * p2[i]
                hess[3 + i, j, k] = val


def cr3bp_derivs(const double[:, ::1] x, double mu, int order, double[:, ::1] drift,
                 jac=None, hess=None):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t row
    cdef double[:, :, ::1] jv
    cdef double[:, :, :, ::1] hv
    if jac is None:
        jac = np.empty((n, 6, 6))
    if hess is None:
        hess = np.empty((n, 6, 6, 6)) if order >= 2 else np.empty((1, 6, 6, 6))
    jv = jac
    hv = hess
    with nogil:
        for row in range(n):
            _cr3bp_row(x[row], mu, order, drift[row], jv[row],
                       hv[row if order >= 2 else 0])


cdef inline void _stt_row(const double[:, ::1] a, const double[:, :, ::1] h,
                          const double* phi, const double* lam,
                          double* out) noexcept nogil:
    # out_{IJK} = sum_D phi_{DJ} sum_E h_{IDE} phi_{EK} + sum_D a_{ID} lam_{DJK}
    cdef double hp[6][6][6]
    cdef int i, j, k, d, e
    cdef double acc
    for i in range(6):
        for d in range(6):
            for k in range(6):
                acc = 0.0
                for e in range(6):
                    acc += h[i, d, e] * phi[6 * e + k]
                hp[i][d][k] = acc
    for i in range(6):
        for j in range(6):
            for k in range(6):
                acc = 0.0
                for d in range(6):
                    acc += phi[6 * d + j] * hp[i][d][k]
                for d in range(6):
                    acc += a[i, d] * lam[36 * d + 6 * j + k]
                out[36 * i + 6 * j + k] = acc


cdef inline void _matmul_6(const double[:, ::1] a, const double* m, int cols,
                           double* out) noexcept nogil:
    cdef int i, j, d
    cdef double acc
    for i in range(6):
        for j in range(cols):
            acc = 0.0
            for d in range(6):
                acc += a[i, d] * m[cols * d + j]
            out[cols * i + j] = acc


def disc_rhs(const double[:, ::1] y, const double[:, :, ::1] a_mat,
             const double[:, :, ::1] b_mat, const double[:, ::1] d_vec,
             const double[:, ::1] f_vec, const double[:, ::1] t_ctl,
             const double[::1] s, const double[::1] alpha, const double[::1] beta, hess,
             double[:, ::1] out):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t row
    cdef int i, j, d
    cdef double acc
    cdef bint with_stt = hess is not None
    cdef const double[:, :, :, ::1] hv
    if with_stt:
        hv = hess
    else:
        hv = np.zeros((1, 6, 6, 6))
    with nogil:
        for row in range(n):
            for i in range(6):
                out[row, i] = f_vec[row, i]
            _matmul_6(a_mat[row], &y[row, 6], 6, &out[row, 6])
            _matmul_6(a_mat[row], &y[row, 42], 3, &out[row, 42])
            _matmul_6(a_mat[row], &y[row, 60], 3, &out[row, 60])
            for i in range(6):
                for j in range(3):
                    out[row, 42 + 3 * i + j] += b_mat[row, i, j] * alpha[row]
                    out[row, 60 + 3 * i + j] += b_mat[row, i, j] * beta[row]
            _matmul_6(a_mat[row], &y[row, 78], 1, &out[row, 78])
            _matmul_6(a_mat[row], &y[row, 84], 1, &out[row, 84])
            for i in range(6):
                out[row, 78 + i] += d_vec[row, i]
                acc = f_vec[row, i] - d_vec[row, i] * s[row]
                for d in range(6):
                    acc -= a_mat[row, i, d] * y[row, d]
                for j in range(3):
                    acc -= b_mat[row, i, j] * t_ctl[row, j]
                out[row, 84 + i] += acc
            if with_stt:
                _stt_row(a_mat[row], hv[row], &y[row, 6], &y[row, 90], &out[row, 90])


def stt_rhs(const double[:, ::1] y, const double[:, ::1] f_vec,
            const double[:, :, ::1] a_mat, const double[:, :, :, ::1] hess,
            double[:, ::1] out):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t row
    cdef int i
    with nogil:
        for row in range(n):
            for i in range(6):
                out[row, i] = f_vec[row, i]
            _matmul_6(a_mat[row], &y[row, 6], 6, &out[row, 6])
            _stt_row(a_mat[row], hess[row], &y[row, 6], &y[row, 42], &out[row, 42])

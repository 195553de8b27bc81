# cython: boundscheck=False, wraparound=False, cdivision=True
"""Fused elementwise kernels for the ETDRK4 stepper.

Same signatures as ksefix._kernels_py; each function collapses a handful of
numpy temporaries into one pass over the (n, n//2+1) half-spectrum arrays.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef double complex cplx


def grad_pair(const cplx[:, ::1] v, const double[:, ::1] kx, const double[:, ::1] ky):
    cdef Py_ssize_t n0 = v.shape[0], n1 = v.shape[1], i, j
    gx_arr = np.empty((n0, n1), dtype=np.complex128)
    gy_arr = np.empty((n0, n1), dtype=np.complex128)
    cdef cplx[:, ::1] gx = gx_arr
    cdef cplx[:, ::1] gy = gy_arr
    cdef double re, im
    with nogil:
        for i in range(n0):
            for j in range(n1):
                re = v[i, j].real
                im = v[i, j].imag
                gx[i, j].real = -kx[i, j] * im
                gx[i, j].imag = kx[i, j] * re
                gy[i, j].real = -ky[i, j] * im
                gy[i, j].imag = ky[i, j] * re
    return gx_arr, gy_arr


def neg_half_grad_sq(const double[:, ::1] px, const double[:, ::1] py):
    cdef Py_ssize_t n0 = px.shape[0], n1 = px.shape[1], i, j
    w_arr = np.empty((n0, n1), dtype=np.float64)
    cdef double[:, ::1] w = w_arr
    with nogil:
        for i in range(n0):
            for j in range(n1):
                w[i, j] = -0.5 * (px[i, j] * px[i, j] + py[i, j] * py[i, j])
    return w_arr


def mask_mean0(wh_arr, const double[:, ::1] mask, fh_arr=None):
    cdef cplx[:, ::1] wh = wh_arr
    cdef const cplx[:, ::1] fh
    cdef Py_ssize_t n0 = wh.shape[0], n1 = wh.shape[1], i, j
    if fh_arr is None:
        with nogil:
            for i in range(n0):
                for j in range(n1):
                    wh[i, j].real = wh[i, j].real * mask[i, j]
                    wh[i, j].imag = wh[i, j].imag * mask[i, j]
                wh[0, 0] = 0.0
    else:
        fh = fh_arr
        with nogil:
            for i in range(n0):
                for j in range(n1):
                    wh[i, j].real = wh[i, j].real * mask[i, j] + fh[i, j].real
                    wh[i, j].imag = wh[i, j].imag * mask[i, j] + fh[i, j].imag
                wh[0, 0] = 0.0
    return wh_arr


def stage_ab(const double[:, ::1] e2, const cplx[:, ::1] v, const double[:, ::1] q, const cplx[:, ::1] n1v):
    cdef Py_ssize_t n0 = v.shape[0], n1 = v.shape[1], i, j
    out_arr = np.empty((n0, n1), dtype=np.complex128)
    cdef cplx[:, ::1] out = out_arr
    with nogil:
        for i in range(n0):
            for j in range(n1):
                out[i, j].real = e2[i, j] * v[i, j].real + q[i, j] * n1v[i, j].real
                out[i, j].imag = e2[i, j] * v[i, j].imag + q[i, j] * n1v[i, j].imag
    return out_arr


def stage_c(const double[:, ::1] e2, const cplx[:, ::1] a, const double[:, ::1] q,
            const cplx[:, ::1] nb, const cplx[:, ::1] nv):
    cdef Py_ssize_t n0 = a.shape[0], n1 = a.shape[1], i, j
    out_arr = np.empty((n0, n1), dtype=np.complex128)
    cdef cplx[:, ::1] out = out_arr
    with nogil:
        for i in range(n0):
            for j in range(n1):
                out[i, j].real = e2[i, j] * a[i, j].real + q[i, j] * (2.0 * nb[i, j].real - nv[i, j].real)
                out[i, j].imag = e2[i, j] * a[i, j].imag + q[i, j] * (2.0 * nb[i, j].imag - nv[i, j].imag)
    return out_arr


def combine(const double[:, ::1] e, const cplx[:, ::1] v,
            const double[:, ::1] f1, const cplx[:, ::1] nv,
            const double[:, ::1] f2, const cplx[:, ::1] na, const cplx[:, ::1] nb,
            const double[:, ::1] f3, const cplx[:, ::1] nc):
    cdef Py_ssize_t n0 = v.shape[0], n1 = v.shape[1], i, j
    out_arr = np.empty((n0, n1), dtype=np.complex128)
    cdef cplx[:, ::1] out = out_arr
    with nogil:
        for i in range(n0):
            for j in range(n1):
                out[i, j].real = (e[i, j] * v[i, j].real + f1[i, j] * nv[i, j].real
                                  + f2[i, j] * (na[i, j].real + nb[i, j].real)
                                  + f3[i, j] * nc[i, j].real)
                out[i, j].imag = (e[i, j] * v[i, j].imag + f1[i, j] * nv[i, j].imag
                                  + f2[i, j] * (na[i, j].imag + nb[i, j].imag)
                                  + f3[i, j] * nc[i, j].imag)
    return out_arr

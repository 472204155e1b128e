# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementations of the hot kernels (extension backend)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND_NAME = "cython"


def conv1d_forward(cnp.ndarray x_arr, cnp.ndarray w_arr, cnp.ndarray b_arr):
    cdef double[:, :, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[:, :, ::1] w = np.ascontiguousarray(w_arr, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(b_arr, dtype=np.float64)
    cdef Py_ssize_t batch = x.shape[0], length = x.shape[1], c_in = x.shape[2]
    cdef Py_ssize_t k = w.shape[0], c_out = w.shape[2]
    cdef Py_ssize_t lpad = k // 2
    out_arr = np.empty((batch, length, c_out))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t n, t, tau, c, o, src
    cdef double xv
    for n in range(batch):
        for t in range(length):
            for o in range(c_out):
                out[n, t, o] = b[o]
            for tau in range(k):
                src = t + tau - lpad
                if src < 0 or src >= length:
                    continue
                for c in range(c_in):
                    xv = x[n, src, c]
                    if xv == 0.0:
                        continue
                    for o in range(c_out):
                        out[n, t, o] += w[tau, c, o] * xv
    return out_arr


def conv1d_backward(cnp.ndarray x_arr, cnp.ndarray w_arr, cnp.ndarray gz_arr):
    cdef double[:, :, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[:, :, ::1] w = np.ascontiguousarray(w_arr, dtype=np.float64)
    cdef double[:, :, ::1] gz = np.ascontiguousarray(gz_arr, dtype=np.float64)
    cdef Py_ssize_t batch = x.shape[0], length = x.shape[1], c_in = x.shape[2]
    cdef Py_ssize_t k = w.shape[0], c_out = w.shape[2]
    cdef Py_ssize_t lpad = k // 2
    gx_arr = np.zeros((batch, length, c_in))
    gw_arr = np.zeros((k, c_in, c_out))
    gb_arr = np.zeros(c_out)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t n, t, tau, c, o, src
    cdef double g, acc, xv
    for n in range(batch):
        for t in range(length):
            for o in range(c_out):
                gb[o] += gz[n, t, o]
            for tau in range(k):
                src = t + tau - lpad
                if src < 0 or src >= length:
                    continue
                for c in range(c_in):
                    xv = x[n, src, c]
                    acc = 0.0
                    for o in range(c_out):
                        g = gz[n, t, o]
                        acc += g * w[tau, c, o]
                        gw[tau, c, o] += g * xv
                    gx[n, src, c] += acc
    return gx_arr, gw_arr, gb_arr


def dense_forward(cnp.ndarray x_arr, cnp.ndarray w_arr, cnp.ndarray b_arr):
    # one streaming pass over the weight matrix; batch rows stay in cache
    cdef double[:, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[:, ::1] w = np.ascontiguousarray(w_arr, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(b_arr, dtype=np.float64)
    cdef Py_ssize_t batch = x.shape[0], d_in = x.shape[1], d_out = w.shape[1]
    out_arr = np.empty((batch, d_out))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t n, n0, i, o, nb
    cdef double x0, x1, x2, x3
    for n in range(batch):
        for o in range(d_out):
            out[n, o] = b[o]
    for n0 in range(0, batch, 4):
        nb = batch - n0
        if nb > 4:
            nb = 4
        if nb == 4:
            for i in range(d_in):
                x0 = x[n0, i]
                x1 = x[n0 + 1, i]
                x2 = x[n0 + 2, i]
                x3 = x[n0 + 3, i]
                if x0 == 0.0 and x1 == 0.0 and x2 == 0.0 and x3 == 0.0:
                    continue
                for o in range(d_out):
                    out[n0, o] += w[i, o] * x0
                    out[n0 + 1, o] += w[i, o] * x1
                    out[n0 + 2, o] += w[i, o] * x2
                    out[n0 + 3, o] += w[i, o] * x3
        else:
            for i in range(d_in):
                for n in range(n0, n0 + nb):
                    x0 = x[n, i]
                    if x0 == 0.0:
                        continue
                    for o in range(d_out):
                        out[n, o] += w[i, o] * x0
    return out_arr


def dense_backward(cnp.ndarray x_arr, cnp.ndarray w_arr, cnp.ndarray gz_arr):
    # grad_w and grad_x are built in one shared pass over the weight matrix
    cdef double[:, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[:, ::1] w = np.ascontiguousarray(w_arr, dtype=np.float64)
    cdef double[:, ::1] gz = np.ascontiguousarray(gz_arr, dtype=np.float64)
    cdef Py_ssize_t batch = x.shape[0], d_in = x.shape[1], d_out = w.shape[1]
    gx_arr = np.zeros((batch, d_in))
    gw_arr = np.zeros((d_in, d_out))
    gb_arr = np.zeros(d_out)
    cdef double[:, ::1] gx = gx_arr
    cdef double[:, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t n, i, o
    cdef double wv, gv
    cdef double x0, x1, x2, x3, a0, a1, a2, a3
    for n in range(batch):
        for o in range(d_out):
            gb[o] += gz[n, o]
    if batch == 4:
        for i in range(d_in):
            x0 = x[0, i]
            x1 = x[1, i]
            x2 = x[2, i]
            x3 = x[3, i]
            a0 = a1 = a2 = a3 = 0.0
            for o in range(d_out):
                wv = w[i, o]
                gw[i, o] = gz[0, o] * x0 + gz[1, o] * x1 + gz[2, o] * x2 + gz[3, o] * x3
                a0 += gz[0, o] * wv
                a1 += gz[1, o] * wv
                a2 += gz[2, o] * wv
                a3 += gz[3, o] * wv
            gx[0, i] = a0
            gx[1, i] = a1
            gx[2, i] = a2
            gx[3, i] = a3
    else:
        for i in range(d_in):
            for o in range(d_out):
                gv = 0.0
                for n in range(batch):
                    gv += gz[n, o] * x[n, i]
                gw[i, o] = gv
            for n in range(batch):
                a0 = 0.0
                for o in range(d_out):
                    a0 += gz[n, o] * w[i, o]
                gx[n, i] = a0
    return gx_arr, gw_arr, gb_arr


def adam_update(cnp.ndarray p_arr, cnp.ndarray g_arr, cnp.ndarray m_arr,
                cnp.ndarray v_arr, double lr, double beta1, double beta2,
                double epsilon, long t, cnp.ndarray scratch_arr):
    """One in-place Adam update on flat views; returns False on non-finite g."""
    cdef double[::1] p = p_arr
    cdef double[::1] g = g_arr
    cdef double[::1] m = m_arr
    cdef double[::1] v = v_arr
    cdef Py_ssize_t n = p.shape[0], i
    cdef double corr1 = 1.0 - beta1 ** t
    cdef double sqrt_corr2 = sqrt(1.0 - beta2 ** t)
    cdef double one_minus_b1 = 1.0 - beta1
    cdef double one_minus_b2 = 1.0 - beta2
    cdef double scale = lr / corr1
    cdef double gi, mi, vi
    for i in range(n):
        gi = g[i]
        if not (gi - gi == 0.0):  # catches NaN and +/-Inf
            return False
    for i in range(n):
        gi = g[i]
        mi = beta1 * m[i] + one_minus_b1 * gi
        vi = beta2 * v[i] + one_minus_b2 * gi * gi
        m[i] = mi
        v[i] = vi
        p[i] -= scale * mi / (sqrt(vi) / sqrt_corr2 + epsilon)
    return True

# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled LSTM sequence kernels; semantics mirror kernels/reference.py."""

from libc.math cimport exp, tanh

import numpy as np


cdef inline double _sigmoid(double x) nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def lstm_seq_forward(double[:, ::1] xw, double[:, ::1] u, double[::1] b,
                     double[::1] h0, double[::1] c0):
    cdef Py_ssize_t steps = xw.shape[0]
    cdef Py_ssize_t hidden = u.shape[1]
    hs_arr = np.empty((steps, hidden))
    cs_arr = np.empty((steps, hidden))
    gates_arr = np.empty((steps, 4 * hidden))
    h_arr = np.array(h0, dtype=np.float64)
    c_arr = np.array(c0, dtype=np.float64)
    pre_arr = np.empty(4 * hidden)
    cdef double[:, ::1] hs = hs_arr
    cdef double[:, ::1] cs = cs_arr
    cdef double[:, ::1] gates = gates_arr
    cdef double[::1] h = h_arr
    cdef double[::1] c = c_arr
    cdef double[::1] pre = pre_arr
    cdef Py_ssize_t t, k, j
    cdef double acc, gi, gf, gg, go

    with nogil:
        for t in range(steps):
            for k in range(4 * hidden):
                acc = xw[t, k] + b[k]
                for j in range(hidden):
                    acc += u[k, j] * h[j]
                pre[k] = acc
            for j in range(hidden):
                gi = _sigmoid(pre[j])
                gf = _sigmoid(pre[hidden + j])
                gg = tanh(pre[2 * hidden + j])
                go = _sigmoid(pre[3 * hidden + j])
                c[j] = gf * c[j] + gi * gg
                h[j] = go * tanh(c[j])
                gates[t, j] = gi
                gates[t, hidden + j] = gf
                gates[t, 2 * hidden + j] = gg
                gates[t, 3 * hidden + j] = go
                hs[t, j] = h[j]
                cs[t, j] = c[j]
    return hs_arr, cs_arr, gates_arr


def lstm_seq_backward(double[:, ::1] u, double[:, ::1] gates, double[:, ::1] cs,
                      double[::1] h0, double[::1] c0,
                      double[:, ::1] dh_out, double[::1] dc_last):
    cdef Py_ssize_t steps = dh_out.shape[0]
    cdef Py_ssize_t hidden = dh_out.shape[1]
    dxw_arr = np.empty((steps, 4 * hidden))
    dh_rec_arr = np.zeros(hidden)
    dc_arr = np.array(dc_last, dtype=np.float64)
    ut_arr = np.ascontiguousarray(np.asarray(u).T)
    cdef double[:, ::1] dxw = dxw_arr
    cdef double[::1] dh_rec = dh_rec_arr
    cdef double[::1] dc = dc_arr
    cdef double[:, ::1] ut = ut_arr
    cdef Py_ssize_t t, k, j
    cdef double tc, dh, do_, gi, gf, gg, go, c_prev, dct, acc

    with nogil:
        for t in range(steps - 1, -1, -1):
            for j in range(hidden):
                gi = gates[t, j]
                gf = gates[t, hidden + j]
                gg = gates[t, 2 * hidden + j]
                go = gates[t, 3 * hidden + j]
                tc = tanh(cs[t, j])
                dh = dh_out[t, j] + dh_rec[j]
                do_ = dh * tc
                dct = dc[j] + dh * go * (1.0 - tc * tc)
                c_prev = cs[t - 1, j] if t > 0 else c0[j]
                dxw[t, j] = dct * gg * gi * (1.0 - gi)
                dxw[t, hidden + j] = dct * c_prev * gf * (1.0 - gf)
                dxw[t, 2 * hidden + j] = dct * gi * (1.0 - gg * gg)
                dxw[t, 3 * hidden + j] = do_ * go * (1.0 - go)
                dc[j] = dct * gf
            for j in range(hidden):
                acc = 0.0
                for k in range(4 * hidden):
                    acc += ut[j, k] * dxw[t, k]
                dh_rec[j] = acc
    return dxw_arr, dh_rec_arr, dc_arr

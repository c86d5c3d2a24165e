# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled gated-recurrent sequence kernel.

Same contract as the numpy fallback: the caller precomputes the input
projection, this module runs the serial time loop in C.  Gate order in
the packed 3H axis is (z, r, c); update rule h = (1-z)*h_prev + z*cand.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()


cdef inline double _sig(double x) noexcept nogil:
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    cdef double e = exp(x)
    return e / (1.0 + e)


def gru_sequence_forward(double[:, :, ::1] xw, double[:, ::1] Wh,
                         long[::1] lengths, bint reverse):
    cdef Py_ssize_t B = xw.shape[0]
    cdef Py_ssize_t T = xw.shape[1]
    cdef Py_ssize_t H = xw.shape[2] // 3
    cdef Py_ssize_t b, t, pos, j, k

    out_arr = np.zeros((B, T, H))
    z_arr = np.zeros((B, T, H))
    r_arr = np.zeros((B, T, H))
    c_arr = np.zeros((B, T, H))
    h_arr = np.zeros((B, T, H))
    h_work = np.zeros((B, H))
    rh_work = np.zeros(H)

    cdef double[:, :, ::1] out = out_arr
    cdef double[:, :, ::1] zv = z_arr
    cdef double[:, :, ::1] rv = r_arr
    cdef double[:, :, ::1] cv = c_arr
    cdef double[:, :, ::1] hv = h_arr
    cdef double[:, ::1] h = h_work
    cdef double[::1] rh = rh_work
    cdef double az, ar, ac, zj, rj, cj

    with nogil:
        for pos in range(T):
            t = T - 1 - pos if reverse else pos
            for b in range(B):
                if t < lengths[b]:
                    for j in range(H):
                        az = xw[b, t, j]
                        ar = xw[b, t, H + j]
                        for k in range(H):
                            az += h[b, k] * Wh[k, j]
                            ar += h[b, k] * Wh[k, H + j]
                        zv[b, t, j] = _sig(az)
                        rv[b, t, j] = _sig(ar)
                    for k in range(H):
                        rh[k] = rv[b, t, k] * h[b, k]
                    for j in range(H):
                        ac = xw[b, t, 2 * H + j]
                        for k in range(H):
                            ac += rh[k] * Wh[k, 2 * H + j]
                        cv[b, t, j] = tanh(ac)
                    for j in range(H):
                        zj = zv[b, t, j]
                        h[b, j] = (1.0 - zj) * h[b, j] + zj * cv[b, t, j]
                        hv[b, t, j] = h[b, j]
                        out[b, t, j] = h[b, j]
                else:
                    for j in range(H):
                        hv[b, t, j] = h[b, j]
    return out_arr, (z_arr, r_arr, c_arr, h_arr)


def gru_sequence_backward(double[:, ::1] Wh, long[::1] lengths, bint reverse,
                          cache, double[:, :, ::1] g_out):
    z_arr, r_arr, c_arr, h_arr = cache
    cdef double[:, :, ::1] zv = z_arr
    cdef double[:, :, ::1] rv = r_arr
    cdef double[:, :, ::1] cv = c_arr
    cdef double[:, :, ::1] hv = h_arr
    cdef Py_ssize_t B = zv.shape[0]
    cdef Py_ssize_t T = zv.shape[1]
    cdef Py_ssize_t H = zv.shape[2]
    cdef Py_ssize_t b, t, tp, pos, j, k

    d_xw_arr = np.zeros((B, T, 3 * H))
    d_Wh_arr = np.zeros((H, 3 * H))
    dh_work = np.zeros((B, H))
    buf_arr = np.zeros((5, H))  # dcand, dz, dc, drh, scratch h_prev

    cdef double[:, :, ::1] d_xw = d_xw_arr
    cdef double[:, ::1] d_Wh = d_Wh_arr
    cdef double[:, ::1] dh = dh_work
    cdef double[:, ::1] buf = buf_arr
    cdef double dtotal, zj, rj, cj, hp, dac, dar, daz, drj

    with nogil:
        for pos in range(T - 1, -1, -1):
            t = T - 1 - pos if reverse else pos
            if pos > 0:
                tp = T - pos if reverse else pos - 1
            else:
                tp = -1
            for b in range(B):
                if t < lengths[b]:
                    for j in range(H):
                        hp = hv[b, tp, j] if tp >= 0 else 0.0
                        buf[4, j] = hp
                        dtotal = dh[b, j] + g_out[b, t, j]
                        zj = zv[b, t, j]
                        cj = cv[b, t, j]
                        buf[1, j] = dtotal * (cj - hp)          # dz
                        buf[2, j] = dtotal * zj                  # dc
                        dh[b, j] = dtotal * (1.0 - zj)           # dh_prev part
                    for j in range(H):
                        cj = cv[b, t, j]
                        dac = buf[2, j] * (1.0 - cj * cj)
                        d_xw[b, t, 2 * H + j] = dac
                    for k in range(H):
                        drj = 0.0
                        for j in range(H):
                            drj += d_xw[b, t, 2 * H + j] * Wh[k, 2 * H + j]
                        buf[3, k] = drj                          # d(r*h_prev)
                    for j in range(H):
                        dac = d_xw[b, t, 2 * H + j]
                        for k in range(H):
                            d_Wh[k, 2 * H + j] += rv[b, t, k] * buf[4, k] * dac
                    for j in range(H):
                        rj = rv[b, t, j]
                        hp = buf[4, j]
                        dh[b, j] += buf[3, j] * rj
                        dar = buf[3, j] * hp * rj * (1.0 - rj)
                        zj = zv[b, t, j]
                        daz = buf[1, j] * zj * (1.0 - zj)
                        d_xw[b, t, H + j] = dar
                        d_xw[b, t, j] = daz
                    for j in range(H):
                        dar = d_xw[b, t, H + j]
                        daz = d_xw[b, t, j]
                        for k in range(H):
                            d_Wh[k, H + j] += buf[4, k] * dar
                            d_Wh[k, j] += buf[4, k] * daz
                    for k in range(H):
                        dtotal = 0.0
                        for j in range(H):
                            dtotal += d_xw[b, t, H + j] * Wh[k, H + j]
                            dtotal += d_xw[b, t, j] * Wh[k, j]
                        dh[b, k] += dtotal
                # padded step: gradient passes straight through (dh unchanged)
    return d_xw_arr, d_Wh_arr

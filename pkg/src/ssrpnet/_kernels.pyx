# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: the hot inner loops behind ssrpnet.backend.

Call-compatible with ssrpnet._kernels_np. Selected activations accumulate
in ascending time order, matching the fallback's degenerate-case behavior.

Convolution is the exception: dgemm beats handwritten loops by an order
of magnitude, so ``conv2d_forward``/``conv2d_backward`` delegate to the
im2col + BLAS implementation. The loop versions stay exported with a
``_direct`` suffix; they are the independent cross-check for the im2col
path and the benchmark's reference point.
"""

import numpy as np

from libc.math cimport fabs, sqrt

NAME = "compiled"


def conv2d_forward(x, w, b):
    from ssrpnet import _kernels_np
    return _kernels_np.conv2d_forward(x, w, b)


def conv2d_backward(x, w, dy):
    from ssrpnet import _kernels_np
    return _kernels_np.conv2d_backward(x, w, dy)


def conv2d_forward_direct(double[:, :, :, ::1] x, double[:, :, :, ::1] w, double[::1] b):
    cdef Py_ssize_t bs = x.shape[0], ci = x.shape[1], t = x.shape[2], f = x.shape[3]
    cdef Py_ssize_t co = w.shape[0]
    y_arr = np.empty((bs, co, t, f), dtype=np.float64)
    cdef double[:, :, :, ::1] y = y_arr
    cdef Py_ssize_t n, o, c, i, j, kt, kf, ti, fj
    cdef double acc
    with nogil:
        for n in range(bs):
            for o in range(co):
                for i in range(t):
                    for j in range(f):
                        acc = b[o]
                        for c in range(ci):
                            for kt in range(3):
                                ti = i + kt - 1
                                if ti < 0 or ti >= t:
                                    continue
                                for kf in range(3):
                                    fj = j + kf - 1
                                    if fj < 0 or fj >= f:
                                        continue
                                    acc += w[o, c, kt, kf] * x[n, c, ti, fj]
                        y[n, o, i, j] = acc
    return y_arr


def conv2d_backward_direct(double[:, :, :, ::1] x, double[:, :, :, ::1] w,
                           double[:, :, :, ::1] dy):
    cdef Py_ssize_t bs = x.shape[0], ci = x.shape[1], t = x.shape[2], f = x.shape[3]
    cdef Py_ssize_t co = w.shape[0]
    dx_arr = np.zeros((bs, ci, t, f), dtype=np.float64)
    dw_arr = np.zeros((co, ci, 3, 3), dtype=np.float64)
    db_arr = np.zeros(co, dtype=np.float64)
    cdef double[:, :, :, ::1] dx = dx_arr
    cdef double[:, :, :, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t n, o, c, i, j, kt, kf, ti, fj
    cdef double g
    with nogil:
        for n in range(bs):
            for o in range(co):
                for i in range(t):
                    for j in range(f):
                        g = dy[n, o, i, j]
                        db[o] += g
                        for c in range(ci):
                            for kt in range(3):
                                ti = i + kt - 1
                                if ti < 0 or ti >= t:
                                    continue
                                for kf in range(3):
                                    fj = j + kf - 1
                                    if fj < 0 or fj >= f:
                                        continue
                                    dw[o, c, kt, kf] += g * x[n, c, ti, fj]
                                    dx[n, c, ti, fj] += g * w[o, c, kt, kf]
    return dx_arr, dw_arr, db_arr


def avgpool2x2_forward(double[:, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], t = x.shape[1], f = x.shape[2]
    cdef Py_ssize_t th = t // 2, fh = f // 2
    y_arr = np.empty((n, th, fh), dtype=np.float64)
    cdef double[:, :, ::1] y = y_arr
    cdef Py_ssize_t i, a, b
    with nogil:
        for i in range(n):
            for a in range(th):
                for b in range(fh):
                    y[i, a, b] = (x[i, 2 * a, 2 * b] + x[i, 2 * a, 2 * b + 1]
                                  + x[i, 2 * a + 1, 2 * b] + x[i, 2 * a + 1, 2 * b + 1]) / 4.0
    return y_arr


def avgpool2x2_backward(double[:, :, ::1] dy, Py_ssize_t t, Py_ssize_t f):
    cdef Py_ssize_t n = dy.shape[0], th = dy.shape[1], fh = dy.shape[2]
    dx_arr = np.zeros((n, t, f), dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef Py_ssize_t i, a, b
    cdef double g
    with nogil:
        for i in range(n):
            for a in range(th):
                for b in range(fh):
                    g = dy[i, a, b] / 4.0
                    dx[i, 2 * a, 2 * b] = g
                    dx[i, 2 * a, 2 * b + 1] = g
                    dx[i, 2 * a + 1, 2 * b] = g
                    dx[i, 2 * a + 1, 2 * b + 1] = g
    return dx_arr


def gap_forward(double[:, :, ::1] x):
    cdef Py_ssize_t n = x.shape[0], t = x.shape[1], f = x.shape[2]
    y_arr = np.empty((n, f), dtype=np.float64)
    cdef double[:, ::1] y = y_arr
    cdef Py_ssize_t i, j, k
    cdef double acc
    with nogil:
        for i in range(n):
            for j in range(f):
                acc = x[i, 0, j]
                for k in range(1, t):
                    acc += x[i, k, j]
                y[i, j] = acc / t
    return y_arr


def gap_backward(double[:, ::1] dy, Py_ssize_t t):
    cdef Py_ssize_t n = dy.shape[0], f = dy.shape[1]
    dx_arr = np.empty((n, t, f), dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef Py_ssize_t i, j, k
    cdef double g
    with nogil:
        for i in range(n):
            for j in range(f):
                g = dy[i, j] / t
                for k in range(t):
                    dx[i, k, j] = g
    return dx_arr


def ssrp_b_forward(double[:, :, ::1] x, Py_ssize_t window):
    cdef Py_ssize_t n = x.shape[0], t = x.shape[1], f = x.shape[2]
    cdef Py_ssize_t n_starts = t - window + 1
    vals_arr = np.empty((n, f), dtype=np.float64)
    starts_arr = np.empty((n, f), dtype=np.int64)
    cdef double[:, ::1] vals = vals_arr
    cdef long long[:, ::1] starts = starts_arr
    cdef Py_ssize_t i, j, s, k, best_s
    cdef double acc, mean, best
    with nogil:
        for i in range(n):
            for j in range(f):
                best = 0.0
                best_s = 0
                for s in range(n_starts):
                    acc = x[i, s, j]
                    for k in range(1, window):
                        acc += x[i, s + k, j]
                    # compare rounded means, not sums: ties break like argmax
                    mean = acc / window
                    if s == 0 or mean > best:
                        best = mean
                        best_s = s
                vals[i, j] = best
                starts[i, j] = best_s
    return vals_arr, starts_arr


def ssrp_b_backward(double[:, ::1] dy, long long[:, ::1] starts,
                    Py_ssize_t window, Py_ssize_t t):
    cdef Py_ssize_t n = dy.shape[0], f = dy.shape[1]
    dx_arr = np.zeros((n, t, f), dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef Py_ssize_t i, j, k
    cdef double g
    with nogil:
        for i in range(n):
            for j in range(f):
                g = dy[i, j] / window
                for k in range(window):
                    dx[i, starts[i, j] + k, j] = g
    return dx_arr


def ssrp_t_forward(double[:, :, ::1] x, Py_ssize_t top_k):
    cdef Py_ssize_t n = x.shape[0], t = x.shape[1], f = x.shape[2]
    vals_arr = np.empty((n, f), dtype=np.float64)
    idx_arr = np.empty((n, top_k, f), dtype=np.int64)
    cdef double[:, ::1] vals = vals_arr
    cdef long long[:, :, ::1] idx = idx_arr
    buf_val_arr = np.empty(top_k, dtype=np.float64)
    buf_idx_arr = np.empty(top_k, dtype=np.int64)
    cdef double[::1] buf_val = buf_val_arr
    cdef long long[::1] buf_idx = buf_idx_arr
    cdef Py_ssize_t i, j, k, m, mn, tmp_i
    cdef double v, acc
    with nogil:
        for i in range(n):
            for j in range(f):
                # strict-greater replacement keeps the smaller time index on ties
                for k in range(top_k):
                    buf_val[k] = x[i, k, j]
                    buf_idx[k] = k
                for k in range(top_k, t):
                    v = x[i, k, j]
                    mn = 0
                    for m in range(1, top_k):
                        if buf_val[m] < buf_val[mn]:
                            mn = m
                    if v > buf_val[mn]:
                        buf_val[mn] = v
                        buf_idx[mn] = k
                # ascending time order: insertion sort on indices
                for k in range(1, top_k):
                    tmp_i = buf_idx[k]
                    m = k - 1
                    while m >= 0 and buf_idx[m] > tmp_i:
                        buf_idx[m + 1] = buf_idx[m]
                        m -= 1
                    buf_idx[m + 1] = tmp_i
                acc = x[i, buf_idx[0], j]
                for k in range(1, top_k):
                    acc += x[i, buf_idx[k], j]
                vals[i, j] = acc / top_k
                for k in range(top_k):
                    idx[i, k, j] = buf_idx[k]
    return vals_arr, idx_arr


def ssrp_t_backward(double[:, ::1] dy, long long[:, :, ::1] idx, Py_ssize_t t):
    cdef Py_ssize_t n = dy.shape[0], k = idx.shape[1], f = idx.shape[2]
    dx_arr = np.zeros((n, t, f), dtype=np.float64)
    cdef double[:, :, ::1] dx = dx_arr
    cdef Py_ssize_t i, j, m
    cdef double g
    with nogil:
        for i in range(n):
            for j in range(f):
                g = dy[i, j] / k
                for m in range(k):
                    dx[i, idx[i, m, j], j] = g
    return dx_arr


def jacobi_eigh(double[:, ::1] a_in, double tol_scale=1e-10, int max_sweeps=100):
    cdef Py_ssize_t d = a_in.shape[0]
    a_arr = np.array(a_in, dtype=np.float64, copy=True)
    v_arr = np.eye(d, dtype=np.float64)
    cdef double[:, ::1] a = a_arr
    cdef double[:, ::1] v = v_arr
    cdef Py_ssize_t p, q, i
    cdef int sweeps = 0
    cdef double norm2 = 0.0, off2, apq, theta, sign, tan, c, s, tp, tq, tol2
    # rotations on pivots this small only churn roundoff
    cdef double skip = 2.2250738585072014e-308 / 2.220446049250313e-16

    with nogil:
        for p in range(d):
            for q in range(d):
                norm2 += a[p, q] * a[p, q]
    if norm2 == 0.0 or d == 1:
        return np.diag(a_arr).copy(), v_arr, 0
    tol2 = tol_scale * tol_scale * norm2

    while sweeps < max_sweeps:
        off2 = 0.0
        with nogil:
            for p in range(d):
                for q in range(d):
                    if p != q:
                        off2 += a[p, q] * a[p, q]
        if off2 <= tol2:
            break
        sweeps += 1
        with nogil:
            for p in range(d - 1):
                for q in range(p + 1, d):
                    apq = a[p, q]
                    if fabs(apq) <= skip:
                        continue
                    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                    sign = 1.0 if theta >= 0.0 else -1.0
                    tan = sign / (fabs(theta) + sqrt(theta * theta + 1.0))
                    c = 1.0 / sqrt(tan * tan + 1.0)
                    s = tan * c
                    for i in range(d):
                        tp = a[i, p]
                        tq = a[i, q]
                        a[i, p] = c * tp - s * tq
                        a[i, q] = s * tp + c * tq
                    for i in range(d):
                        tp = a[p, i]
                        tq = a[q, i]
                        a[p, i] = c * tp - s * tq
                        a[q, i] = s * tp + c * tq
                    a[p, q] = 0.0
                    a[q, p] = 0.0
                    for i in range(d):
                        tp = v[i, p]
                        tq = v[i, q]
                        v[i, p] = c * tp - s * tq
                        v[i, q] = s * tp + c * tq
    return np.diag(a_arr).copy(), v_arr, sweeps

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled streaming kernels; see ``_kernels_py.py`` for the reference semantics."""

import numpy as np

from libc.math cimport sqrt

from .errors import NumericalBreakdownError
from .linalg import C_MAX as _PY_C_MAX, C_MIN as _PY_C_MIN, PIVOT_RTOL as _PY_PIVOT_RTOL
from .linalg import solve_psd

cdef double C_MIN = _PY_C_MIN
cdef double C_MAX = _PY_C_MAX
cdef double PIVOT_RTOL = _PY_PIVOT_RTOL

REG_FIXED = 0
REG_GENIE = 1
REG_EXTRAPOLATE = 2


cdef inline double _clamp(double c):
    if c < C_MIN:
        return C_MIN
    if c > C_MAX:
        return C_MAX
    return c


cdef bint _chol_solve(double[:, ::1] A, double[::1] b, double[::1] out, Py_ssize_t P):
    """Cholesky solve in place of ``A``; False when a pivot is not sound."""
    cdef Py_ssize_t i, j, k
    cdef double s, scale = 0.0
    for i in range(P):
        if A[i, i] > scale:
            scale = A[i, i]
    if scale <= 0.0:
        return False
    for j in range(P):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if s <= PIVOT_RTOL * scale:
            return False
        A[j, j] = sqrt(s)
        for i in range(j + 1, P):
            s = A[i, j]
            for k in range(j):
                s -= A[i, k] * A[j, k]
            A[i, j] = s / A[j, j]
    for i in range(P):
        s = b[i]
        for k in range(i):
            s -= A[i, k] * out[k]
        out[i] = s / A[i, i]
    for i in range(P - 1, -1, -1):
        s = out[i]
        for k in range(i + 1, P):
            s -= A[k, i] * out[k]
        out[i] = s / A[i, i]
    return True


def run_affine(x, y, Py_ssize_t n, Py_ssize_t P, double mu, int reg_kind, double reg_value,
               bint first_only, bint block, w_true, double sigma_z2, Py_ssize_t delay_M,
               Py_ssize_t metric_offset, Py_ssize_t t0=0):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] wt = np.ascontiguousarray(w_true, dtype=np.float64)
    cdef Py_ssize_t T = xv.shape[0]
    cdef Py_ssize_t pad = n + P - 2
    xp_arr = np.zeros(T + pad)
    xp_arr[pad:] = xv
    cdef double[::1] xp = xp_arr
    w_arr = np.zeros(n)
    cdef double[::1] w = w_arr
    sqerr_arr = np.empty(T - t0)
    yhat_arr = np.empty(T - t0)
    cdef double[::1] sqerr = sqerr_arr
    cdef double[::1] yhat = yhat_arr
    cdef double[:, ::1] G = np.zeros((P, P))
    A_arr = np.empty((P, P))
    cdef double[:, ::1] A = A_arr
    e_arr = np.zeros(P)
    s_arr = np.zeros(P)
    cdef double[::1] e = e_arr
    cdef double[::1] s = s_arr
    cdef Py_ssize_t t, r, i, j, k, base
    cdef double acc, reg, c, d

    for t in range(T):
        base = t + pad
        for i in range(P - 1, 0, -1):
            for j in range(P - 1, 0, -1):
                G[i, j] = G[i - 1, j - 1]
        for j in range(P):
            acc = 0.0
            for k in range(n):
                acc += xp[base - k] * xp[base - j - k]
            G[0, j] = acc
            G[j, 0] = acc
        if t < t0:
            continue
        r = t - t0
        acc = 0.0
        for k in range(n):
            acc += w[k] * xp[base - k]
        yhat[r] = acc

        if mu != 0.0 and (not block or (r + 1) % P == 0):
            if reg_kind == 0:
                reg = reg_value
            elif sigma_z2 == 0.0:
                reg = 1.0 / C_MAX
            else:
                if reg_kind == 1:
                    c = 0.0
                    for k in range(n):
                        d = w[k] - wt[k]
                        c += d * d
                    c /= n * sigma_z2
                elif r < delay_M:
                    c = 1.0 / sigma_z2
                else:
                    c = 0.0
                    for k in range(delay_M):
                        c += w[k] * w[k]
                    c /= delay_M * sigma_z2
                reg = 1.0 / _clamp(c)

            if first_only:
                e[0] = yv[t] - yhat[r]
            else:
                for j in range(P):
                    acc = 0.0
                    if t - j >= 0:
                        acc = yv[t - j]
                    for k in range(n):
                        acc -= w[k] * xp[base - j - k]
                    e[j] = acc
            for i in range(P):
                for j in range(P):
                    A[i, j] = G[i, j]
                A[i, i] += reg
            if not _chol_solve(A, e, s, P):
                for i in range(P):
                    for j in range(P):
                        A[i, j] = G[i, j]
                    A[i, i] += reg
                s_arr[:] = solve_psd(A_arr, e_arr)
            for k in range(n):
                acc = 0.0
                for j in range(P):
                    acc += xp[base - j - k] * s[j]
                w[k] += mu * acc

        acc = 0.0
        for k in range(metric_offset, n):
            d = w[k] - wt[k]
            acc += d * d
        sqerr[r] = acc
    return w_arr, sqerr_arr, yhat_arr


def run_lms(x, y, Py_ssize_t n, double mu, w_true, Py_ssize_t metric_offset):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] wt = np.ascontiguousarray(w_true, dtype=np.float64)
    cdef Py_ssize_t T = xv.shape[0]
    cdef Py_ssize_t pad = n - 1
    xp_arr = np.zeros(T + pad)
    xp_arr[pad:] = xv
    cdef double[::1] xp = xp_arr
    w_arr = np.zeros(n)
    cdef double[::1] w = w_arr
    sqerr_arr = np.empty(T)
    yhat_arr = np.empty(T)
    cdef double[::1] sqerr = sqerr_arr
    cdef double[::1] yhat = yhat_arr
    cdef Py_ssize_t t, k, base
    cdef double acc, g, d
    for t in range(T):
        base = t + pad
        acc = 0.0
        for k in range(n):
            acc += w[k] * xp[base - k]
        yhat[t] = acc
        g = mu * (yv[t] - acc)
        for k in range(n):
            w[k] += g * xp[base - k]
        acc = 0.0
        for k in range(metric_offset, n):
            d = w[k] - wt[k]
            acc += d * d
        sqerr[t] = acc
    return w_arr, sqerr_arr, yhat_arr


def run_rls(x, y, Py_ssize_t n, double eta, double delta_init, w_true, Py_ssize_t metric_offset):
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] wt = np.ascontiguousarray(w_true, dtype=np.float64)
    cdef Py_ssize_t T = xv.shape[0]
    cdef Py_ssize_t pad = n - 1
    xp_arr = np.zeros(T + pad)
    xp_arr[pad:] = xv
    cdef double[::1] xp = xp_arr
    w_arr = np.zeros(n)
    cdef double[::1] w = w_arr
    cdef double[:, ::1] Pm = np.eye(n) / delta_init
    cdef double[::1] Px = np.empty(n)
    cdef double[::1] kg = np.empty(n)
    sqerr_arr = np.empty(T)
    yhat_arr = np.empty(T)
    cdef double[::1] sqerr = sqerr_arr
    cdef double[::1] yhat = yhat_arr
    cdef Py_ssize_t t, i, j, base
    cdef double acc, denom, err, d, inv_eta = 1.0 / eta, upd
    for t in range(T):
        base = t + pad
        acc = 0.0
        for i in range(n):
            acc += w[i] * xp[base - i]
        yhat[t] = acc
        err = yv[t] - acc
        denom = eta
        for i in range(n):
            acc = 0.0
            for j in range(n):
                acc += Pm[i, j] * xp[base - j]
            Px[i] = acc
            denom += xp[base - i] * acc
        if not denom > 0.0:
            raise NumericalBreakdownError(f"RLS gain denominator {denom} at sample {t}")
        for i in range(n):
            kg[i] = Px[i] / denom
            w[i] += kg[i] * err
        for i in range(n):
            for j in range(i, n):
                upd = 0.5 * ((Pm[i, j] - kg[i] * Px[j]) + (Pm[j, i] - kg[j] * Px[i])) * inv_eta
                Pm[i, j] = upd
                Pm[j, i] = upd
        acc = 0.0
        for i in range(metric_offset, n):
            d = w[i] - wt[i]
            acc += d * d
        sqerr[t] = acc
    return w_arr, sqerr_arr, yhat_arr


def bound_sequence(double a0, double eta, Py_ssize_t steps):
    out_arr = np.empty(steps + 1)
    cdef double[::1] out = out_arr
    cdef double a = a0
    cdef Py_ssize_t t
    out[0] = a
    for t in range(1, steps + 1):
        a = (1.0 - eta * a / (1.0 + a)) * a
        out[t] = a
    return out_arr


def bound_final(double a0, double eta, Py_ssize_t steps):
    cdef double a = a0
    cdef Py_ssize_t t
    for t in range(steps):
        a = (1.0 - eta * a / (1.0 + a)) * a
    return a

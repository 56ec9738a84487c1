"""Pure numpy implementation of the streaming kernels.

Mirrors ``_kernels.pyx`` signature for signature; used when the compiled
extension is unavailable and as the cross-check in the tests.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import NumericalBreakdownError
from .linalg import C_MAX, clamp_c, solve_psd

REG_FIXED = 0
REG_GENIE = 1
REG_EXTRAPOLATE = 2


def _regularizer(kind, value, w, w_true, sigma_z2, M, t):
    if kind == REG_FIXED:
        return value
    if sigma_z2 == 0.0:
        return 1.0 / C_MAX
    if kind == REG_GENIE:
        d = w - w_true
        c = (d @ d) / (w.size * sigma_z2)
    elif t < M:
        c = 1.0 / sigma_z2
    else:
        lead = w[:M]
        c = (lead @ lead) / (M * sigma_z2)
    return 1.0 / clamp_c(c)


def _regressors(x, n, P):
    # row i is the regressor [x_t, ..., x_{t-n+1}] at time t = i - (P - 1)
    xp = np.concatenate([np.zeros(n + P - 2), x])
    return sliding_window_view(xp, n)[:, ::-1]


def run_affine(x, y, n, P, mu, reg_kind, reg_value, first_only, block,
               w_true, sigma_z2, delay_M, metric_offset, t0=0):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    w_true = np.ascontiguousarray(w_true, dtype=np.float64)
    T = x.size
    rows = _regressors(x, n, P)
    yp = np.concatenate([np.zeros(P - 1), y])
    w = np.zeros(n)
    sqerr = np.empty(T - t0)
    yhat = np.empty(T - t0)
    e = np.zeros(P)
    for t in range(t0, T):
        # samples before t0 only provide regressor history
        r = t - t0
        xt = rows[t + P - 1]
        yhat[r] = xt @ w
        if mu != 0.0 and (not block or (r + 1) % P == 0):
            X = rows[t:t + P][::-1].T
            reg = _regularizer(reg_kind, reg_value, w, w_true, sigma_z2, delay_M, r)
            if first_only:
                e[0] = y[t] - yhat[r]
            else:
                e = yp[t:t + P][::-1] - X.T @ w
            G = X.T @ X
            G[np.diag_indices_from(G)] += reg
            w = w + mu * (X @ solve_psd(G, e))
        d = w[metric_offset:] - w_true[metric_offset:]
        sqerr[r] = d @ d
    return w, sqerr, yhat


def run_lms(x, y, n, mu, w_true, metric_offset):
    x = np.ascontiguousarray(x, dtype=np.float64)
    rows = _regressors(x, n, 1)
    w = np.zeros(n)
    T = x.size
    sqerr = np.empty(T)
    yhat = np.empty(T)
    for t in range(T):
        xt = rows[t]
        yhat[t] = xt @ w
        w = w + (mu * (y[t] - yhat[t])) * xt
        d = w[metric_offset:] - w_true[metric_offset:]
        sqerr[t] = d @ d
    return w, sqerr, yhat


def run_rls(x, y, n, eta, delta_init, w_true, metric_offset):
    x = np.ascontiguousarray(x, dtype=np.float64)
    rows = _regressors(x, n, 1)
    w = np.zeros(n)
    Pm = np.eye(n) / delta_init
    T = x.size
    sqerr = np.empty(T)
    yhat = np.empty(T)
    for t in range(T):
        xt = rows[t]
        yhat[t] = xt @ w
        Px = Pm @ xt
        denom = eta + xt @ Px
        if not denom > 0.0:
            raise NumericalBreakdownError(f"RLS gain denominator {denom} at sample {t}")
        k = Px / denom
        w = w + k * (y[t] - yhat[t])
        Pm = (Pm - np.outer(k, Px)) / eta
        Pm = 0.5 * (Pm + Pm.T)
        d = w[metric_offset:] - w_true[metric_offset:]
        sqerr[t] = d @ d
    return w, sqerr, yhat


def bound_sequence(a0, eta, steps):
    out = np.empty(steps + 1)
    a = float(a0)
    out[0] = a
    for t in range(1, steps + 1):
        a = (1.0 - eta * a / (1.0 + a)) * a
        out[t] = a
    return out


def bound_final(a0, eta, steps):
    a = float(a0)
    for _ in range(steps):
        a = (1.0 - eta * a / (1.0 + a)) * a
    return a

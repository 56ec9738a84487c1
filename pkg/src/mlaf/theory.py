"""Deterministic evaluators for the analytical performance bounds.

All quantities are normalized misalignments ``a = r sigma_x^2 / sigma_z^2``
unless stated otherwise. The online bound iterates

    f(a) = (1 - eta a / (1 + a)) a,     eta = (1 - gamma_L) P / L,

once per block of P samples; the offline bound is a closed form in the
number of samples ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DomainError, ParameterError
from .filters import DENSE_DIM_CAP
from .linalg import solve_psd


def gamma_L(L, P):
    """Slack constant of the one-step bound, with ``h = ln L``.

    ``1 - (1 - sqrt(P/L) - sqrt(ln L / L))^2 (1 - 2/sqrt(L))``

    Raises
    ------
    DomainError
        If ``sqrt(L) - sqrt(ln L) > sqrt(P)`` or ``ln L <= sqrt(L) - sqrt(P)``
        does not hold.
    """
    if L < 2 or P < 1:
        raise DomainError(f"need L >= 2 and P >= 1, got L={L}, P={P}")
    logL = math.log(L)
    gap = math.sqrt(L) - math.sqrt(logL)
    if not (gap > 0 and P < gap * gap):
        raise DomainError(f"sqrt(L) - sqrt(log L) > sqrt(P) fails for L={L}, P={P}")
    if not logL <= math.sqrt(L) - math.sqrt(P):
        raise DomainError(f"log L <= sqrt(L) - sqrt(P) fails for L={L}, P={P}")
    tau = 1.0 - math.sqrt(P / L) - math.sqrt(logL / L)
    return 1.0 - tau * tau * (1.0 - 2.0 / math.sqrt(L))


def contraction_eta(L, P):
    return (1.0 - gamma_L(L, P)) * P / L


def f_step(a, eta):
    """One step of the bound recursion; vectorized over ``a``."""
    a = np.asarray(a, dtype=np.float64)
    if np.any(a < 0):
        raise ParameterError("a must be non-negative")
    if not 0.0 < eta < 1.0:
        raise ParameterError(f"eta must lie in (0, 1), got {eta}")
    out = (1.0 - eta * a / (1.0 + a)) * a
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class BoundParams:
    L: int
    P: int
    a0: float
    gamma_L: float
    eta: float

    def __post_init__(self):
        if self.a0 < 0:
            raise ParameterError("a0 must be non-negative")
        if not 0.0 <= self.gamma_L < 1.0:
            raise ParameterError(f"gamma_L must lie in [0, 1), got {self.gamma_L}")
        if not 0.0 < self.eta < 1.0:
            raise ParameterError(f"eta must lie in (0, 1), got {self.eta}")

    @classmethod
    def from_dims(cls, L, P, a0):
        g = gamma_L(L, P)
        return cls(L, P, float(a0), g, (1.0 - g) * P / L)


@dataclass(frozen=True)
class BoundCurve:
    """Bound values ``a_t`` for ``t = 0, 1, ...``; step ``t`` covers ``t * samples_per_step`` samples."""

    values: np.ndarray
    samples_per_step: int = 1

    @property
    def s(self):
        return np.arange(self.values.size) * self.samples_per_step

    def db(self):
        from .core import to_db

        return to_db(self.values)


def obml_bound_curve(params: BoundParams, steps) -> BoundCurve:
    """Iterate ``f`` ``steps`` times from ``a0``; index ``t`` is after ``t`` block updates."""
    return BoundCurve(kernels.bound_sequence(params.a0, params.eta, int(steps)), params.P)


def obml_bound_at(a0, eta, steps):
    """``a_steps`` without materializing the sequence (compiled loop when available)."""
    return kernels.bound_final(float(a0), float(eta), int(steps))


def offline_bound(a0, L, s):
    """Lower bound on the normalized misalignment of any offline regularized LS estimate."""
    s = np.asarray(s, dtype=np.float64)
    if np.any(s < 0):
        raise ParameterError("s must be non-negative")
    a0 = float(a0)
    early = (1.0 - (s / L) * a0 / (1.0 + a0)) * a0
    with np.errstate(divide="ignore", invalid="ignore"):
        late = L * a0 / (s * a0 + L)
    out = np.where(s <= L, early, late)
    return float(out) if out.ndim == 0 else out


def offline_regularized_ls(X, y, w0, delta, max_dim=DENSE_DIM_CAP):
    """``w0 + X (delta I_s + X^T X)^{-1} (y - X^T w0)`` for an L x s data matrix.

    When ``L < s`` the equivalent ``(delta I_L + X X^T)^{-1} X (y - X^T w0)``
    is solved instead. Singular systems (``delta = 0``) get
    pseudo-inverse semantics.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w0 = np.asarray(w0, dtype=np.float64)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y)) and np.all(np.isfinite(w0))):
        raise ParameterError("inputs must be finite")
    if delta < 0:
        raise ParameterError(f"delta must be non-negative, got {delta}")
    L, s = X.shape
    if min(L, s) > max_dim:
        raise ParameterError(f"system of size {min(L, s)} exceeds the cap {max_dim}")
    resid = y - X.T @ w0
    if L < s:
        A = X @ X.T
        A[np.diag_indices_from(A)] += delta
        return w0 + solve_psd(A, X @ resid)
    A = X.T @ X
    A[np.diag_indices_from(A)] += delta
    return w0 + X @ solve_psd(A, resid)


def theorem1_step_bound(r, L, P, sigma_x, sigma_z):
    """Upper bound on ``E[r_{t+1}]`` after one block update from misalignment ``r``."""
    g = gamma_L(L, P)
    sx2 = sigma_x**2
    denom = sigma_z**2 + sx2 * r
    frac = sx2 * r / denom if denom > 0 else 0.0
    return (1.0 - (1.0 - g) * (P / L) * frac) * r


def singular_value_bounds(m, n, h):
    """Concentration interval for the singular values of an m x n standard Gaussian matrix.

    Returns ``(lower, upper, probability)`` with
    ``lower = sqrt(n) - sqrt(m) - sqrt(h)`` (clipped at 0),
    ``upper = sqrt(n) + sqrt(m) + sqrt(h)`` and the guaranteed coverage
    ``1 - 2 exp(-h/2)``.
    """
    if m > n:
        m, n = n, m
    if h < 0:
        raise ParameterError("h must be non-negative")
    lo = math.sqrt(n) - math.sqrt(m) - math.sqrt(h)
    hi = math.sqrt(n) + math.sqrt(m) + math.sqrt(h)
    return max(lo, 0.0), hi, 1.0 - 2.0 * math.exp(-h / 2.0)


def rate_ratio(values, b, t_start=1):
    """``b t a_t`` for a sequence indexed from ``t_start``; tends to 1."""
    t = np.arange(t_start, t_start + len(values))
    return b * t * np.asarray(values)


def lower_gap_sequence(values, b, t_start=1):
    """``1/a_t - b t``; strictly decreasing along the bound iterates."""
    t = np.arange(t_start, t_start + len(values))
    return 1.0 / np.asarray(values) - b * t


def settling_index(values, b, tol=0.05, t_start=1):
    """Smallest ``T`` with ``|b t a_t - 1| < tol`` for every computed ``t >= T``; None if never."""
    bad = np.abs(rate_ratio(values, b, t_start) - 1.0) >= tol
    if bad[-1]:
        return None
    idx = np.flatnonzero(bad)
    return t_start if idx.size == 0 else t_start + int(idx[-1]) + 1


def bound_table(L, P, a0, steps):
    """Online and offline bounds at matched sample counts ``s = t P``, ``t`` in ``steps``."""
    params = BoundParams.from_dims(L, P, a0)
    steps = np.asarray(steps, dtype=np.int64)
    seq = kernels.bound_sequence(params.a0, params.eta, int(steps.max()))
    s = steps * P
    return s, seq[steps], offline_bound(a0, L, s)

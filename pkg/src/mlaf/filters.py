"""Adaptive filter update rules.

Every rule is a pure function of a :class:`~mlaf.core.FilterState` and its
parameters that returns a new state. The maximum-likelihood rules
(GA-OBML, GA-IML and their practical variants) share the regularized
affine-projection form

    w <- w + X (c^{-1} I_P + X^T X)^{-1} e

and only differ in the error vector ``e`` and the update cadence. The
classes at the bottom wrap the rules behind a common streaming interface.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import DataWindow, FilterState, _as_vector, push_sample
from .errors import DimensionError, NumericalBreakdownError, ParameterError
from .linalg import check_confidence, solve_psd

#: Largest L for which the dense L x L oracle forms may be evaluated.
DENSE_DIM_CAP = 512


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ParameterError("inputs must be finite")


def _check_window(state, window):
    if window.L != state.L:
        raise DimensionError(f"window has L={window.L}, state has L={state.L}")


def _affine_step(w, X, e, reg, mu=1.0):
    G = X.T @ X
    G[np.diag_indices_from(G)] += reg
    return w + mu * (X @ solve_psd(G, e))


def ga_obml_update(state: FilterState, window: DataWindow, c: float) -> FilterState:
    """Block maximum-likelihood update with confidence ``c``.

    Solves the P x P system ``(I/c + X^T X) s = y - X^T w`` and moves
    ``w`` by ``X s``.
    """
    _check_window(state, window)
    c = check_confidence(c)
    _check_finite(window.X, window.y, state.w)
    e = window.y - window.X.T @ state.w
    return state.with_w(_affine_step(state.w, window.X, e, 1.0 / c))


def _iml_inputs(state, x, U, c):
    x = _as_vector(x, "x")
    if x.size != state.L:
        raise DimensionError(f"x has length {x.size}, expected L={state.L}")
    U = np.asarray(U, dtype=np.float64).reshape(state.L, -1)
    c = check_confidence(c)
    _check_finite(x, U, state.w)
    return x, U, c


def ga_iml_update(state: FilterState, x, y, U, c) -> FilterState:
    """Incremental ML update: the block form with all but the newest error zeroed.

    ``U`` holds the P - 1 previous regressors (may have zero columns).
    """
    x, U, c = _iml_inputs(state, x, U, c)
    X = np.column_stack([x, U])
    e = np.zeros(X.shape[1])
    e[0] = y - x @ state.w
    return state.with_w(_affine_step(state.w, X, e, 1.0 / c))


def iml_update_via_small_inverse(state: FilterState, x, y, U, c) -> FilterState:
    """Incremental ML update computed through a (P-1) x (P-1) solve.

    ``x_tilde = B^{-1} x / c`` with ``B = I/c + U U^T`` expanded by the
    Woodbury identity, then ``w += x_tilde * eps / (1/c + x^T x_tilde)``.
    """
    x, U, c = _iml_inputs(state, x, U, c)
    if U.shape[1]:
        G = U.T @ U
        G[np.diag_indices_from(G)] += 1.0 / c
        x_tilde = x - U @ solve_psd(G, U.T @ x)
    else:
        x_tilde = x
    eps = y - x @ state.w
    return state.with_w(state.w + x_tilde * (eps / (1.0 / c + x @ x_tilde)))


def iml_update_dense(state: FilterState, x, y, U, c, max_dim=DENSE_DIM_CAP) -> FilterState:
    """Incremental ML update evaluated with the explicit L x L matrix ``B``.

    ``w += B^{-1} x eps / (1 + x^T B^{-1} x)``. Reference form only.
    """
    if state.L > max_dim:
        raise ParameterError(f"dense form disabled for L={state.L} > {max_dim}")
    x, U, c = _iml_inputs(state, x, U, c)
    B = U @ U.T
    B[np.diag_indices_from(B)] += 1.0 / c
    Binv_x = np.linalg.solve(B, x)
    eps = y - x @ state.w
    return state.with_w(state.w + Binv_x * (eps / (1.0 + x @ Binv_x)))


@dataclass(frozen=True)
class ApaParams:
    """Regularized APA step size ``mu``, regularization ``delta`` and order ``P``."""

    mu: float = 1.0
    delta: float = 0.0
    P: int = 1

    def __post_init__(self):
        if not 0.0 <= self.mu <= 1.0:
            raise ParameterError(f"mu must lie in [0, 1], got {self.mu}")
        if not (self.delta >= 0.0 and np.isfinite(self.delta)):
            raise ParameterError(f"delta must be finite and non-negative, got {self.delta}")
        if self.P < 1:
            raise ParameterError(f"P must be >= 1, got {self.P}")


@dataclass(frozen=True)
class RlsParams:
    """Forgetting factor ``eta`` and initial regularization ``delta_init``.

    The inverse-correlation matrix starts at ``I / delta_init``.
    """

    eta: float = 1.0 - 1e-5
    delta_init: float = 1e-2

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise ParameterError(f"eta must lie in (0, 1], got {self.eta}")
        if not self.delta_init > 0.0:
            raise ParameterError(f"delta_init must be positive, got {self.delta_init}")


def apa_update(state: FilterState, window: DataWindow, params: ApaParams) -> FilterState:
    """``w + mu X (X^T X + delta I)^{-1} (y - X^T w)``.

    With ``delta = 0`` and a singular Gram matrix the minimum-norm
    solution is used.
    """
    _check_window(state, window)
    _check_finite(window.X, window.y, state.w)
    if params.mu == 0.0:
        return state
    e = window.y - window.X.T @ state.w
    return state.with_w(_affine_step(state.w, window.X, e, params.delta, params.mu))


def lagrangian_form_update(state: FilterState, window: DataWindow, lam: float,
                           max_dim=DENSE_DIM_CAP) -> FilterState:
    """``(I + lam X X^T)^{-1} (w + lam X y)``, solved as an L x L system."""
    _check_window(state, window)
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if state.L > max_dim:
        raise ParameterError(f"dense form disabled for L={state.L} > {max_dim}")
    X = window.X
    A = lam * (X @ X.T)
    A[np.diag_indices_from(A)] += 1.0
    return state.with_w(np.linalg.solve(A, state.w + lam * (X @ window.y)))


def _sample(state, x):
    x = _as_vector(x, "x")
    if x.size != state.L:
        raise DimensionError(f"x has length {x.size}, expected L={state.L}")
    return x


def lms_update(state: FilterState, x, y, mu: float) -> FilterState:
    x = _sample(state, x)
    return state.with_w(state.w + mu * (y - x @ state.w) * x)


def nlms_update(state: FilterState, x, y, mu: float = 1.0, delta: float = 0.0) -> FilterState:
    """Regularized NLMS: ``w + mu x (y - x^T w) / (||x||^2 + delta)``."""
    x = _sample(state, x)
    if delta < 0:
        raise ParameterError(f"delta must be non-negative, got {delta}")
    denom = x @ x + delta
    if denom == 0.0:
        return state
    return state.with_w(state.w + mu * (y - x @ state.w) / denom * x)


def rls_update(state: FilterState, x, y, params: RlsParams) -> FilterState:
    """Exponentially weighted RLS; the inverse correlation lives in ``state.aux``."""
    x = _sample(state, x)
    Pm = state.aux if state.aux is not None else np.eye(state.L) / params.delta_init
    Px = Pm @ x
    denom = params.eta + x @ Px
    if not denom > 0.0:
        raise NumericalBreakdownError(f"RLS gain denominator {denom} is not positive")
    k = Px / denom
    w = state.w + k * (y - x @ state.w)
    Pm = (Pm - np.outer(k, Px)) / params.eta
    Pm = 0.5 * (Pm + Pm.T)
    return state.with_w(w, aux=Pm)


# ---------------------------------------------------------------------------
# Streaming interface
# ---------------------------------------------------------------------------


class AdaptiveFilter:
    """Base class: a named update rule applied at a fixed sample cadence.

    ``step`` pushes the newest sample into the window and applies
    :meth:`update` whenever ``sample_index`` is a multiple of ``cadence``.
    """

    name = "identity"
    cadence = 1
    order = 1

    def params(self) -> dict:
        return {}

    def initial_state(self, L, w0=None) -> FilterState:
        return FilterState.initial(L, self.order, w0)

    def update(self, state: FilterState) -> FilterState:
        return state

    def step(self, state: FilterState, x, y) -> FilterState:
        state = push_sample(state, x, y)
        if state.sample_index % self.cadence == 0:
            state = self.update(state)
        return state

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


def predict(state: FilterState) -> float:
    """Filter output ``x_t^T w`` for the newest regressor in the window."""
    return float(state.window.X[:, 0] @ state.w)


class Identity(AdaptiveFilter):
    """Never updates; useful as a control."""


class LMS(AdaptiveFilter):
    name = "lms"

    def __init__(self, mu=0.01):
        self.mu = mu

    def params(self):
        return {"mu": self.mu}

    def update(self, state):
        return lms_update(state, state.window.X[:, 0], state.window.y[0], self.mu)


class NLMS(AdaptiveFilter):
    name = "nlms"

    def __init__(self, mu=1.0, delta=0.0):
        self.mu, self.delta = mu, delta

    def params(self):
        return {"mu": self.mu, "delta": self.delta}

    def update(self, state):
        return nlms_update(state, state.window.X[:, 0], state.window.y[0], self.mu, self.delta)


class APA(AdaptiveFilter):
    name = "apa"

    def __init__(self, P=1, mu=1.0, delta=0.0):
        self.apa = ApaParams(mu=mu, delta=delta, P=P)
        self.order = P

    def params(self):
        return {"P": self.apa.P, "mu": self.apa.mu, "delta": self.apa.delta}

    def update(self, state):
        return apa_update(state, state.window, self.apa)


class RLS(AdaptiveFilter):
    name = "rls"

    def __init__(self, eta=1.0 - 1e-5, delta_init=1e-2):
        self.rls = RlsParams(eta=eta, delta_init=delta_init)

    def params(self):
        return {"eta": self.rls.eta, "delta_init": self.rls.delta_init}

    def update(self, state):
        return rls_update(state, state.window.X[:, 0], state.window.y[0], self.rls)


class _MLFilter(AdaptiveFilter):
    def __init__(self, P, confidence: Callable[[FilterState], float]):
        self.order = P
        self.confidence = confidence

    @property
    def name(self):
        prefix = "ga-" if getattr(self.confidence, "genie", False) else ""
        return prefix + self._base

    def params(self):
        return {"P": self.order, "confidence": self.confidence}


class OBML(_MLFilter):
    """Block ML filter; updates once every P samples."""

    _base = "obml"

    @property
    def cadence(self):
        return self.order

    def update(self, state):
        return ga_obml_update(state, state.window, self.confidence(state))


class IML(_MLFilter):
    """Incremental ML filter; updates at every sample."""

    _base = "iml"

    def update(self, state):
        win = state.window
        return ga_iml_update(state, win.X[:, 0], win.y[0], win.U, self.confidence(state))

"""Domain types: channels, sliding data windows, filter state and metrics."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import DimensionError, ParameterError, UndefinedMetricError

#: Reported in place of -inf when a misalignment (or ERLE denominator) is zero.
DB_FLOOR = -400.0


def _as_vector(v, name="vector"):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class Channel:
    """Unknown FIR system ``w_star`` of length L."""

    w_star: np.ndarray

    def __post_init__(self):
        w = _as_vector(self.w_star, "w_star")
        if w.size < 1:
            raise DimensionError("channel must have at least one tap")
        if not np.all(np.isfinite(w)):
            raise ParameterError("channel taps must be finite")
        object.__setattr__(self, "w_star", w)

    @property
    def L(self) -> int:
        return self.w_star.size

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.w_star))


@dataclass(frozen=True)
class DataWindow:
    """The P most recent regressors (columns of ``X``) and outputs ``y``.

    Column 0 is the newest sample. ``U`` and ``v`` are the trailing
    ``P - 1`` columns/entries, i.e. the window minus its newest sample.
    """

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = _as_vector(self.y, "y")
        if X.ndim != 2:
            raise DimensionError(f"X must be an L x P matrix, got shape {X.shape}")
        L, P = X.shape
        if y.size != P:
            raise DimensionError(f"y has {y.size} entries for a window of {P} columns")
        if not 1 <= P <= L:
            raise DimensionError(f"memory order must satisfy 1 <= P <= L, got P={P}, L={L}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @classmethod
    def zeros(cls, L, P):
        return cls(np.zeros((L, P)), np.zeros(P))

    @property
    def L(self) -> int:
        return self.X.shape[0]

    @property
    def P(self) -> int:
        return self.X.shape[1]

    @property
    def U(self) -> np.ndarray:
        return self.X[:, 1:]

    @property
    def v(self) -> np.ndarray:
        return self.y[1:]


@dataclass(frozen=True)
class FilterState:
    """Current estimate ``w``, its data window and the number of samples seen.

    ``aux`` holds algorithm-specific extensions such as the RLS
    inverse-correlation matrix; it is ``None`` for the window-based filters.
    """

    w: np.ndarray
    window: DataWindow
    sample_index: int = 0
    aux: Any = field(default=None, compare=False)

    def __post_init__(self):
        w = _as_vector(self.w, "w")
        if w.size != self.window.L:
            raise DimensionError(f"w has length {w.size}, window has L={self.window.L}")
        if self.sample_index < 0:
            raise ParameterError("sample_index must be non-negative")
        object.__setattr__(self, "w", w)

    @classmethod
    def initial(cls, L, P=1, w0=None):
        """Zero-padded window and ``w = w0`` (zeros by default)."""
        w = np.zeros(L) if w0 is None else np.array(w0, dtype=np.float64)
        return cls(w, DataWindow.zeros(L, P))

    @property
    def L(self) -> int:
        return self.w.size

    @property
    def P(self) -> int:
        return self.window.P

    def with_w(self, w, aux=None):
        return replace(self, w=np.asarray(w, dtype=np.float64), aux=aux if aux is not None else self.aux)


@dataclass(frozen=True)
class ObservationModel:
    """``y_t = x_t^T w* + z_t`` with input std ``sigma_x`` and noise std ``sigma_z``."""

    channel: Channel
    sigma_x: float = 1.0
    sigma_z: float = 0.0

    def __post_init__(self):
        if not self.sigma_x > 0:
            raise ParameterError(f"sigma_x must be positive, got {self.sigma_x}")
        if not self.sigma_z >= 0:
            raise ParameterError(f"sigma_z must be non-negative, got {self.sigma_z}")


def push_sample(state: FilterState, x_new, y_new) -> FilterState:
    """Shift the window by one sample, newest first; the oldest column drops out."""
    x_new = _as_vector(x_new, "x_new")
    if x_new.size != state.L:
        raise DimensionError(f"x_new has length {x_new.size}, expected L={state.L}")
    win = state.window
    X = np.empty_like(win.X)
    X[:, 0] = x_new
    X[:, 1:] = win.X[:, :-1]
    y = np.empty_like(win.y)
    y[0] = y_new
    y[1:] = win.y[:-1]
    return replace(state, window=DataWindow(X, y), sample_index=state.sample_index + 1)


def regressor(x, t, L) -> np.ndarray:
    """Tapped-delay-line vector ``[x[t], x[t-1], ..., x[t-L+1]]``, zero before the start."""
    x = _as_vector(x, "x")
    idx = t - np.arange(L)
    out = np.zeros(L)
    ok = (idx >= 0) & (idx < x.size)
    out[ok] = x[idx[ok]]
    return out


def _coeffs(state_or_w):
    if isinstance(state_or_w, FilterState):
        return state_or_w.w
    return _as_vector(state_or_w, "w")


def _truth(channel_or_w):
    if isinstance(channel_or_w, Channel):
        return channel_or_w.w_star
    return _as_vector(channel_or_w, "w_star")


def misalignment(state, channel) -> float:
    """Squared distance ``||w - w*||^2``."""
    w, ws = _coeffs(state), _truth(channel)
    if w.shape != ws.shape:
        raise DimensionError(f"estimate has length {w.size}, channel has length {ws.size}")
    d = w - ws
    return float(d @ d)


def to_db(ratio, power=True):
    """``10 log10`` (``power=True``) or ``20 log10`` of a non-negative ratio, floored."""
    ratio = np.asarray(ratio, dtype=np.float64)
    with np.errstate(divide="ignore"):
        out = (10.0 if power else 20.0) * np.log10(ratio)
    out = np.maximum(out, DB_FLOOR)
    return float(out) if out.ndim == 0 else out


def normalized_misalignment_db(state, channel) -> float:
    """``20 log10(||w - w*|| / ||w*||)``, floored at :data:`DB_FLOOR`."""
    ws = _truth(channel)
    n2 = float(ws @ ws)
    if n2 == 0.0:
        raise UndefinedMetricError("normalized misalignment is undefined for a zero channel")
    return to_db(misalignment(state, channel) / n2)


def normalized_a(r, model: ObservationModel) -> float:
    """Normalized misalignment ``r * sigma_x^2 / sigma_z^2``."""
    if model.sigma_z == 0:
        raise ZeroDivisionError("normalized misalignment requires sigma_z > 0")
    if r < 0:
        raise ParameterError("misalignment must be non-negative")
    return r * model.sigma_x**2 / model.sigma_z**2

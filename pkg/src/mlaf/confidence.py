"""Sources of the confidence parameter ``c_t`` used by the ML filters.

A confidence source is any callable ``source(state) -> c``. The genie source
knows the true channel; the delay-and-extrapolate source only looks at the
leading taps of a filter that was lengthened by ``M`` known-zero taps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Channel, FilterState, _as_vector, misalignment
from .errors import ConfigurationError, DimensionError, ParameterError
from .linalg import C_MAX, check_confidence, clamp_c


@dataclass(frozen=True)
class FixedConfidence:
    """Constant ``c`` (clamped); e.g. ``FixedConfidence(C_MAX)`` for noiseless runs."""

    c: float
    genie = False

    def __post_init__(self):
        object.__setattr__(self, "c", check_confidence(self.c))

    def __call__(self, state):
        return self.c


@dataclass(frozen=True)
class GenieConfidence:
    """Exact ``c_t = ||w_t - w*||^2 / (L sigma_z^2)`` from the true channel."""

    channel: Channel
    sigma_z: float
    genie = True

    def __post_init__(self):
        if not self.sigma_z >= 0:
            raise ParameterError(f"sigma_z must be non-negative, got {self.sigma_z}")

    @property
    def L(self):
        return self.channel.L

    def __call__(self, state):
        return genie_c(state, self)


@dataclass(frozen=True)
class DelayExtrapolateConfidence:
    """Estimate ``c_t`` from the first ``M`` taps of an (L + M)-tap filter.

    For ``t < M`` the estimate is ``1 / sigma_z^2``; afterwards it is
    ``sum(w[:M]**2) / (M sigma_z^2)``.
    """

    M: int
    sigma_z: float
    genie = False

    def __post_init__(self):
        if self.M < 1:
            raise ConfigurationError(f"delay M must be >= 1, got {self.M}")
        if not self.sigma_z >= 0:
            raise ParameterError(f"sigma_z must be non-negative, got {self.sigma_z}")

    def __call__(self, state):
        # sample_index counts pushed samples; the current sample is index - 1
        return extrapolate_c(state, self, max(state.sample_index - 1, 0))


def genie_c(state, genie: GenieConfidence) -> float:
    r = misalignment(state, genie.channel)
    if genie.sigma_z == 0:
        # c is undefined without noise; large c behaves as unregularized APA
        return C_MAX
    return clamp_c(r / (genie.L * genie.sigma_z**2))


def extrapolate_c(extended_state, cfg: DelayExtrapolateConfidence, t: int) -> float:
    w = extended_state.w if isinstance(extended_state, FilterState) else _as_vector(extended_state)
    if cfg.M >= w.size:
        raise ConfigurationError(f"delay M={cfg.M} must be smaller than the filter length {w.size}")
    if t < 0:
        raise ParameterError("sample index must be non-negative")
    if cfg.sigma_z == 0:
        return C_MAX
    if t < cfg.M:
        return clamp_c(1.0 / cfg.sigma_z**2)
    lead = w[: cfg.M]
    return clamp_c(float(lead @ lead) / (cfg.M * cfg.sigma_z**2))


@dataclass(frozen=True)
class DelayedStream:
    """Streams for the extended identification problem.

    Sample ``t`` pairs the unchanged output ``y[t]`` with the look-ahead
    regressor ``[x[t+M], ..., x[t-L+1]]`` of length L + M, whose true
    channel is ``w_star = [0_M, w*]``. Equivalently the output is delayed
    by ``M`` samples (``y_delayed``) and processing starts at ``t0 = M``.
    """

    x: np.ndarray
    y: np.ndarray
    w_star: np.ndarray
    M: int

    @property
    def t0(self):
        return self.M

    @property
    def n_taps(self):
        return self.w_star.size

    @property
    def y_delayed(self):
        return np.concatenate([np.zeros(self.M), self.y])

    def regressor(self, t):
        """Extended input vector for output sample ``t`` (zero before the start)."""
        n = self.n_taps
        idx = t + self.M - np.arange(n)
        out = np.zeros(n)
        ok = idx >= 0
        out[ok] = self.x[idx[ok]]
        return out


def extend_channel(w_star, M) -> np.ndarray:
    if M < 1:
        raise ConfigurationError(f"delay M must be >= 1, got {M}")
    w = w_star.w_star if isinstance(w_star, Channel) else _as_vector(w_star, "w_star")
    return np.concatenate([np.zeros(M), w])


def extend_for_delay(x, y, w_star, M) -> DelayedStream:
    """Lengthen the identification problem by ``M`` leading taps that are known to be zero.

    ``x`` must extend at least ``M`` samples beyond ``y`` (the filter sees
    the input ``M`` samples ahead of the output it is matched against).
    """
    x, y = _as_vector(x, "x"), _as_vector(y, "y")
    w_ext = extend_channel(w_star, M)
    if x.size < y.size + M:
        raise ConfigurationError(
            f"input has {x.size} samples; {y.size} outputs with delay {M} need {y.size + M}")
    return DelayedStream(x[: y.size + M], y, w_ext, M)

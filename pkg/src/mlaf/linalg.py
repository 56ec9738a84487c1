"""Small dense solves shared by the filters, the estimators and the kernels."""

import numpy as np
from scipy.linalg import cho_solve

from .errors import ParameterError

#: Confidence parameters are clamped to this interval before use.
C_MIN = 1e-12
C_MAX = 1e12

#: A Cholesky pivot at or below ``PIVOT_RTOL * max(diag(A))`` counts as a
#: factorization failure and triggers the minimum-norm fallback.
PIVOT_RTOL = 1e-14


def clamp_c(c):
    """Clamp a confidence value to ``[C_MIN, C_MAX]``; NaN is rejected."""
    c = float(c)
    if np.isnan(c):
        raise ParameterError("confidence parameter is NaN")
    return min(max(c, C_MIN), C_MAX)


def check_confidence(c):
    """Validate a user-supplied confidence parameter and clamp it."""
    c = float(c)
    if not np.isfinite(c) or c <= 0.0:
        raise ParameterError(f"confidence must be positive and finite, got {c!r}")
    return clamp_c(c)


def solve_psd(A, b):
    """Solve ``A s = b`` for a symmetric positive semi-definite matrix.

    Uses a Cholesky factorization when it is numerically sound and the
    minimum-norm least-squares solution (pseudo-inverse semantics)
    otherwise, e.g. for the Gram matrix of a window with zero columns.
    """
    A = np.asarray(A, dtype=np.float64)
    diag = np.diag(A)
    scale = diag.max() if diag.size else 0.0
    if scale > 0.0:
        try:
            C = np.linalg.cholesky(A)
        except np.linalg.LinAlgError:
            C = None
        if C is not None and np.min(np.diag(C)) ** 2 > PIVOT_RTOL * scale:
            return cho_solve((C, True), b)
    return np.linalg.lstsq(A, b, rcond=None)[0]

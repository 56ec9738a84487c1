"""Hot-loop kernels, compiled when available.

The Cython extension ``mlaf._kernels`` is preferred; if it was not built
(or ``MLAF_PURE_PYTHON=1`` is set) the numpy implementation in
``mlaf._kernels_py`` is used instead. Both expose the same functions.
"""

import os

from . import _kernels_py

REG_FIXED = _kernels_py.REG_FIXED
REG_GENIE = _kernels_py.REG_GENIE
REG_EXTRAPOLATE = _kernels_py.REG_EXTRAPOLATE

_impl = _kernels_py
if os.environ.get("MLAF_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # noqa: F811
    except ImportError:
        pass

#: "cython" or "python"
BACKEND = "python" if _impl is _kernels_py else "cython"

run_affine = _impl.run_affine
run_lms = _impl.run_lms
run_rls = _impl.run_rls
bound_sequence = _impl.bound_sequence
bound_final = _impl.bound_final


def backends():
    """Map of backend name to implementation module, for benchmarks and tests."""
    out = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        return out
    out["cython"] = _kernels
    return out

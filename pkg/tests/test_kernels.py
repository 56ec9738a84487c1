import os
import subprocess
import sys

import numpy as np
import pytest

from mlaf import kernels
from mlaf.confidence import DelayExtrapolateConfidence, GenieConfidence, extend_for_delay
from mlaf.core import Channel, DataWindow, FilterState, push_sample, regressor
from mlaf.errors import NumericalBreakdownError
from mlaf.filters import (
    ApaParams,
    RlsParams,
    apa_update,
    ga_iml_update,
    ga_obml_update,
    lms_update,
    rls_update,
)

BACKENDS = kernels.backends()
ALL = pytest.mark.parametrize("impl", sorted(BACKENDS), ids=sorted(BACKENDS))


def _stream(rng, L, T, sz=0.05):
    w = rng.standard_normal(L)
    x = rng.standard_normal(T)
    y = np.convolve(x, w)[:T] + sz * rng.standard_normal(T)
    return w, x, y


def _loop(L, P, x, y, w_true, update, block, state=None, regs=None):
    """Reference streaming loop built from the library update rules."""
    state = state if state is not None else FilterState.initial(L, P)
    regs = regs if regs is not None else (lambda t: regressor(x, t, L))
    sq = []
    for t in range(len(y)):
        state = push_sample(state, regs(t), y[t])
        if not block or state.sample_index % P == 0:
            state = update(state)
        sq.append(np.sum((state.w - w_true) ** 2))
    return state.w, np.array(sq)


@ALL
@pytest.mark.parametrize("block", [True, False])
def test_apa_kernel_matches_loop(impl, block, rng):
    L, P, T = 10, 3, 80
    w, x, y = _stream(rng, L, T)
    mod = BACKENDS[impl]
    wk, sq, _ = mod.run_affine(x, y, L, P, 0.6, kernels.REG_FIXED, 0.2, False, block, w, 0.0, 0, 0)
    wl, sql = _loop(L, P, x, y, w, lambda s: apa_update(s, s.window, ApaParams(0.6, 0.2, P)), block)
    np.testing.assert_allclose(wk, wl, rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(sq, sql, rtol=1e-9, atol=1e-14)


@ALL
def test_genie_obml_kernel_matches_loop(impl, rng):
    L, P, T, sz = 12, 4, 120, 0.05
    w, x, y = _stream(rng, L, T, sz)
    genie = GenieConfidence(Channel(w), sz)
    wk, sq, _ = BACKENDS[impl].run_affine(x, y, L, P, 1.0, kernels.REG_GENIE, 0.0, False, True,
                                           w, sz**2, 0, 0)
    wl, sql = _loop(L, P, x, y, w, lambda s: ga_obml_update(s, s.window, genie(s)), True)
    np.testing.assert_allclose(wk, wl, rtol=1e-9)
    np.testing.assert_allclose(sq, sql, rtol=1e-8)


@ALL
def test_genie_iml_kernel_matches_loop(impl, rng):
    L, P, T, sz = 12, 4, 120, 0.05
    w, x, y = _stream(rng, L, T, sz)
    genie = GenieConfidence(Channel(w), sz)
    wk, sq, _ = BACKENDS[impl].run_affine(x, y, L, P, 1.0, kernels.REG_GENIE, 0.0, True, False,
                                           w, sz**2, 0, 0)
    wl, sql = _loop(L, P, x, y, w, lambda s: ga_iml_update(
        s, s.window.X[:, 0], s.window.y[0], s.window.U, genie(s)), False)
    np.testing.assert_allclose(wk, wl, rtol=1e-9)
    np.testing.assert_allclose(sq, sql, rtol=1e-8)


@ALL
def test_practical_iml_kernel_matches_loop(impl, rng):
    L, M, P, T, sz = 10, 3, 3, 100, 0.05
    w = rng.standard_normal(L)
    x = rng.standard_normal(T + M)
    y = np.convolve(x, w)[:T] + sz * rng.standard_normal(T)
    ds = extend_for_delay(x, y, w, M)
    n = L + M
    wk, sq, _ = BACKENDS[impl].run_affine(ds.x, ds.y_delayed, n, P, 1.0, kernels.REG_EXTRAPOLATE,
                                           0.0, True, False, ds.w_star, sz**2, M, M, ds.t0)
    # history columns before the first output carry input but zero output
    hist = np.column_stack([ds.regressor(-j) for j in range(1, P + 1)])
    st0 = FilterState(np.zeros(n), DataWindow(hist, np.zeros(P)))
    conf = DelayExtrapolateConfidence(M, sz)
    wl, _ = _loop(n, P, None, y, ds.w_star, lambda s: ga_iml_update(
        s, s.window.X[:, 0], s.window.y[0], s.window.U, conf(s)), False, st0, ds.regressor)
    np.testing.assert_allclose(wk, wl, rtol=1e-9)
    assert sq.shape == (T,)
    assert sq[-1] == pytest.approx(np.sum((wk[M:] - w) ** 2))


@ALL
def test_lms_and_rls_kernels_match_loop(impl, rng):
    L, T = 6, 60
    w, x, y = _stream(rng, L, T)
    mod = BACKENDS[impl]
    wk, sq, _ = mod.run_lms(x, y, L, 0.05, w, 0)
    wl, sql = _loop(L, 1, x, y, w, lambda s: lms_update(s, s.window.X[:, 0], s.window.y[0], 0.05), False)
    np.testing.assert_allclose(wk, wl, rtol=1e-12)
    np.testing.assert_allclose(sq, sql, rtol=1e-10)
    params = RlsParams(0.999, 0.1)
    wk, sq, _ = mod.run_rls(x, y, L, 0.999, 0.1, w, 0)
    wl, sql = _loop(L, 1, x, y, w, lambda s: rls_update(s, s.window.X[:, 0], s.window.y[0], params), False)
    np.testing.assert_allclose(wk, wl, rtol=1e-9)
    np.testing.assert_allclose(sq, sql, rtol=1e-8, atol=1e-14)


@ALL
def test_predictions_use_pre_update_weights(impl, rng):
    L, T = 5, 30
    w, x, y = _stream(rng, L, T)
    _, _, yhat = BACKENDS[impl].run_lms(x, y, L, 0.0, w, 0)
    np.testing.assert_array_equal(yhat, 0.0)


@ALL
def test_rls_breakdown_is_reported(impl):
    x = np.ones(5)
    with pytest.raises(NumericalBreakdownError):
        BACKENDS[impl].run_rls(x, x, 2, 1.0, -1.0, np.zeros(2), 0)


@ALL
def test_singular_gram_falls_back(impl):
    # constant input makes consecutive regressors nearly identical
    x = np.ones(20)
    w, sq, _ = BACKENDS[impl].run_affine(x, 2 * x, 3, 3, 1.0, kernels.REG_FIXED, 0.0, False, False,
                                          np.zeros(3), 0.0, 0, 0)
    assert np.all(np.isfinite(w)) and np.all(np.isfinite(sq))


def test_backends_agree(rng):
    if len(BACKENDS) < 2:
        pytest.skip("compiled kernels not built")
    py, cy = BACKENDS["python"], BACKENDS["cython"]
    L, P, T, sz = 16, 4, 300, 0.1
    w, x, y = _stream(rng, L, T, sz)
    for args in ((kernels.REG_GENIE, 0.0, True, False), (kernels.REG_GENIE, 0.0, False, True),
                 (kernels.REG_FIXED, 0.5, False, False), (kernels.REG_EXTRAPOLATE, 0.0, True, False)):
        a = py.run_affine(x, y, L, P, 1.0, *args, w, sz**2, 2, 0, 0)
        b = cy.run_affine(x, y, L, P, 1.0, *args, w, sz**2, 2, 0, 0)
        for u, v in zip(a, b):
            np.testing.assert_allclose(u, v, rtol=1e-8, atol=1e-13)
    np.testing.assert_allclose(py.bound_sequence(1e6, 0.003, 5000), cy.bound_sequence(1e6, 0.003, 5000),
                               rtol=1e-12)
    assert py.bound_final(3.0, 0.01, 1000) == pytest.approx(cy.bound_final(3.0, 0.01, 1000), rel=1e-12)


def test_pure_python_switch():
    env = dict(os.environ, MLAF_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from mlaf import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"

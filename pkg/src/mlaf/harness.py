"""Monte-Carlo simulation engine.

A trial draws a channel, an input signal and measurement noise from its
seeds, runs one algorithm over the stream with the compiled (or numpy)
kernels and records the normalized misalignment after every sample.
Experiments repeat trials with derived seeds and average the dB traces.
"""

from __future__ import annotations

import hashlib
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from . import kernels
from .confidence import extend_for_delay
from .confidence import GenieConfidence
from .core import DB_FLOOR, Channel, DataWindow, FilterState, to_db
from .errors import ConfigurationError, DomainError, NumericalBreakdownError, ParameterError
from .filters import ApaParams, apa_update, ga_iml_update, ga_obml_update, lms_update
from .theory import gamma_L
from .wavio import read_wav

ERLE_WINDOW = 1024
ERLE_CAP = 400.0

ALGORITHMS = ("identity", "lms", "nlms", "apa", "rls", "ga-obml", "ga-iml", "obml", "iml")


# ---------------------------------------------------------------------------
# Sources
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InputSource:
    """Far-end signal generator: ``iid``, ``ar1`` or ``wav``."""

    kind: str = "iid"
    sigma_x: float = 1.0
    rho: float = 0.95
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("iid", "ar1", "wav"):
            raise ConfigurationError(f"unknown input kind {self.kind!r}")
        if self.kind == "ar1" and not -1.0 < self.rho < 1.0:
            raise ConfigurationError(f"AR(1) coefficient must lie in (-1, 1), got {self.rho}")
        if self.kind == "wav" and not self.path:
            raise ConfigurationError("wav input needs a path")
        if not self.sigma_x > 0:
            raise ConfigurationError("sigma_x must be positive")

    @classmethod
    def parse(cls, text, sigma_x=1.0):
        """``iid``, ``ar1:RHO`` or ``wav:PATH``."""
        kind, _, arg = text.partition(":")
        if kind == "iid" and not arg:
            return cls("iid", sigma_x)
        if kind == "ar1":
            try:
                rho = float(arg) if arg else 0.95
            except ValueError:
                raise ConfigurationError(f"bad AR(1) coefficient {arg!r}") from None
            return cls("ar1", sigma_x, rho=rho)
        if kind == "wav" and arg:
            return cls("wav", sigma_x, path=arg)
        raise ConfigurationError(f"cannot parse input source {text!r}")

    @property
    def white(self):
        return self.kind == "iid"

    def generate(self, n, rng):
        if self.kind == "iid":
            return self.sigma_x * rng.standard_normal(n)
        if self.kind == "ar1":
            e = rng.standard_normal(n)
            e[0] /= np.sqrt(1.0 - self.rho**2)  # stationary start
            return self.sigma_x * np.sqrt(1.0 - self.rho**2) * lfilter([1.0], [1.0, -self.rho], e)
        _, data = read_wav(self.path)
        if data.size < n:
            raise ConfigurationError(f"{self.path} has {data.size} samples, {n} needed")
        start = int(rng.integers(0, data.size - n + 1))
        return data[start:start + n].copy()


def gen_channel(L, seed) -> Channel:
    """Unit-norm random channel with an exponentially decaying envelope ``exp(-3 i / L)``."""
    if L < 1:
        raise ParameterError("L must be >= 1")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(L) * np.exp(-3.0 * np.arange(L) / L)
    return Channel(w / np.linalg.norm(w))


def calibrate_noise(channel, snr_db, sigma_x=1.0, x=None):
    """Noise std giving ``10 log10(sigma_y^2 / sigma_z^2) = snr_db``.

    ``sigma_y`` is ``sigma_x ||w*||`` for white input; when a signal ``x``
    is given, it is measured on the clean echo over its first ``10 L``
    samples instead.
    """
    w = channel.w_star
    if x is None:
        sigma_y = sigma_x * np.linalg.norm(w)
    else:
        prefix = np.asarray(x[: 10 * w.size], dtype=np.float64)
        echo = lfilter(w, [1.0], prefix)
        sigma_y = np.sqrt(np.mean(echo**2))
    return float(sigma_y * 10.0 ** (-snr_db / 20.0))


# ---------------------------------------------------------------------------
# Configuration and traces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AlgoSpec:
    """Algorithm name plus every tunable; irrelevant fields are ignored."""

    name: str
    P: int = 1
    mu: float = 1.0
    delta: float = 0.0
    rls_eta: float = 1.0 - 1e-5
    rls_delta: float = 1e-2

    def __post_init__(self):
        if self.name not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.name!r}; choose from {ALGORITHMS}")
        if self.P < 1:
            raise ConfigurationError("P must be >= 1")

    @property
    def practical(self):
        return self.name in ("obml", "iml")

    @property
    def label(self):
        return self.name


@dataclass(frozen=True)
class TrialConfig:
    L: int
    algo: AlgoSpec
    snr_db: float = 40.0
    source: InputSource = field(default_factory=InputSource)
    T: int = 10_000
    seed: int = 0
    channel_seed: int | None = None
    M: int | None = None
    trial: int = 0
    record_erle: bool = False

    def __post_init__(self):
        if self.L < 1:
            raise ConfigurationError("L must be >= 1")
        if self.T < self.L:
            raise ConfigurationError(f"need at least L={self.L} samples, got T={self.T}")
        if self.algo.P > self.L:
            raise ConfigurationError(f"P={self.algo.P} exceeds L={self.L}")
        if self.delay < 1:
            raise ConfigurationError("delay M must be >= 1")
        for s in (self.seed, self.channel_seed):
            if s is not None and not 0 <= s < 2**64:
                raise ConfigurationError(f"seeds must be unsigned 64-bit integers, got {s}")

    @property
    def delay(self):
        """Delay used by the practical variants; ``L // 5`` unless given."""
        return self.M if self.M is not None else max(1, self.L // 5)

    def seeds(self):
        """Independent seed sequences for (channel, input, noise)."""
        cseed = self.seed if self.channel_seed is None else self.channel_seed
        ch = np.random.SeedSequence([cseed, self.trial, 0])
        data = np.random.SeedSequence([self.seed, self.trial, 1])
        x_seq, z_seq = data.spawn(2)
        return ch, x_seq, z_seq


@dataclass
class TrialTrace:
    misalignment_db: np.ndarray
    erle_db: np.ndarray | None
    wall_time: float
    noise_checksum: str
    sigma_z: float
    config: TrialConfig | None = None

    @property
    def final_db(self):
        return float(self.misalignment_db[-1])


@dataclass(frozen=True)
class Streams:
    channel: Channel
    x: np.ndarray
    echo: np.ndarray
    noise: np.ndarray
    sigma_z: float

    @property
    def y(self):
        return self.echo + self.noise


def make_streams(cfg: TrialConfig) -> Streams:
    """Channel, input, clean echo and scaled noise; ``T + M`` samples so every algorithm shares them."""
    ch_seq, x_seq, z_seq = cfg.seeds()
    channel = gen_channel(cfg.L, ch_seq)
    n = cfg.T + cfg.delay
    x = cfg.source.generate(n, np.random.default_rng(x_seq))
    sigma_z = calibrate_noise(channel, cfg.snr_db, cfg.source.sigma_x,
                              None if cfg.source.white else x)
    echo = lfilter(channel.w_star, [1.0], x)
    noise = sigma_z * np.random.default_rng(z_seq).standard_normal(n)
    return Streams(channel, x, echo, noise, sigma_z)


def sliding_erle(echo, yhat, window=ERLE_WINDOW):
    """ERLE over trailing windows of ``window`` samples (shorter at the start)."""
    echo = np.asarray(echo, dtype=np.float64)
    res = echo - np.asarray(yhat, dtype=np.float64)
    ce = np.concatenate([[0.0], np.cumsum(echo**2)])
    cr = np.concatenate([[0.0], np.cumsum(res**2)])
    hi = np.arange(1, echo.size + 1)
    lo = np.maximum(hi - window, 0)
    num = ce[hi] - ce[lo]
    den = np.maximum(cr[hi] - cr[lo], 0.0)
    return _erle_db(num, den)


def _erle_db(num, den):
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 10.0 * np.log10(num / den)
    out = np.where(den == 0.0, np.where(num > 0, ERLE_CAP, 0.0), out)
    return np.clip(out, DB_FLOOR, ERLE_CAP)


def erle(echo, yhat):
    """``10 log10(sum echo^2 / sum (echo - yhat)^2)`` over one window, capped at 400 dB."""
    echo = np.asarray(echo, dtype=np.float64)
    res = echo - np.asarray(yhat, dtype=np.float64)
    return float(_erle_db(np.array(echo @ echo), np.array(res @ res)))


def _run_kernel(algo: AlgoSpec, streams: Streams, cfg: TrialConfig):
    L, T, M = cfg.L, cfg.T, cfg.delay
    w = streams.channel.w_star
    x, y = streams.x[:T], streams.y[:T]
    sz2 = streams.sigma_z**2
    K = kernels
    name = algo.name
    if name == "identity":
        return np.full(T, w @ w), np.zeros(T)
    if name == "lms":
        _, se, yh = K.run_lms(x, y, L, algo.mu, w, 0)
    elif name == "rls":
        _, se, yh = K.run_rls(x, y, L, algo.rls_eta, algo.rls_delta, w, 0)
    elif name == "nlms":
        _, se, yh = K.run_affine(x, y, L, 1, algo.mu, K.REG_FIXED, algo.delta, False, False, w, sz2, 0, 0)
    elif name == "apa":
        _, se, yh = K.run_affine(x, y, L, algo.P, algo.mu, K.REG_FIXED, algo.delta, False, False, w, sz2, 0, 0)
    elif name in ("ga-obml", "ga-iml"):
        iml = name == "ga-iml"
        _, se, yh = K.run_affine(x, y, L, algo.P, 1.0, K.REG_GENIE, 0.0, iml, not iml, w, sz2, 0, 0)
    else:
        iml = name == "iml"
        ds = extend_for_delay(streams.x, y, w, M)
        if algo.P > L + M:
            raise ConfigurationError("P exceeds the extended filter length")
        _, se, yh = K.run_affine(ds.x, ds.y_delayed, L + M, algo.P, 1.0, K.REG_EXTRAPOLATE, 0.0,
                                 iml, not iml, ds.w_star, sz2, M, M, ds.t0)
    return se, yh


def run_trial(cfg: TrialConfig) -> TrialTrace:
    """Run one seeded trial; deterministic given the config."""
    start = time.perf_counter()
    if cfg.algo.name in ("ga-obml", "obml"):
        try:
            gamma_L(cfg.L, cfg.algo.P)
        except DomainError as exc:
            # the bound's hypothesis; simulations stay meaningful without it
            warnings.warn(f"one-step bound does not apply: {exc}", RuntimeWarning, stacklevel=2)
    streams = make_streams(cfg)
    try:
        sqerr, yhat = _run_kernel(cfg.algo, streams, cfg)
    except NumericalBreakdownError as exc:
        raise NumericalBreakdownError(
            f"{exc} [algo={cfg.algo.name} seed={cfg.seed} trial={cfg.trial} L={cfg.L}]") from exc
    w2 = streams.channel.w_star @ streams.channel.w_star
    mis_db = to_db(sqerr / w2)
    erle_db = sliding_erle(streams.echo[: cfg.T], yhat) if cfg.record_erle else None
    checksum = hashlib.sha256(streams.noise[: cfg.T].tobytes()).hexdigest()[:16]
    return TrialTrace(np.atleast_1d(mis_db), erle_db, time.perf_counter() - start,
                      checksum, streams.sigma_z, cfg)


@dataclass
class ExperimentResult:
    """dB-domain means across trials; per-trial traces are kept for re-aggregation."""

    config: TrialConfig
    traces: list

    @property
    def mean_misalignment_db(self):
        return np.mean([t.misalignment_db for t in self.traces], axis=0)

    @property
    def mean_erle_db(self):
        if any(t.erle_db is None for t in self.traces):
            return None
        return np.mean([t.erle_db for t in self.traces], axis=0)

    @property
    def finals_db(self):
        return np.array([t.final_db for t in self.traces])

    def samples_to_reach(self, level_db):
        """First sample index where the mean trace is at or below ``level_db``; None if never."""
        hit = np.flatnonzero(self.mean_misalignment_db <= level_db)
        return int(hit[0]) if hit.size else None


def run_experiment(cfgs, trials, jobs=1):
    """Run ``trials`` trials of every config.

    Trial ``k`` of a config uses ``replace(cfg, trial=k)``; results are
    assembled in config/trial order regardless of ``jobs``.
    """
    if trials < 1:
        raise ConfigurationError("trials must be >= 1")
    cfgs = list(cfgs)
    work = [replace(c, trial=k) for c in cfgs for k in range(trials)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            traces = list(pool.map(run_trial, work))
    else:
        traces = [run_trial(c) for c in work]
    return [ExperimentResult(c, traces[i * trials:(i + 1) * trials]) for i, c in enumerate(cfgs)]


# ---------------------------------------------------------------------------
# Independent-blocks mode
# ---------------------------------------------------------------------------


def independent_block_step(state: FilterState, algo: AlgoSpec, channel: Channel,
                           sigma_x, sigma_z, rng) -> FilterState:
    """One update on a freshly drawn window with i.i.d. Gaussian entries and noise.

    Columns are independent (no shift structure), matching the hypothesis
    of the one-step misalignment bound.
    """
    L, P = channel.L, algo.P
    X = sigma_x * rng.standard_normal((L, P))
    y = X.T @ channel.w_star + sigma_z * rng.standard_normal(P)
    win = DataWindow(X, y)
    state = replace(state, window=win, sample_index=state.sample_index + P)
    genie = GenieConfidence(channel, sigma_z)
    if algo.name == "ga-obml":
        return ga_obml_update(state, win, genie(state))
    if algo.name == "ga-iml":
        return ga_iml_update(state, X[:, 0], y[0], X[:, 1:], genie(state))
    if algo.name in ("apa", "nlms"):
        return apa_update(state, win, ApaParams(algo.mu, algo.delta, P))
    if algo.name == "lms":
        return lms_update(state, X[:, 0], y[0], algo.mu)
    if algo.name == "identity":
        return state
    raise ConfigurationError(f"{algo.name} is not supported in independent-blocks mode")


def run_independent_blocks(L, algo: AlgoSpec, blocks, snr_db=40.0, sigma_x=1.0, seed=0):
    """Misalignment (dB) after each of ``blocks`` independent-window updates."""
    ch_seq, data_seq = np.random.SeedSequence(seed).spawn(2)
    channel = gen_channel(L, ch_seq)
    sigma_z = calibrate_noise(channel, snr_db, sigma_x)
    rng = np.random.default_rng(data_seq)
    state = FilterState.initial(L, algo.P)
    out = np.empty(blocks)
    w2 = channel.w_star @ channel.w_star
    for b in range(blocks):
        state = independent_block_step(state, algo, channel, sigma_x, sigma_z, rng)
        d = state.w - channel.w_star
        out[b] = to_db((d @ d) / w2)
    return out


def one_step_misalignment(L, P, r, draws, sigma_x=1.0, sigma_z=1.0, seed=0):
    """Sample ``r_{t+1}`` after one GA-OBML step from a fixed ``w_t`` with ``||w_t - w*||^2 = r``.

    The window and noise are redrawn for every sample; ``w*`` and ``w_t``
    stay fixed.
    """
    rng = np.random.default_rng(seed)
    w_star = rng.standard_normal(L)
    direction = rng.standard_normal(L)
    w_t = w_star + np.sqrt(r) * direction / np.linalg.norm(direction)
    channel = Channel(w_star)
    algo = AlgoSpec("ga-obml", P=P)
    base = FilterState(w_t, FilterState.initial(L, P).window)
    out = np.empty(draws)
    for k in range(draws):
        new = independent_block_step(base, algo, channel, sigma_x, sigma_z, rng)
        d = new.w - w_star
        out[k] = d @ d
    return out


def offline_ls_monte_carlo(L, s, a0, deltas, trials, sigma_x=1.0, sigma_z=1.0, seed=0):
    """Normalized misalignment of the offline regularized LS estimate, per trial and ``delta``.

    Each trial draws ``w*``, an initial guess ``w0`` with
    ``w0 - w* ~ N(0, (r0 / L) I)`` where ``r0 = a0 sigma_z^2 / sigma_x^2``,
    an L x s Gaussian data matrix and noisy outputs. All ``deltas`` are
    evaluated on the same draw, so columns can be compared pairwise.

    Returns
    -------
    ndarray of shape (trials, len(deltas))
    """
    from .theory import offline_regularized_ls

    rng = np.random.default_rng(seed)
    r0 = a0 * sigma_z**2 / sigma_x**2
    out = np.empty((trials, len(deltas)))
    for k in range(trials):
        w_star = rng.standard_normal(L)
        w0 = w_star + np.sqrt(r0 / L) * rng.standard_normal(L)
        X = sigma_x * rng.standard_normal((L, s))
        y = X.T @ w_star + sigma_z * rng.standard_normal(s)
        for j, d in enumerate(deltas):
            err = offline_regularized_ls(X, y, w0, d) - w_star
            out[k, j] = (err @ err) * sigma_x**2 / sigma_z**2
    return out

"""Command-line interface: ``mlaf {simulate,bounds,compare,selftest}``.

Every subcommand writes plain CSV (``.`` decimal point, ``\\n`` newlines).
Settings come from flags, then an optional ``--config`` file of
``key=value`` lines, then built-in defaults.

Exit codes: 0 success, 2 usage error, 3 numerical breakdown, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import sys

import numpy as np

from .errors import (
    ConfigurationError,
    DomainError,
    MlafError,
    NumericalBreakdownError,
    ParameterError,
    WavFormatError,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BREAKDOWN = 3
EXIT_IO = 4

SIM_ALGOS = ("lms", "nlms", "apa", "rls", "ga-obml", "ga-iml", "obml", "iml")
SINGLE_SAMPLE = ("lms", "nlms", "rls")

SIM_DEFAULTS = {
    "algo": ["ga-iml"],
    "L": 128,
    "P": None,  # 4 for the windowed algorithms
    "snr_db": 40.0,
    "input": "iid",
    "samples": 20_000,
    "trials": 10,
    "seed": 0,
    "delay_M": None,
    "mu": None,  # 1 for nlms/apa, 0.01 for lms
    "delta": 0.0,
    "rls_eta": 1.0 - 1e-5,
    "rls_delta": 1e-2,
    "out": None,
    "record_erle": False,
    "jobs": 1,
}

BOUNDS_DEFAULTS = {
    "L": 1000,
    "P": 4,
    "a0": [1.0, 1e3, 1e6],
    "samples": 1_000_000,
    "points": 200,
    "out": None,
}

LIST_KEYS = {"algo": str, "a0": float}
SCALAR_TYPES = {
    "L": int, "P": int, "snr_db": float, "input": str, "samples": int, "trials": int,
    "seed": int, "delay_M": int, "mu": float, "delta": float, "rls_eta": float,
    "rls_delta": float, "out": str, "jobs": int, "points": int,
}


class UsageError(MlafError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _parse_bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


def read_config(path, defaults):
    """Parse a ``key=value`` file; keys use flag names with ``-`` or ``_``."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc.strerror}") from exc
    out = {}
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().lstrip("-").replace("-", "_")
        value = value.strip()
        if not sep or key not in defaults:
            raise UsageError(f"{path}:{n}: unknown or malformed entry {line!r}")
        try:
            if key in LIST_KEYS:
                out[key] = [LIST_KEYS[key](v.strip()) for v in value.split(",") if v.strip()]
            elif key == "record_erle":
                out[key] = _parse_bool(value)
            else:
                out[key] = SCALAR_TYPES[key](value)
        except ValueError:
            raise UsageError(f"{path}:{n}: bad value for {key}: {value!r}") from None
    return out


def resolve(args, defaults):
    """Merge flags over config over defaults."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        merged.update(read_config(args.config, defaults))
    for key in defaults:
        v = getattr(args, key, None)
        if v is not None and v is not False:
            merged[key] = v
    return merged


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def _sim_flags(p):
    p.add_argument("--algo", action="append", choices=SIM_ALGOS,
                   help="algorithm to run (repeatable)")
    p.add_argument("--L", type=int, help="filter length")
    p.add_argument("--P", type=int, help="memory order")
    p.add_argument("--snr-db", dest="snr_db", type=float)
    p.add_argument("--input", help="iid | ar1:RHO | wav:PATH")
    p.add_argument("--samples", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--delay-M", dest="delay_M", type=int, help="delay for obml/iml")
    p.add_argument("--mu", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--rls-eta", dest="rls_eta", type=float)
    p.add_argument("--rls-delta", dest="rls_delta", type=float)
    p.add_argument("--out", help="CSV path (stdout when omitted)")
    p.add_argument("--record-erle", dest="record_erle", action="store_true")
    p.add_argument("--jobs", type=int, help="parallel worker processes")
    p.add_argument("--config", help="key=value settings file")


def build_parser():
    parser = _Parser(prog="mlaf", description="Maximum-likelihood adaptive filter experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _sim_flags(sub.add_parser("simulate", help="Monte-Carlo misalignment curves"))
    _sim_flags(sub.add_parser("compare", help="several algorithms on shared streams"))
    b = sub.add_parser("bounds", help="online vs offline misalignment bounds")
    b.add_argument("--L", type=int)
    b.add_argument("--P", type=int)
    b.add_argument("--a0", type=float, action="append", help="initial normalized misalignment (repeatable)")
    b.add_argument("--samples", type=int, help="largest sample count s")
    b.add_argument("--points", type=int, help="number of log-spaced s values")
    b.add_argument("--out")
    b.add_argument("--config")
    sub.add_parser("selftest", help="fast invariant checks")
    return parser


# ---------------------------------------------------------------------------
# Simulation commands
# ---------------------------------------------------------------------------


def _validate_sim(opts):
    from .harness import InputSource

    algos = opts["algo"]
    if not algos:
        raise UsageError("at least one --algo is required")
    if len(set(algos)) != len(algos):
        raise UsageError("each algorithm may be given once")
    for key in ("L", "samples", "trials", "jobs"):
        if opts[key] < 1:
            raise UsageError(f"--{key.replace('_', '-')} must be >= 1, got {opts[key]}")
    if opts["samples"] < opts["L"]:
        raise UsageError(f"--samples must be at least L={opts['L']}")
    if opts["P"] is not None:
        if opts["P"] < 1 or opts["P"] > opts["L"]:
            raise UsageError(f"--P must lie in [1, L], got {opts['P']}")
        if opts["P"] > 1 and all(a in SINGLE_SAMPLE for a in algos):
            raise UsageError("--P conflicts with single-sample algorithms (lms, nlms, rls)")
    if opts["delay_M"] is not None:
        if not any(a in ("obml", "iml") for a in algos):
            raise UsageError("--delay-M only applies to obml/iml")
        if opts["delay_M"] < 1:
            raise UsageError("--delay-M must be >= 1")
    if not 0 <= opts["seed"] < 2**64:
        raise UsageError("--seed must be an unsigned 64-bit integer")
    if opts["mu"] is not None and not 0.0 < opts["mu"] <= 1.0 and any(a in ("nlms", "apa") for a in algos):
        raise UsageError("--mu must lie in (0, 1] for nlms/apa")
    if not 0.0 < opts["rls_eta"] <= 1.0:
        raise UsageError("--rls-eta must lie in (0, 1]")
    if not opts["rls_delta"] > 0.0:
        raise UsageError("--rls-delta must be positive")
    try:
        source = InputSource.parse(opts["input"])
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from exc
    if source.kind == "wav":
        # reject unreadable files before any computation
        from .wavio import read_wav

        try:
            _, data = read_wav(source.path)
        except (OSError, WavFormatError) as exc:
            raise UsageError(f"cannot use {source.path}: {exc}") from exc
        need = opts["samples"] + (opts["delay_M"] or max(1, opts["L"] // 5))
        if data.size < need:
            raise UsageError(f"{source.path} has {data.size} samples, {need} needed")
    return source


def _configs(opts, source):
    from .harness import AlgoSpec, TrialConfig

    cfgs = []
    for name in opts["algo"]:
        P = 1 if name in SINGLE_SAMPLE else (opts["P"] or 4)
        mu = opts["mu"] if opts["mu"] is not None else (0.01 if name == "lms" else 1.0)
        algo = AlgoSpec(name, P=P, mu=mu, delta=opts["delta"],
                        rls_eta=opts["rls_eta"], rls_delta=opts["rls_delta"])
        cfgs.append(TrialConfig(opts["L"], algo, opts["snr_db"], source, opts["samples"],
                                opts["seed"], M=opts["delay_M"], record_erle=opts["record_erle"]))
    return cfgs


def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _curves_csv(results, record_erle):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = ["sample"]
    cols = []
    for res in results:
        name = res.config.algo.name
        header.append(f"{name}_misalignment_db")
        cols.append(res.mean_misalignment_db)
        if record_erle:
            header.append(f"{name}_erle_db")
            cols.append(res.mean_erle_db)
    writer.writerow(header)
    for i in range(cols[0].size):
        writer.writerow([i + 1] + [_fmt(c[i]) for c in cols])
    return buf.getvalue()


def _trials_csv(results):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["algo", "trial", "final_misalignment_db", "sigma_z", "noise_checksum"])
    for res in results:
        for tr in res.traces:
            writer.writerow([res.config.algo.name, tr.config.trial, _fmt(tr.final_db),
                             _fmt(tr.sigma_z), tr.noise_checksum])
    return buf.getvalue()


def _run_sim(args, defaults):
    from .harness import run_experiment

    opts = resolve(args, defaults)
    source = _validate_sim(opts)
    try:
        cfgs = _configs(opts, source)
    except ConfigurationError as exc:
        raise UsageError(str(exc)) from exc
    return opts, run_experiment(cfgs, opts["trials"], jobs=opts["jobs"])


def _emit(opts, results):
    _write_text(opts["out"], _curves_csv(results, opts["record_erle"]))
    if opts["out"] not in (None, "-"):
        _write_text(opts["out"] + ".trials.csv", _trials_csv(results))


def cmd_simulate(args):
    opts, results = _run_sim(args, SIM_DEFAULTS)
    _emit(opts, results)
    return EXIT_OK


def noise_checksum(result):
    """Digest of the per-trial noise checksums of one experiment."""
    h = hashlib.sha256()
    for tr in result.traces:
        h.update(tr.noise_checksum.encode())
    return h.hexdigest()[:16]


def cmd_compare(args):
    opts, results = _run_sim(args, SIM_DEFAULTS)
    if opts["out"] not in (None, "-"):
        _emit(opts, results)
    rows = []
    for res in results:
        reach = res.samples_to_reach(-20.0)
        rows.append((res.config.algo.name, f"{res.mean_misalignment_db[-1]:.2f}",
                     "never" if reach is None else str(reach + 1), noise_checksum(res)))
    head = ("algorithm", "final_db", "samples_to_-20dB", "noise_checksum")
    widths = [max(len(r[i]) for r in rows + [head]) for i in range(len(head))]
    lines = ["  ".join(cell.ljust(wd) for cell, wd in zip(r, widths)).rstrip() for r in [head] + rows]
    shared = len({r[3] for r in rows}) == 1
    lines.append(f"shared noise streams: {'yes' if shared else 'no'}")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Bounds
# ---------------------------------------------------------------------------


def bound_grid(L, P, samples, points):
    """Sample counts ``s = t P`` with ``t`` log-spaced over ``[1, samples / P]``, plus ``s = 0``."""
    t_max = max(1, samples // P)
    t = np.unique(np.round(np.geomspace(1, t_max, points)).astype(np.int64))
    return np.concatenate([[0], t])


def cmd_bounds(args):
    from .core import to_db
    from .theory import BoundParams, obml_bound_curve, offline_bound

    opts = resolve(args, BOUNDS_DEFAULTS)
    L, P = opts["L"], opts["P"]
    if not opts["a0"]:
        raise UsageError("at least one --a0 is required")
    if any(a < 0 for a in opts["a0"]):
        raise UsageError("--a0 values must be non-negative")
    if opts["samples"] < 1 or opts["points"] < 1:
        raise UsageError("--samples and --points must be >= 1")
    steps = bound_grid(L, P, opts["samples"], opts["points"])
    header = ["s"]
    cols = []
    for a0 in opts["a0"]:
        try:
            params = BoundParams.from_dims(L, P, a0)
        except (DomainError, ParameterError) as exc:
            raise UsageError(str(exc)) from exc
        online = obml_bound_curve(params, int(steps[-1])).values[steps]
        tag = format(a0, "g")
        header += [f"obml_bound_db[a0={tag}]", f"offline_bound_db[a0={tag}]"]
        cols += [to_db(online), to_db(offline_bound(a0, L, steps * P))]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for i, t in enumerate(steps):
        writer.writerow([int(t * P)] + [_fmt(c[i]) for c in cols])
    _write_text(opts["out"], buf.getvalue())
    return EXIT_OK


# ---------------------------------------------------------------------------
# Self-test
# ---------------------------------------------------------------------------


def selftest_checks(seed=0, instances=20):
    """Fast invariant checks; returns a list of ``(name, ok)``."""
    from . import kernels
    from .core import DataWindow, FilterState, push_sample, regressor
    from .filters import (
        ApaParams,
        apa_update,
        ga_iml_update,
        ga_obml_update,
        iml_update_dense,
        iml_update_via_small_inverse,
        lagrangian_form_update,
    )
    from .theory import f_step, offline_bound

    rng = np.random.default_rng(seed)

    def close(a, b, tol=1e-9):
        return np.linalg.norm(a - b) <= tol * max(1.0, np.linalg.norm(b))

    iml_ok = lag_ok = p1_ok = True
    for _ in range(instances):
        L = int(rng.integers(4, 24))
        P = int(rng.integers(1, L + 1))
        X = rng.standard_normal((L, P))
        y = rng.standard_normal(P)
        st = FilterState(rng.standard_normal(L), DataWindow(X, y))
        c = float(10.0 ** rng.uniform(-2, 2))
        U = X[:, 1:]
        a = ga_iml_update(st, X[:, 0], y[0], U, c).w
        b = iml_update_via_small_inverse(st, X[:, 0], y[0], U, c).w
        d = iml_update_dense(st, X[:, 0], y[0], U, c).w
        iml_ok &= close(a, b) and close(a, d)
        lam = float(10.0 ** rng.uniform(-2, 2))
        lag = lagrangian_form_update(st, st.window, lam).w
        apa = apa_update(st, st.window, ApaParams(1.0, 1.0 / lam, P)).w
        lag_ok &= close(lag, apa)
        win1 = DataWindow(X[:, :1], y[:1])
        one = FilterState(st.w, win1)
        p1_ok &= close(ga_obml_update(one, win1, c).w, ga_iml_update(one, X[:, 0], y[0], X[:, :0], c).w)

    # compiled kernel against the library update loop
    L, P, T = 12, 3, 60
    x = rng.standard_normal(T)
    yv = rng.standard_normal(T)
    state = FilterState.initial(L, P)
    for t in range(T):
        state = push_sample(state, regressor(x, t, L), yv[t])
        if (t + 1) % P == 0:
            state = apa_update(state, state.window, ApaParams(0.5, 0.1, P))
    wk, _, _ = kernels.run_affine(x, yv, L, P, 0.5, kernels.REG_FIXED, 0.1, False, True,
                                  np.zeros(L), 1.0, 0, 0)
    kern_ok = close(wk, state.w)

    bound_ok = f_step(0.0, 0.5) == 0.0 and np.isclose(
        offline_bound(3.0, 10, 10), 10 * 3.0 / (10 * 3.0 + 10))
    return [
        ("iml forms agree", bool(iml_ok)),
        ("lagrangian form equals regularized apa", bool(lag_ok)),
        ("ga-iml equals ga-obml at P=1", bool(p1_ok)),
        (f"{kernels.BACKEND} kernel matches update loop", bool(kern_ok)),
        ("bound boundary identities", bool(bound_ok)),
    ]


def cmd_selftest(args):
    checks = selftest_checks()
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if all(ok for _, ok in checks) else 1


COMMANDS = {
    "simulate": cmd_simulate,
    "bounds": cmd_bounds,
    "compare": cmd_compare,
    "selftest": cmd_selftest,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalBreakdownError as exc:
        print(f"numerical breakdown: {exc}", file=sys.stderr)
        return EXIT_BREAKDOWN
    except (ConfigurationError, ParameterError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, WavFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

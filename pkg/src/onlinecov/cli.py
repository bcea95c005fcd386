"""Command-line interface: onlinecov {critval, monitor, simulate, analyze, detect-check}.

Exit codes: 0 success, 2 usage or input error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
from dataclasses import asdict
import csv
import json
import logging
import os
from pathlib import Path
import sys

import numpy as np

from . import critval as cv
from . import detect, ingest, simlab
from . import stream as fs
from .errors import (
    BranchFailure,
    NonfiniteInput,
    NonfiniteStatistic,
    NumericalBreakdown,
    OnlineCovError,
    QuadratureFailure,
    SingularBaseline,
)
from .functions import NAMED, get_function
from .moments import estimate_nu4
from .monitor import MonitorConfig, WeightSpec, run
from .rmt import SpectralParams

log = logging.getLogger("onlinecov")

CACHE_ENV = "ONLINECOV_CRITVAL_CACHE"
EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3
NUMERIC_ERRORS = (
    NumericalBreakdown,
    NonfiniteStatistic,
    NonfiniteInput,
    QuadratureFailure,
    BranchFailure,
    SingularBaseline,
)


class UsageError(Exception):
    pass


def _cache(path):
    path = path or os.environ.get(CACHE_ENV)
    return cv.CritvalCache(path) if path else None


def _weight(args) -> WeightSpec:
    if args.weight == "rho2":
        return WeightSpec("log", alpha=args.alpha)
    return WeightSpec("power", args.gamma, args.alpha)


def _threshold(args, weight: WeightSpec) -> float:
    """Explicit --critval, else 1 for rho2, else cache / fresh simulation."""
    if args.critval is not None:
        return args.critval
    if weight.family == "log":
        return 1.0
    spec = cv.CalibrationSpec(weight.gamma, args.paths, args.seed)
    return cv.critical_value(args.alpha, weight.gamma, spec, _cache(args.critval_cache), args.threads)


def _read_rows(source) -> np.ndarray:
    """Row-per-time numeric CSV; a non-numeric first row is taken as a header."""
    fh = sys.stdin if source == "-" else open(source, newline="", encoding="utf-8")
    try:
        return np.array(list(_iter_rows(fh)), dtype=float)
    finally:
        if fh is not sys.stdin:
            fh.close()


def _iter_rows(fh):
    first = True
    for row in csv.reader(fh):
        if not row or not any(c.strip() for c in row):
            continue
        try:
            vals = [float(c) for c in row]
        except ValueError:
            if first:
                first = False
                continue
            raise UsageError(f"non-numeric row {row!r}")
        first = False
        yield np.array(vals)


# subcommands ---------------------------------------------------------------


def cmd_critval(args) -> int:
    if not 0.0 < args.alpha < 1.0:
        raise UsageError("--alpha must lie in (0, 1)")
    spec = cv.CalibrationSpec(args.gamma, args.paths, args.seed)
    cache = _cache(args.cache)
    hit = cache.get(args.alpha, spec) if cache is not None else None
    value = hit if hit is not None else cv.critical_value(args.alpha, args.gamma, spec, cache, args.threads)
    log.info("cache %s", "hit" if hit is not None else "miss")
    print(f"{value:.5f}")
    if args.out:
        doc = {"alpha": args.alpha, "gamma": args.gamma, "paths": args.paths, "seed": args.seed, "value": value}
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def _monitor(history: np.ndarray, feed, args, f):
    """history: n x p rows. Returns (outcome, config)."""
    if history.ndim != 2:
        raise UsageError("history must be a non-empty matrix")
    n, p = history.shape
    if not n > args.k1 > p:
        raise UsageError(f"need n > k1 > p, got n={n}, k1={args.k1}, p={p}")
    weight = _weight(args)
    c = _threshold(args, weight)
    nu4 = args.nu4 if args.nu4 is not None else estimate_nu4(history[: args.k1].T)
    state = fs.init(history.T, args.k1, f)
    config = MonitorConfig(n=n, weight=weight, f=f, c_alpha=c, nu4=nu4, alpha=args.alpha)
    log.info("p=%d n=%d k1=%d c_alpha=%.5f nu4=%.4f", p, n, args.k1, c, nu4)
    return run(config, state, feed, args.path), config


def cmd_monitor(args) -> int:
    f = get_function(args.f)
    history = _read_rows(args.history)
    fh = sys.stdin if args.stream == "-" else open(args.stream, newline="", encoding="utf-8")
    try:
        outcome, _ = _monitor(history, _iter_rows(fh), args, f)
    finally:
        if fh is not sys.stdin:
            fh.close()
    if args.out:
        outcome.write_csv(args.out)
    print(f"DETECTED at k={outcome.k_hat}" if outcome.alarmed else "no detection")
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
    scen = dict(doc.get("scenario", {}))
    if args.reps is not None:
        scen["reps"] = args.reps
    if args.seed is not None:
        scen["seed"] = args.seed
    if scen.get("reps", 1) < 1:
        raise UsageError("--reps must be positive")
    spec = simlab.spec_from_dict(scen)
    alpha = float(doc.get("alpha", 0.05))
    cells = []
    for w in doc.get("weights", [{"family": "power", "gamma": 0.0}]):
        weight = WeightSpec(w.get("family", "power"), w.get("gamma", 0.0), alpha)
        if "c_alpha" in w:
            c = float(w["c_alpha"])
        elif weight.family == "log":
            c = 1.0
        else:
            c = cv.published_value(alpha, weight.gamma) or cv.critical_value(
                alpha, weight.gamma, cache=_cache(args.critval_cache), workers=args.threads
            )
        cells += [simlab.Cell(f, weight, c) for f in doc.get("functions", ["linear", "log1p", "mix"])]
    results = simlab.run_cells(spec, cells, workers=args.threads)
    meta = {"scenario": simlab.scenario_label(spec), "spec": asdict(spec), "alpha": alpha, "horizon": spec.steps}
    report = simlab.SimReport(cells=results, meta=meta)
    out = args.out or "-"
    if out == "-":
        print(report.to_json(args.timing))
    else:
        simlab.emit_report(report, out, args.format, args.timing)
    for c in results:
        log.info("%s %s size/power=%.4f edd=%s", c["f"], c["weight"], c["size_or_power"], c["edd"])
    return EXIT_OK


def cmd_analyze(args) -> int:
    f = get_function(args.f)
    selected, man = ingest.prepare(args.prices, args.top, args.winsor_sd, args.max_missing, args.rank_raw)
    n = args.k1 + args.k2
    if selected.returns.shape[0] <= n:
        raise UsageError(f"only {selected.returns.shape[0]} return rows; need more than k1 + k2 = {n}")
    history, feed = selected.returns[:n], selected.returns[n:]
    outcome, config = _monitor(history, iter(feed), args, f)
    detected = selected.dates[outcome.k_hat - 1] if outcome.alarmed else None
    man.update(
        {
            "k1": args.k1,
            "k2": args.k2,
            "f": f.kind,
            "weight": config.weight.label,
            "c_alpha": config.c_alpha,
            "nu4": config.nu4,
            "monitoring_start": selected.dates[n],
            "detected_row": outcome.k_hat,
            "detected_date": detected,
        }
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    outcome.write_csv(out / "trajectory.csv")
    ingest.write_returns_csv(selected, out / "returns.csv")
    ingest.write_manifest(man, out / "manifest.json")
    print(f"DETECTED at row {outcome.k_hat} ({detected})" if detected else "no detection")
    return EXIT_OK


def cmd_detect_check(args) -> int:
    if not 0.0 < args.c1 < 1.0 or args.c2 <= 0.0:
        raise UsageError("need 0 < c1 < 1 and c2 > 0")
    if args.tau1 <= 0.0 or args.tau2 <= 0.0:
        raise UsageError("tau1 and tau2 must be positive")
    params = SpectralParams(args.c1, args.c2)
    profile = detect.ChangeProfile(args.tau1, args.tau2, "cli")
    report = detect.delay_regime(profile, args.f, args.kstar, args.n, params)
    print(json.dumps(report, indent=2))
    return EXIT_OK


# parser --------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="random seed")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--out", default=None, help="output path")
    p.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])


def _monitor_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k1", type=int, required=True, help="baseline sample size")
    p.add_argument("--f", default="log1p", choices=[*NAMED, "x", "x2", "log", "x+log"], help="test function")
    p.add_argument("--weight", default="rho1", choices=["rho1", "rho2"])
    p.add_argument("--gamma", type=float, default=0.0, help="rho1 exponent in [0, 1/2)")
    p.add_argument("--alpha", type=float, default=0.05, help="nominal level")
    p.add_argument("--critval", type=float, default=None, help="threshold; skips calibration")
    p.add_argument("--critval-cache", default=None, help=f"critical-value cache (default ${CACHE_ENV})")
    p.add_argument("--paths", type=int, default=200_000, help="paths when calibrating")
    p.add_argument("--nu4", type=float, default=None, help="fourth moment; estimated from the baseline if omitted")
    p.add_argument("--path", default="fast", choices=["fast", "eigen"], help="LSS update route")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="onlinecov", description="Online detection of high-dimensional covariance changes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("critval", help="Monte Carlo critical value for rho1")
    _common(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--paths", type=int, default=200_000)
    p.add_argument("--cache", default=None, help=f"cache file (default ${CACHE_ENV})")
    p.set_defaults(func=cmd_critval, seed=20240101)

    p = sub.add_parser("monitor", help="monitor a stream of observations")
    _common(p)
    p.add_argument("--history", required=True, help="CSV of the first n rows (rows = time)")
    p.add_argument("--stream", default="-", help="CSV of the incoming rows, or - for stdin")
    _monitor_flags(p)
    p.set_defaults(func=cmd_monitor, seed=20240101)

    p = sub.add_parser("simulate", help="run a simulation configuration")
    _common(p)
    p.add_argument("--config", required=True, help="scenario JSON")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--format", default="json", choices=["json", "csv"])
    p.add_argument("--timing", action="store_true", help="include runtimes in the report")
    p.add_argument("--critval-cache", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("analyze", help="clean a price panel and monitor its log-returns")
    _common(p)
    p.add_argument("--prices", required=True, help="price CSV: date column then tickers")
    p.add_argument("--top", type=int, default=30, help="number of most volatile tickers kept")
    p.add_argument("--k2", type=int, default=40)
    p.add_argument("--winsor-sd", type=float, default=5.0)
    p.add_argument("--max-missing", type=float, default=0.05)
    p.add_argument("--rank-raw", action="store_true", help="rank volatility before winsorization")
    _monitor_flags(p)
    p.set_defaults(func=cmd_analyze, seed=20240101, out="analysis")

    p = sub.add_parser("detect-check", help="detectability report for a change profile")
    _common(p)
    p.add_argument("--c1", type=float, default=0.5)
    p.add_argument("--c2", type=float, default=0.5)
    p.add_argument("--tau1", type=float, required=True)
    p.add_argument("--tau2", type=float, required=True)
    p.add_argument("--f", default="log1p", choices=[*NAMED, "x", "x2", "log", "x+log"])
    p.add_argument("--kstar", type=int, default=1000)
    p.add_argument("--n", type=int, default=300)
    p.set_defaults(func=cmd_detect_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    # a handler of our own: basicConfig is a no-op when the host already configured logging
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(args.log_level)
    log.propagate = False
    try:
        return args.func(args)
    except NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, OnlineCovError, OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        log.removeHandler(handler)


if __name__ == "__main__":
    sys.exit(main())

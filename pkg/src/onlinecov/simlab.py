"""Simulation study: data generators, change scenarios and batched size/power/EDD runs.

Each replication owns a Philox stream keyed by (seed, replication index), so
results do not depend on how replications are spread over workers. One data
stream per replication feeds every (test function, weight) cell at once.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import asdict, dataclass, field
import json
import math
import time

import numpy as np
from scipy.linalg import toeplitz

from .errors import InvalidParams
from .functions import get_function
from .moments import MomentSchedule, estimate_nu4, moment_schedule
from .monitor import WeightSpec, edd_and_power, first_alarm, weights
from .stream import MultiTracker, init

DISTRIBUTIONS = ("gaussian", "uniform_sqrt3", "student_t10_scaled")
CHANGES = ("none", "homogeneous", "toeplitz_corr", "spike")
BLOCK_STEPS = 25


@dataclass(frozen=True)
class ScenarioSpec:
    p: int = 100
    k1: int = 150
    k2_init: int = 150
    distribution: str = "gaussian"
    change: str = "none"
    magnitude: float = 0.0
    k_star: int | None = None
    horizon: int | None = None
    reps: int = 2000
    seed: int = 2024

    def __post_init__(self) -> None:
        if self.distribution not in DISTRIBUTIONS:
            raise InvalidParams(f"unknown distribution {self.distribution!r}")
        if self.change not in CHANGES:
            raise InvalidParams(f"unknown change {self.change!r}")
        if self.k1 <= self.p or self.k2_init < 1:
            raise InvalidParams("need k1 > p and k2_init >= 1")
        if self.change != "none" and (self.k_star is None or self.k_star < self.n):
            raise InvalidParams("a change needs k_star >= n = k1 + k2_init")
        if self.reps < 1:
            raise InvalidParams("reps must be positive")

    @property
    def n(self) -> int:
        return self.k1 + self.k2_init

    @property
    def steps(self) -> int:
        """Monitoring steps per replication (default 2n)."""
        return 2 * self.n if self.horizon is None else self.horizon

    def sigma_half(self) -> np.ndarray | float:
        """A square root of the post-change covariance."""
        p = self.p
        if self.change == "none":
            return 1.0
        if self.change == "homogeneous":
            return math.sqrt(self.magnitude)
        if self.change == "toeplitz_corr":
            col = self.magnitude ** np.arange(p)
            col[0] = 2.0
            return np.linalg.cholesky(toeplitz(col))
        diag = np.full(p, 1.5)
        diag[:5] += self.magnitude
        return np.diag(np.sqrt(diag))

    def post_covariance(self) -> np.ndarray:
        r = self.sigma_half()
        if np.isscalar(r):
            return float(r) ** 2 * np.eye(self.p)
        return r @ r.T


def draw(rng: np.random.Generator, distribution: str, shape) -> np.ndarray:
    """Standardized i.i.d. entries (mean 0, variance 1)."""
    if distribution == "gaussian":
        return rng.standard_normal(shape)
    if distribution == "uniform_sqrt3":
        return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), shape)
    return rng.standard_t(10, shape) / math.sqrt(1.25)


def replicate_rng(seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(rep,))))


def generate_observation(spec: ScenarioSpec, k: int, rng: np.random.Generator, root=None) -> np.ndarray:
    """y_k = Sigma_k^{1/2} x_k with Sigma_k = I up to k*, the scenario's Sigma after."""
    x = draw(rng, spec.distribution, spec.p)
    if spec.change == "none" or k <= spec.k_star:
        return x
    root = spec.sigma_half() if root is None else root
    return root * x if np.isscalar(root) else root @ x


def generate_block(spec: ScenarioSpec, k_first: int, count: int, rng: np.random.Generator, root=None) -> np.ndarray:
    """Observations k_first .. k_first+count-1 as columns of a p x count matrix."""
    x = draw(rng, spec.distribution, (count, spec.p)).T
    if spec.change == "none":
        return x
    root = spec.sigma_half() if root is None else root
    ks = k_first + np.arange(count)
    post = ks > spec.k_star
    if np.any(post):
        x[:, post] = root * x[:, post] if np.isscalar(root) else root @ x[:, post]
    return x


@dataclass(frozen=True)
class Cell:
    f: str
    weight: WeightSpec
    c_alpha: float

    @property
    def key(self) -> str:
        return f"{self.f}|{self.weight.label}"


def _run_one(spec: ScenarioSpec, cells, schedules: dict, wvecs: dict, rep: int) -> dict:
    rng = replicate_rng(spec.seed, rep)
    root = spec.sigma_half()
    history = generate_block(spec, 1, spec.n, rng, root)
    nu4 = estimate_nu4(history[:, : spec.k1])
    kinds = sorted({c.f for c in cells})
    tracker = MultiTracker(init(history, spec.k1, kinds[0]), kinds)
    std = {f: schedules[f].at(nu4) for f in kinds}
    L = {f: np.empty(spec.steps) for f in kinds}
    hats: dict = {c.key: None for c in cells}
    pending = list(cells)
    done = 0
    while done < spec.steps and pending:
        count = min(BLOCK_STEPS, spec.steps - done)
        block = generate_block(spec, spec.n + done + 1, count, rng, root)
        for j in range(count):
            diff = tracker.push(block[:, j])
            for f in kinds:
                L[f][done + j] = diff[f]
        done += count
        still = []
        for c in pending:
            mu, sigma = std[c.f]
            lt = (L[c.f][:done] - mu[:done]) / sigma[:done]
            i = first_alarm(lt, wvecs[c.weight], spec.n, c.c_alpha)
            if i is None:
                still.append(c)
            else:
                hats[c.key] = spec.n + i
        pending = still
    return hats


def _run_chunk(args) -> list:
    spec, cells, schedules, wvecs, reps = args
    return [_run_one(spec, cells, schedules, wvecs, r) for r in reps]


def run_cells(spec: ScenarioSpec, cells, workers: int = 1) -> list[dict]:
    """Run every replication of ``spec``; returns one report cell per entry of ``cells``."""
    cells = [Cell(get_function(c.f).kind, c.weight, c.c_alpha) for c in cells]
    start = time.perf_counter()
    kinds = sorted({c.f for c in cells})
    schedules: dict[str, MomentSchedule] = {
        f: moment_schedule(f, spec.p, spec.k1, spec.n + 1, spec.steps) for f in kinds
    }
    wvecs = {c.weight: weights(c.weight, spec.n, spec.steps) for c in cells}
    reps = list(range(spec.reps))
    if workers > 1:
        chunks = [reps[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_chunk, [(spec, cells, schedules, wvecs, ch) for ch in chunks]))
        by_rep = {}
        for ch, res in zip(chunks, parts):
            by_rep.update(zip(ch, res))
        results = [by_rep[r] for r in reps]
    else:
        results = _run_chunk((spec, cells, schedules, wvecs, reps))
    runtime = time.perf_counter() - start
    k_ref = spec.k_star if spec.k_star is not None else spec.n
    out = []
    for c in cells:
        hats = [r[c.key] for r in results]
        rate, edd = edd_and_power(hats, k_ref)
        out.append(
            {
                "scenario": scenario_label(spec),
                "f": c.f,
                "weight": c.weight.label,
                "c_alpha": c.c_alpha,
                "k_star": spec.k_star,
                "magnitude": spec.magnitude,
                "size_or_power": rate,
                "edd": None if spec.change == "none" else edd,
                "reps": spec.reps,
                "runtime": runtime,
            }
        )
    return out


def run_cell(spec: ScenarioSpec, f: str, weight: WeightSpec, alpha: float, c_alpha: float, workers: int = 1) -> dict:
    """A single (f, weight) cell; see ``run_cells`` for several at once."""
    if not 0.0 < alpha < 1.0:
        raise InvalidParams("alpha must lie in (0, 1)")
    return run_cells(spec, [Cell(f, weight, c_alpha)], workers)[0]


def scenario_label(spec: ScenarioSpec) -> str:
    base = f"{spec.distribution}/p={spec.p}/k1={spec.k1}/k2={spec.k2_init}"
    if spec.change == "none":
        return base + "/H0"
    return base + f"/{spec.change}={spec.magnitude:g}/k*={spec.k_star}"


@dataclass
class SimReport:
    cells: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def to_json(self, timing: bool = False) -> str:
        cells = [c if timing else {k: v for k, v in c.items() if k != "runtime"} for c in self.cells]
        return json.dumps({"meta": self.meta, "cells": cells}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SimReport":
        doc = json.loads(text)
        return cls(cells=doc["cells"], meta=doc["meta"])


CSV_COLUMNS = ("scenario", "f", "weight", "c_alpha", "k_star", "magnitude", "size_or_power", "edd", "reps")


def emit_report(report: SimReport, path, fmt: str = "json", timing: bool = False) -> None:
    """Write JSON (full) or CSV (one row per cell). Runtimes are left out
    unless ``timing`` is set, which keeps seeded reports byte-identical."""
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(report.to_json(timing) + "\n")
        return
    if fmt != "csv":
        raise InvalidParams(f"unknown report format {fmt!r}")
    cols = CSV_COLUMNS + (("runtime",) if timing else ())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for c in report.cells:
            w.writerow(["" if c.get(k) is None else c.get(k) for k in cols])


def psi_paths(spec: ScenarioSpec, f: str, reps: int) -> np.ndarray:
    """Psi(n, i) trajectories (reps x steps) for Figure-1-style plots."""
    f = get_function(f).kind
    sched = moment_schedule(f, spec.p, spec.k1, spec.n + 1, spec.steps)
    out = np.empty((reps, spec.steps))
    for r in range(reps):
        rng = replicate_rng(spec.seed, r)
        history = generate_block(spec, 1, spec.n, rng)
        mu, sigma = sched.at(estimate_nu4(history[:, : spec.k1]))
        tracker = MultiTracker(init(history, spec.k1, f), [f])
        obs = generate_block(spec, spec.n + 1, spec.steps, rng)
        L = np.array([tracker.push(obs[:, j])[f] for j in range(spec.steps)])
        out[r] = np.cumsum((L - mu) / sigma) / math.sqrt(spec.n)
    return out


def emit_paths(paths: np.ndarray, n: int, weight: WeightSpec, c_alpha: float, path) -> None:
    """Long-format CSV: rep, i, t, Psi, upper and lower boundary +-c/rho(t)."""
    steps = paths.shape[1]
    t = np.arange(1, steps + 1) / n
    bound = c_alpha / weight.rho(t)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(("rep", "i", "t", "Psi", "upper", "lower"))
        for r in range(paths.shape[0]):
            for i in range(steps):
                w.writerow((r, i + 1, repr(float(t[i])), repr(float(paths[r, i])), repr(float(bound[i])), repr(float(-bound[i]))))


def boundary(weight: WeightSpec, c_alpha: float, t) -> np.ndarray:
    return c_alpha / weight.rho(np.asarray(t, dtype=float))


def spec_from_dict(d: dict) -> ScenarioSpec:
    known = {k: d[k] for k in asdict(ScenarioSpec()).keys() if k in d}
    return ScenarioSpec(**known)

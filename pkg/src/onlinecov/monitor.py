"""Weighted CUSUM monitoring of standardized LSS increments.

At monitoring step i (time k = n + i) the increment L_k is standardized with
its null moments, accumulated into Psi = n^{-1/2} sum Ltilde, and the alarm
statistic T = w(n, i) |Psi| is compared against a threshold.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
import math
from typing import Iterable

import numpy as np

from .errors import EmptyBatch, InvalidParams, NonfiniteStatistic
from .functions import TestFunction, get_function
from .moments import closed_form, numeric_form
from . import stream as fs

TRAJECTORY_HEADER = ("k", "i", "L", "mu", "sigma", "Ltilde", "Psi", "weight", "T", "alarm")


@dataclass(frozen=True)
class WeightSpec:
    """rho_{1,gamma}(t) = (1+t)^(gamma-1) t^(-gamma)  (family "power"), or
    rho_2(t) = (1+t)^(-1/2) (log(1+t) - 2 log alpha)^(-1/2)  (family "log")."""

    family: str = "power"
    gamma: float = 0.0
    alpha: float = 0.05

    def __post_init__(self) -> None:
        if self.family not in ("power", "log"):
            raise InvalidParams(f"unknown weight family {self.family!r}")
        if self.family == "power" and not (0.0 <= self.gamma < 0.5):
            raise InvalidParams(f"gamma must lie in [0, 1/2), got {self.gamma}")
        if self.family == "log" and not (0.0 < self.alpha < 1.0):
            raise InvalidParams(f"alpha must lie in (0, 1), got {self.alpha}")

    def rho(self, t):
        t = np.asarray(t, dtype=float)
        if self.family == "power":
            return (1.0 + t) ** (self.gamma - 1.0) * t ** (-self.gamma)
        return (1.0 + t) ** -0.5 * (np.log1p(t) - 2.0 * math.log(self.alpha)) ** -0.5

    @property
    def label(self) -> str:
        return f"rho1_{self.gamma:g}" if self.family == "power" else "rho2"


def burn_in(n: int) -> int:
    return math.ceil(math.log(n))


def weight_value(spec: WeightSpec, i: int, n: int) -> float:
    if i <= burn_in(n):
        return 0.0
    return float(spec.rho(i / n))


def weights(spec: WeightSpec, n: int, steps: int) -> np.ndarray:
    """Vector of w(n, i) for i = 1..steps."""
    i = np.arange(1, steps + 1)
    w = spec.rho(i / n)
    w[i <= burn_in(n)] = 0.0
    return w


@dataclass(frozen=True)
class MonitorConfig:
    n: int
    weight: WeightSpec
    f: TestFunction
    c_alpha: float
    nu4: float = 3.0
    alpha: float = 0.05

    def __post_init__(self) -> None:
        if not self.c_alpha > 0.0:
            raise InvalidParams("c_alpha must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidParams("alpha must lie in (0, 1)")


@dataclass
class MonitorOutcome:
    alarmed: bool = False
    k_hat: int | None = None
    trajectory: list = field(default_factory=list)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(TRAJECTORY_HEADER)
            for row in self.trajectory:
                w.writerow([*(repr(v) if isinstance(v, float) else v for v in row[:-1]), int(row[-1])])


def step(config: MonitorConfig, mu: float, sigma: float, psi_prev: float, i: int, L: float):
    """One CUSUM update. Returns (Ltilde, Psi, weight, T, alarm)."""
    lt = (L - mu) / sigma if sigma > 0.0 else math.inf
    if not math.isfinite(lt):
        raise NonfiniteStatistic(f"standardized increment is {lt}")
    psi = psi_prev + lt / math.sqrt(config.n)
    w = weight_value(config.weight, i, config.n)
    t_stat = w * abs(psi)
    return lt, psi, w, t_stat, t_stat > config.c_alpha


def null_moments(f: TestFunction, p: int, k1: int, k: int, nu4: float) -> tuple[float, float]:
    """(mu_k, sigma_k) for the increment at time k."""
    k2 = k - 1 - k1
    if f.kind == "custom":
        mu, var = numeric_form(f, p / k1, p / k2, p, nu4)
    else:
        mu, var = closed_form(f.kind, p / k1, p / k2, p, nu4)
    return mu, math.sqrt(var)


def _pusher(f: TestFunction, path: str):
    if path == "eigen" or f.kind == "custom":
        return fs.push
    if path == "fast" and f.polynomial:
        return fs.push_fast_trace
    if path == "fast":
        return fs.push_logdet
    raise InvalidParams(f"unknown path {path!r}")


def run(config: MonitorConfig, state: fs.StreamState, feed: Iterable, path: str = "eigen") -> MonitorOutcome:
    """Algorithm loop: consume observations until the first alarm or the end of ``feed``.

    ``path`` selects how Tr f(F_k) is updated: "eigen" (reference) or "fast"
    (trace updates for polynomial f, Cholesky log-determinant for log1p/mix).
    """
    if state.k != config.n:
        raise InvalidParams(f"stream must start at k = n = {config.n}, found {state.k}")
    f = get_function(config.f)
    if state.f.kind != f.kind:
        raise InvalidParams("stream and monitor use different test functions")
    push = _pusher(f, path)
    out = MonitorOutcome()
    psi = 0.0
    i = 0
    for y in feed:
        i += 1
        L = push(state, y)
        mu, sigma = null_moments(f, state.p, state.k1, state.k, config.nu4)
        lt, psi, w, t_stat, alarm = step(config, mu, sigma, psi, i, L)
        out.trajectory.append((state.k, i, L, mu, sigma, lt, psi, w, t_stat, alarm))
        if alarm:
            out.alarmed = True
            out.k_hat = state.k
            break
    return out


def first_alarm(Ltilde: np.ndarray, w: np.ndarray, n: int, c_alpha: float) -> int | None:
    """1-based monitoring index of the first alarm for a precomputed increment path."""
    psi = np.cumsum(Ltilde) / math.sqrt(n)
    hit = np.flatnonzero(w[: len(psi)] * np.abs(psi) > c_alpha)
    return int(hit[0]) + 1 if hit.size else None


def edd_and_power(k_hats, k_star: int) -> tuple[float, float | None]:
    """Power = alarmed fraction; EDD = sum (k_hat - k*)_+ over #{k_hat >= k*}.

    ``k_hats`` may hold MonitorOutcome objects or stopping indices (None for
    runs that never alarmed).
    """
    hats = [o.k_hat if isinstance(o, MonitorOutcome) else o for o in k_hats]
    if not hats:
        raise EmptyBatch("no outcomes to aggregate")
    alarmed = [h for h in hats if h is not None]
    power = len(alarmed) / len(hats)
    late = [h for h in alarmed if h >= k_star]
    if not late:
        return power, None
    edd = sum(max(h - k_star, 0) for h in alarmed) / len(late)
    return power, edd

"""Monte Carlo critical values for sup_t rho(t) |W(t)| with W a standard Brownian motion.

Paths are simulated on a two-resolution grid: t_min, then steps of dt_fine
up to t_mid, then steps of dt_coarse up to t_max. Paths are generated in
fixed-size blocks, block b drawing from its own Philox stream keyed by
(seed, b), so the samples do not depend on how blocks are scheduled.
Several weights can share one set of paths.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
import json
import os
from pathlib import Path
import threading

import numpy as np
from numba import njit

from .errors import InvalidParams
from .monitor import WeightSpec

BLOCK = 500
CACHE_VERSION = 1


@dataclass(frozen=True)
class Grid:
    t_min: float = 1e-2
    t_mid: float = 10.0
    t_max: float = 100.0
    dt_fine: float = 1e-2
    dt_coarse: float = 1e-2

    def __post_init__(self) -> None:
        if not (0.0 < self.t_min < self.t_mid < self.t_max):
            raise InvalidParams("need 0 < t_min < t_mid < t_max")
        if self.dt_fine <= 0.0 or self.dt_coarse <= 0.0:
            raise InvalidParams("grid steps must be positive")

    def points(self) -> np.ndarray:
        n_fine = int(round(self.t_mid / self.dt_fine))
        fine = self.dt_fine * np.arange(1, n_fine + 1)
        fine = fine[fine > self.t_min * (1.0 + 1e-9)]
        n_coarse = int(round((self.t_max - self.t_mid) / self.dt_coarse))
        coarse = self.t_mid + self.dt_coarse * np.arange(1, n_coarse + 1)
        return np.concatenate([[self.t_min], fine, coarse])


@dataclass(frozen=True)
class CalibrationSpec:
    gamma: float = 0.0
    paths: int = 200_000
    seed: int = 20240101
    grid: Grid = Grid()

    def __post_init__(self) -> None:
        if self.paths < 10_000:
            raise InvalidParams("at least 10^4 paths are required")
        WeightSpec("power", self.gamma)


@njit(cache=True)
def _block_suprema(z, scale, wts, out):
    n_paths, n_steps = z.shape
    n_w = wts.shape[0]
    for b in range(n_paths):
        w = 0.0
        for j in range(n_steps):
            w += scale[j] * z[b, j]
            aw = abs(w)
            for g in range(n_w):
                v = wts[g, j] * aw
                if v > out[g, b]:
                    out[g, b] = v


def _block(seed: int, index: int, count: int, scale: np.ndarray, wts: np.ndarray) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))
    z = rng.standard_normal((count, scale.size))
    out = np.zeros((wts.shape[0], count))
    _block_suprema(z, scale, wts, out)
    return out


def simulate_sup(
    spec: CalibrationSpec, gammas=None, weight_fn=None, workers: int = 1
) -> np.ndarray:
    """Per-path suprema of rho(t)|W(t)| over the grid.

    Returns shape (paths,) for ``spec.gamma``, or (len(gammas), paths)
    when a list of gammas is supplied (all evaluated on the same paths).
    ``weight_fn`` overrides the power-law family with any callable rho(t).
    """
    t = spec.grid.points()
    scale = np.sqrt(np.diff(np.concatenate([[0.0], t])))
    if weight_fn is not None:
        wts = np.atleast_2d(np.asarray(weight_fn(t), dtype=float))
        single = True
    else:
        single = gammas is None
        gs = [spec.gamma] if single else list(gammas)
        wts = np.stack([WeightSpec("power", g).rho(t) for g in gs])
    wts = np.ascontiguousarray(wts)
    blocks = [(i, min(BLOCK, spec.paths - i * BLOCK)) for i in range(-(-spec.paths // BLOCK))]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_block, *zip(*[(spec.seed, i, c, scale, wts) for i, c in blocks])))
    else:
        parts = [_block(spec.seed, i, c, scale, wts) for i, c in blocks]
    sup = np.concatenate(parts, axis=1)
    return sup[0] if single else sup


def quantile7(samples, level: float) -> float:
    return float(np.quantile(np.asarray(samples), level, method="linear"))


class CritvalCache:
    """JSON-backed store of computed critical values."""

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else None
        self.entries: list[dict] = []
        self._lock = threading.Lock()
        if self.path is not None and self.path.exists():
            doc = json.loads(self.path.read_text(encoding="utf-8"))
            if doc.get("version") != CACHE_VERSION:
                raise InvalidParams(f"unsupported cache version {doc.get('version')}")
            self.entries = list(doc.get("entries", []))

    @staticmethod
    def _key(alpha: float, spec: CalibrationSpec) -> dict:
        return {
            "alpha": float(alpha),
            "gamma": float(spec.gamma),
            "paths": int(spec.paths),
            "grid": asdict(spec.grid),
            "seed": int(spec.seed),
        }

    def get(self, alpha: float, spec: CalibrationSpec):
        key = self._key(alpha, spec)
        for e in self.entries:
            if all(e[k] == v for k, v in key.items()):
                return e["value"]
        return None

    def put(self, alpha: float, spec: CalibrationSpec, value: float) -> None:
        with self._lock:
            if self.get(alpha, spec) is None:
                self.entries.append({**self._key(alpha, spec), "value": float(value)})
            if self.path is not None:
                tmp = self.path.with_suffix(self.path.suffix + ".tmp")
                doc = {"version": CACHE_VERSION, "entries": self.entries}
                tmp.write_text(json.dumps(doc, indent=1), encoding="utf-8")
                os.replace(tmp, self.path)


def critical_value(
    alpha: float, gamma: float, spec: CalibrationSpec | None = None, cache: CritvalCache | None = None, workers: int = 1
) -> float:
    """Empirical (1 - alpha)-quantile of the simulated suprema."""
    if not 0.0 < alpha < 1.0:
        raise InvalidParams(f"alpha must lie in (0, 1), got {alpha}")
    spec = CalibrationSpec(gamma=gamma) if spec is None else CalibrationSpec(gamma, spec.paths, spec.seed, spec.grid)
    if cache is not None:
        hit = cache.get(alpha, spec)
        if hit is not None:
            return hit
    value = quantile7(simulate_sup(spec, workers=workers), 1.0 - alpha)
    if cache is not None:
        cache.put(alpha, spec, value)
    return value


def critical_table(alphas, gammas, paths: int = 200_000, seed: int = 20240101, grid: Grid = Grid(), workers: int = 1):
    """{(alpha, gamma): c} for every pair, from a single shared set of paths."""
    spec = CalibrationSpec(gamma=gammas[0], paths=paths, seed=seed, grid=grid)
    sup = simulate_sup(spec, gammas=gammas, workers=workers)
    return {(a, g): quantile7(sup[j], 1.0 - a) for j, g in enumerate(gammas) for a in alphas}


TABLE1 = {
    (0.01, 0.0): 1.56949, (0.01, 0.15): 1.81747, (0.01, 0.25): 1.97581, (0.01, 0.35): 2.29276, (0.01, 0.45): 2.78885,
    (0.05, 0.0): 1.33027, (0.05, 0.15): 1.5131, (0.05, 0.25): 1.68472, (0.05, 0.35): 1.93445, (0.05, 0.45): 2.30402,
    (0.10, 0.0): 1.19574, (0.10, 0.15): 1.35757, (0.10, 0.25): 1.50264, (0.10, 0.35): 1.73564, (0.10, 0.45): 2.11163,
}


def published_value(alpha: float, gamma: float):
    """Reference critical value for rho_{1,gamma}, or None if not tabulated."""
    for (a, g), v in TABLE1.items():
        if abs(a - alpha) < 1e-12 and abs(g - gamma) < 1e-12:
            return v
    return None

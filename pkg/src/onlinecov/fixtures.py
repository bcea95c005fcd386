"""Deterministic generators for the data files shipped in onlinecov/data.

Run ``python -m onlinecov.fixtures`` to rebuild them.
"""

from __future__ import annotations

import csv
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .simlab import replicate_rng

DATA_DIR = Path(__file__).with_name("data")

PANEL_SEED = 404
PANEL_TICKERS = 40
PANEL_ROWS = 300
PANEL_PLANT_ROW = 200  # first return row drawn from the shifted covariance
PANEL_SCALE = 2.0

MONITOR_P = 10
MONITOR_K1 = 40
MONITOR_K2 = 40
MONITOR_STEPS = 160
MONITOR_PLANT = 40  # stream rows after this one have covariance 2 I
MONITOR_H1_SEED = 17
MONITOR_H0_SEED = 3


def trading_days(start: date, count: int) -> list[str]:
    out, d = [], start
    while len(out) < count:
        if d.weekday() < 5:
            out.append(d.isoformat())
        d += timedelta(days=1)
    return out


def price_panel(seed: int = PANEL_SEED) -> tuple[list[str], list[str], np.ndarray]:
    """Prices for PANEL_TICKERS names over PANEL_ROWS days with gaps.

    Returns are Gaussian with ticker-specific volatility; from return row
    PANEL_PLANT_ROW on they are scaled by PANEL_SCALE. Two extra tickers
    exercise the cleaning rules: one with a leading gap and one with 8% missing.
    """
    rng = replicate_rng(seed, 0)
    tickers = [f"T{j:02d}" for j in range(PANEL_TICKERS)]
    vol = np.linspace(0.01, 0.03, PANEL_TICKERS)
    r = rng.standard_normal((PANEL_ROWS - 1, PANEL_TICKERS)) * vol
    r[PANEL_PLANT_ROW - 1 :] *= PANEL_SCALE
    prices = 100.0 * np.exp(np.vstack([np.zeros(PANEL_TICKERS), np.cumsum(r, axis=0)]))
    extra = 100.0 * np.exp(np.cumsum(rng.standard_normal((PANEL_ROWS, 2)) * 0.05, axis=0))
    prices = np.hstack([prices, extra])
    tickers += ["ZLEAD", "ZSPARSE"]
    prices[:3, -2] = np.nan
    prices[rng.choice(np.arange(1, PANEL_ROWS), int(0.08 * PANEL_ROWS), replace=False), -1] = np.nan
    for j in rng.choice(PANEL_TICKERS, 6, replace=False):
        prices[rng.integers(1, PANEL_ROWS), j] = np.nan
    return trading_days(date(2019, 1, 2), PANEL_ROWS), tickers, prices


def monitor_rows(seed: int, planted: bool) -> np.ndarray:
    """(n + steps) x p observation rows; planted rows are scaled by sqrt(2)."""
    rng = replicate_rng(seed, 0)
    x = rng.standard_normal((MONITOR_K1 + MONITOR_K2 + MONITOR_STEPS, MONITOR_P))
    if planted:
        x[MONITOR_K1 + MONITOR_K2 + MONITOR_PLANT :] *= np.sqrt(2.0)
    return x


def _write_matrix(path: Path, rows: np.ndarray, header=None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header is not None:
            w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def write_all(target: Path = DATA_DIR) -> None:
    target.mkdir(parents=True, exist_ok=True)
    dates, tickers, prices = price_panel()
    with open(target / "synthetic_prices.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", *tickers])
        for d, row in zip(dates, prices):
            w.writerow([d, *("" if np.isnan(v) else f"{v:.6f}" for v in row)])
    n = MONITOR_K1 + MONITOR_K2
    header = [f"x{j}" for j in range(MONITOR_P)]
    h1 = monitor_rows(MONITOR_H1_SEED, True)
    h0 = monitor_rows(MONITOR_H0_SEED, False)
    _write_matrix(target / "h1_history.csv", h1[:n], header)
    _write_matrix(target / "h1_stream.csv", h1[n:], header)
    _write_matrix(target / "h0_history.csv", h0[:n], header)
    _write_matrix(target / "h0_stream.csv", h0[n:], header)


if __name__ == "__main__":
    write_all()

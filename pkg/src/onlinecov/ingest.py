"""Price panel ingestion and cleaning for the real-data monitor."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from datetime import date
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import EmptyPanel, InvalidParams, MalformedCSV, NonpositivePrice, SelectionTooLarge


@dataclass(frozen=True)
class PricePanel:
    dates: list
    tickers: list
    prices: np.ndarray
    missing_rate: dict = field(default_factory=dict)
    dropped: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ReturnPanel:
    dates: list
    tickers: list
    returns: np.ndarray
    winsor_sd: float | None = None
    # per-ticker (mean, sd) of the raw returns, fixed at the first winsorization
    stats: tuple | None = None
    clamped: dict = field(default_factory=dict)
    raw: np.ndarray | None = None


def _read_rows(source) -> list[list[str]]:
    if isinstance(source, (str, Path)) and Path(source).exists():
        with open(source, newline="", encoding="utf-8") as fh:
            return list(csv.reader(fh))
    if hasattr(source, "read"):
        return list(csv.reader(source))
    return list(csv.reader(io.StringIO(str(source))))


def load_and_clean(source, max_missing_rate: float = 0.05) -> PricePanel:
    """Parse a date x ticker price CSV, drop sparse tickers and forward-fill gaps.

    A ticker is dropped when its missing rate exceeds ``max_missing_rate`` or
    when its first row is missing (nothing to carry forward).
    """
    if not 0.0 <= max_missing_rate <= 1.0:
        raise InvalidParams("max_missing_rate must lie in [0, 1]")
    rows = [r for r in _read_rows(source) if r and any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise MalformedCSV("need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    if header[0].lower() != "date" or len(header) < 2:
        raise MalformedCSV("first header column must be 'date' followed by tickers")
    tickers = header[1:]
    if len(set(tickers)) != len(tickers):
        raise MalformedCSV("duplicate ticker columns")
    dates, values = [], []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise MalformedCSV(f"line {line}: expected {len(header)} fields, got {len(row)}")
        try:
            d = date.fromisoformat(row[0].strip())
        except ValueError as exc:
            raise MalformedCSV(f"line {line}: bad date {row[0]!r}") from exc
        if dates and d <= dates[-1]:
            raise MalformedCSV(f"line {line}: dates must be strictly increasing")
        dates.append(d)
        vals = []
        for cell in row[1:]:
            cell = cell.strip()
            if not cell:
                vals.append(math.nan)
                continue
            try:
                vals.append(float(cell))
            except ValueError as exc:
                raise MalformedCSV(f"line {line}: non-numeric price {cell!r}") from exc
        values.append(vals)
    prices = np.array(values, dtype=float)
    missing = np.isnan(prices)
    rates = missing.mean(axis=0)
    keep, dropped = [], {}
    for j, t in enumerate(tickers):
        if rates[j] > max_missing_rate:
            dropped[t] = "missing-rate"
        elif missing[0, j]:
            dropped[t] = "leading-gap"
        else:
            keep.append(j)
    if not keep:
        raise EmptyPanel("no ticker survives cleaning")
    kept = prices[:, keep]
    for i in range(1, kept.shape[0]):
        gap = np.isnan(kept[i])
        kept[i, gap] = kept[i - 1, gap]
    return PricePanel(
        dates=[d.isoformat() for d in dates],
        tickers=[tickers[j] for j in keep],
        prices=kept,
        missing_rate={t: float(rates[j]) for j, t in enumerate(tickers)},
        dropped=dropped,
    )


def log_returns(panel: PricePanel) -> ReturnPanel:
    if np.any(panel.prices <= 0.0):
        raise NonpositivePrice("log-returns need strictly positive prices")
    if panel.prices.shape[0] < 2:
        raise EmptyPanel("need at least two dates for returns")
    r = np.diff(np.log(panel.prices), axis=0)
    return ReturnPanel(dates=list(panel.dates[1:]), tickers=list(panel.tickers), returns=r, raw=r)


def winsorize(panel: ReturnPanel, sd_threshold: float = 5.0) -> ReturnPanel:
    """Clamp each ticker to mean +- sd_threshold * sd.

    Mean and sd come from the raw returns and are stored on the result, so a
    second pass reuses them and leaves the data unchanged.
    """
    if sd_threshold < 0.0:
        raise InvalidParams("sd_threshold must be non-negative")
    r = panel.returns
    if r.shape[0] < 2:
        raise EmptyPanel("winsorization needs at least two rows")
    if panel.stats is None:
        mean = r.mean(axis=0)
        sd = r.std(axis=0, ddof=1)
    else:
        mean, sd = (np.asarray(s) for s in panel.stats)
    lo, hi = mean - sd_threshold * sd, mean + sd_threshold * sd
    out = np.clip(r, lo, hi)
    counts = {t: int(np.count_nonzero(out[:, j] != r[:, j])) for j, t in enumerate(panel.tickers)}
    return replace(panel, returns=out, winsor_sd=sd_threshold, stats=(mean, sd), clamped=counts)


def volatility(panel: ReturnPanel, raw: bool = False) -> np.ndarray:
    data = panel.raw if raw and panel.raw is not None else panel.returns
    return data.std(axis=0, ddof=1)


def select_top_volatility(panel: ReturnPanel, k: int, rank_raw: bool = False) -> ReturnPanel:
    """Keep the k most volatile tickers, ordered by decreasing sd then ticker name.

    Ranking uses the (possibly winsorized) returns unless ``rank_raw`` is set.
    """
    if k < 1 or k > len(panel.tickers):
        raise SelectionTooLarge(f"cannot select {k} of {len(panel.tickers)} tickers")
    sd = volatility(panel, rank_raw)
    order = sorted(range(len(panel.tickers)), key=lambda j: (-sd[j], panel.tickers[j]))[:k]
    stats = None if panel.stats is None else tuple(np.asarray(s)[order] for s in panel.stats)
    return replace(
        panel,
        tickers=[panel.tickers[j] for j in order],
        returns=panel.returns[:, order],
        raw=None if panel.raw is None else panel.raw[:, order],
        stats=stats,
        clamped={panel.tickers[j]: panel.clamped.get(panel.tickers[j], 0) for j in order},
    )


def ranking(panel: ReturnPanel, rank_raw: bool = False) -> list[dict]:
    sd = volatility(panel, rank_raw)
    order = sorted(range(len(panel.tickers)), key=lambda j: (-sd[j], panel.tickers[j]))
    return [{"ticker": panel.tickers[j], "sd": float(sd[j])} for j in order]


def write_returns_csv(panel: ReturnPanel, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["date", *panel.tickers])
        for d, row in zip(panel.dates, panel.returns):
            w.writerow([d, *(repr(float(v)) for v in row)])


def manifest(prices: PricePanel, cleaned: ReturnPanel, selected: ReturnPanel, rank_raw: bool = False) -> dict:
    return {
        "dropped": prices.dropped,
        "missing_rate": prices.missing_rate,
        "winsor_sd": cleaned.winsor_sd,
        "winsorized_counts": cleaned.clamped,
        "ranking": ranking(cleaned, rank_raw),
        "ranked_on": "raw" if rank_raw else "winsorized",
        "selected": selected.tickers,
        "rows": len(selected.dates),
    }


def write_manifest(doc: dict, path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def prepare(source, top: int, winsor_sd: float = 5.0, max_missing_rate: float = 0.05, rank_raw: bool = False):
    """load -> clean -> log-returns -> winsorize -> top-k. Returns (selected, manifest)."""
    prices = load_and_clean(source, max_missing_rate)
    cleaned = winsorize(log_returns(prices), winsor_sd)
    selected = select_top_volatility(cleaned, top, rank_raw)
    return selected, manifest(prices, cleaned, selected, rank_raw)

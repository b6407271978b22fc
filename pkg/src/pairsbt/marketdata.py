"""Daily price-panel ingestion, universe filtering and log-price normalization.

The panel CSV format is `date,ticker,close,volume` with ISO dates, one row per
(date, ticker) observation.  A PricePanel is the single source of market truth
for every downstream stage; panels and normalized panels are immutable after
construction (any number of concurrent readers is safe).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np
import pandas as pd

from .errors import (
    ConfigError,
    DuplicateObservation,
    EmptyUniverse,
    MalformedRow,
    MissingBasePrice,
    MissingFile,
    NonPositivePrice,
)

PANEL_HEADER = ["date", "ticker", "close", "volume"]

# Trading-day counts standing in for 12 and 6 calendar months.
DAYS_PER_YEAR = 252
FORMATION_DAYS_BASE = 252
TRADING_DAYS_BASE = 126


@dataclass(frozen=True)
class PeriodWindow:
    """One formation + trading cycle, in panel trading days.

    The formation span is [formation_start, formation_end] inclusive and holds
    `formation_days` trading days; the trading span is (formation_end,
    trading_end] with `trading_days` days.
    """

    formation_start: pd.Timestamp
    formation_end: pd.Timestamp
    trading_end: pd.Timestamp
    formation_days: int
    trading_days: int

    def __post_init__(self):
        if not (self.formation_start < self.formation_end <= self.trading_end):
            raise ConfigError(
                f"window dates out of order: {self.formation_start} / "
                f"{self.formation_end} / {self.trading_end}"
            )

    def formation_mask(self, dates: pd.DatetimeIndex) -> np.ndarray:
        return (dates >= self.formation_start) & (dates <= self.formation_end)

    def trading_mask(self, dates: pd.DatetimeIndex) -> np.ndarray:
        return (dates > self.formation_end) & (dates <= self.trading_end)

    def all_mask(self, dates: pd.DatetimeIndex) -> np.ndarray:
        return (dates >= self.formation_start) & (dates <= self.trading_end)


def window_at(
    dates: pd.DatetimeIndex, start: int, formation_days: int, trading_days: int
) -> PeriodWindow:
    """Build a PeriodWindow anchored at position `start` of a trading-day index."""
    if formation_days < 2 or trading_days < 1:
        raise ConfigError("formation needs >= 2 days and trading >= 1 day")
    last = start + formation_days + trading_days - 1
    if start < 0 or last >= len(dates):
        raise ConfigError("window does not fit inside the date index")
    return PeriodWindow(
        formation_start=dates[start],
        formation_end=dates[start + formation_days - 1],
        trading_end=dates[last],
        formation_days=formation_days,
        trading_days=trading_days,
    )


@dataclass(frozen=True)
class PricePanel:
    """Date-aligned close/volume matrices over a stock universe.

    `closes` and `volumes` share a sorted DatetimeIndex and sorted ticker
    columns; missing observations are NaN.  `filter_stamp` records the
    formation span a panel was already universe-filtered for, which makes
    filter_universe a no-op on its own output.
    """

    closes: pd.DataFrame
    volumes: pd.DataFrame
    filter_stamp: tuple[pd.Timestamp, pd.Timestamp] | None = None

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.closes.index

    @property
    def tickers(self) -> list[str]:
        return list(self.closes.columns)

    @property
    def n_dates(self) -> int:
        return len(self.closes.index)

    @property
    def n_tickers(self) -> int:
        return len(self.closes.columns)

    def restrict(
        self,
        tickers: Iterable[str] | None = None,
        start: pd.Timestamp | None = None,
        end: pd.Timestamp | None = None,
    ) -> "PricePanel":
        """Sub-panel view over a ticker subset and/or inclusive date range."""
        closes, volumes = self.closes, self.volumes
        if tickers is not None:
            cols = sorted(tickers)
            missing = set(cols) - set(closes.columns)
            if missing:
                raise ConfigError(f"unknown tickers: {sorted(missing)}")
            closes, volumes = closes[cols], volumes[cols]
        if start is not None or end is not None:
            closes = closes.loc[start:end]
            volumes = volumes.loc[start:end]
        return PricePanel(closes=closes, volumes=volumes)

    def drop_tickers(self, tickers: Iterable[str]) -> "PricePanel":
        keep = [t for t in self.closes.columns if t not in set(tickers)]
        return self.restrict(tickers=keep)


def build_panel(closes: pd.DataFrame, volumes: pd.DataFrame) -> PricePanel:
    """Validate and canonicalize raw close/volume frames into a PricePanel."""
    if list(closes.columns) != sorted(closes.columns):
        closes = closes[sorted(closes.columns)]
        volumes = volumes[sorted(volumes.columns)]
    if closes.shape != volumes.shape or list(closes.columns) != list(volumes.columns):
        raise ConfigError("close and volume matrices must have identical shape")
    if not closes.index.is_monotonic_increasing or closes.index.has_duplicates:
        raise ConfigError("panel dates must be strictly increasing")
    if ((closes <= 0).any()).any():
        raise NonPositivePrice("panel contains non-positive close prices")
    return PricePanel(closes=closes, volumes=volumes)


def load_price_panel(source: str | Path) -> PricePanel:
    """Load a `date,ticker,close,volume` CSV into a PricePanel.

    Duplicate (date, ticker) rows, non-positive closes, negative volumes and
    unparseable fields are hard errors carrying the offending line number.
    """
    path = Path(source)
    if not path.exists():
        raise MissingFile(str(path))

    closes: dict[str, dict[pd.Timestamp, float]] = {}
    volumes: dict[str, dict[pd.Timestamp, float]] = {}
    seen: set[tuple[str, str]] = set()

    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedRow(1, "empty file, expected header date,ticker,close,volume")
        if [h.strip().lower() for h in header] != PANEL_HEADER:
            raise MalformedRow(1, f"bad header {header!r}")

        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 4:
                raise MalformedRow(lineno, f"expected 4 fields, got {len(row)}")
            date_s, ticker, close_s, volume_s = (f.strip() for f in row)
            if not ticker:
                raise MalformedRow(lineno, "empty ticker")
            try:
                date = pd.Timestamp(date_s)
            except ValueError:
                raise MalformedRow(lineno, f"bad date {date_s!r}")
            try:
                close = float(close_s)
            except ValueError:
                raise MalformedRow(lineno, f"bad close {close_s!r}")
            if not math.isfinite(close):
                raise MalformedRow(lineno, f"non-finite close {close_s!r}")
            if close <= 0:
                raise NonPositivePrice(f"line {lineno}: close {close} for {ticker}")
            try:
                volume = int(volume_s)
            except ValueError:
                raise MalformedRow(lineno, f"bad volume {volume_s!r}")
            if volume < 0:
                raise MalformedRow(lineno, f"negative volume {volume}")
            key = (date_s, ticker)
            if key in seen:
                raise DuplicateObservation(f"line {lineno}: repeated ({date_s}, {ticker})")
            seen.add(key)
            closes.setdefault(ticker, {})[date] = close
            volumes.setdefault(ticker, {})[date] = float(volume)

    if not closes:
        empty = pd.DataFrame(index=pd.DatetimeIndex([], name="date"))
        return PricePanel(closes=empty, volumes=empty.copy())

    close_df = pd.DataFrame(closes).sort_index()
    close_df = close_df[sorted(close_df.columns)]
    volume_df = pd.DataFrame(volumes).sort_index()[close_df.columns]
    close_df.index.name = "date"
    volume_df.index.name = "date"
    return PricePanel(closes=close_df, volumes=volume_df)


def write_price_panel(panel: PricePanel, dest: str | Path) -> None:
    """Write a panel back to the input CSV format (bit-exact round trip).

    Floats are rendered with repr (shortest round-trip form) so that
    load_price_panel(write_price_panel(p)) reproduces p exactly.
    """
    path = Path(dest)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(",".join(PANEL_HEADER) + "\n")
        dates = panel.dates
        closes = panel.closes.to_numpy()
        volumes = panel.volumes.to_numpy()
        tickers = panel.tickers
        for i, date in enumerate(dates):
            day = date.strftime("%Y-%m-%d")
            for j, ticker in enumerate(tickers):
                close = closes[i, j]
                if np.isnan(close):
                    continue
                volume = int(volumes[i, j])
                handle.write(f"{day},{ticker},{float(close)!r},{volume}\n")


def filter_universe(panel: PricePanel, window: PeriodWindow) -> PricePanel:
    """Drop illiquid and gap-ridden tickers for one formation window.

    Removes (a) the bottom floor(N/10) tickers by formation-window dollar
    volume (ties broken by ticker name) and (b) every ticker with a missing
    close or non-positive volume on any formation day.  The output keeps all
    window dates for the survivors and is stamped so that re-filtering it for
    the same window is a no-op.
    """
    stamp = (window.formation_start, window.formation_end)
    if panel.filter_stamp == stamp:
        return panel
    dates = panel.dates
    if len(dates) == 0 or window.formation_start < dates[0] or window.trading_end > dates[-1]:
        raise ConfigError("window lies outside the panel date range")

    fmask = window.formation_mask(dates)
    closes = panel.closes.loc[fmask]
    volumes = panel.volumes.loc[fmask]

    has_gap = closes.isna().any() | volumes.isna().any() | (volumes.fillna(0.0) <= 0).any()
    gap_drops = set(closes.columns[has_gap])

    dollar = (closes * volumes).fillna(0.0).sum()
    n_drop = panel.n_tickers // 10
    by_liquidity = sorted(panel.tickers, key=lambda t: (dollar[t], t))
    decile_drops = set(by_liquidity[:n_drop])

    survivors = [t for t in panel.tickers if t not in gap_drops and t not in decile_drops]
    if not survivors:
        raise EmptyUniverse(
            f"no tickers survive filtering for formation {window.formation_start.date()}"
        )

    wmask = window.all_mask(dates)
    filtered = PricePanel(
        closes=panel.closes.loc[wmask, survivors],
        volumes=panel.volumes.loc[wmask, survivors],
        filter_stamp=stamp,
    )
    return filtered


def forward_filled_closes(
    panel: PricePanel, window: PeriodWindow
) -> tuple[pd.DataFrame, dict[str, pd.Timestamp]]:
    """Carry the last close forward over trading-window gaps.

    Returns the filled close matrix over the window plus, per ticker with a
    gap, the first date whose value is carried forward rather than observed.
    From that date on the ticker is treated as halted (delisting semantics):
    open positions are force-closed at the carried price and no new trades
    are taken on pairs using it.
    """
    wmask = window.all_mask(panel.dates)
    closes = panel.closes.loc[wmask]
    stale_from: dict[str, pd.Timestamp] = {}
    missing = closes.isna()
    if missing.any().any():
        for ticker in closes.columns[missing.any()]:
            stale_from[ticker] = closes.index[missing[ticker]][0]
        closes = closes.ffill()
        if closes.isna().any().any():
            raise MissingBasePrice("gap at the start of the window cannot be carried forward")
    return closes, stale_from


@dataclass(frozen=True)
class NormalizedPanel:
    """Log prices rebased to zero at the window's formation start.

    `values` spans formation and trading dates with the same base, so the
    sum-of-squared-deviations metric and spread levels are scale-free.
    `stale_from` marks tickers whose trading-window tail is carried forward.
    """

    values: pd.DataFrame
    window: PeriodWindow
    stale_from: dict[str, pd.Timestamp] = field(default_factory=dict)

    @property
    def dates(self) -> pd.DatetimeIndex:
        return self.values.index

    @property
    def tickers(self) -> list[str]:
        return list(self.values.columns)

    def formation_values(self) -> pd.DataFrame:
        return self.values.loc[self.window.formation_mask(self.values.index)]

    def trading_values(self) -> pd.DataFrame:
        return self.values.loc[self.window.trading_mask(self.values.index)]


def normalize_log_prices(panel: PricePanel, window: PeriodWindow) -> NormalizedPanel:
    """Rebase log closes at the formation start: P_t = ln(close_t) - ln(base).

    Requires a filtered panel (complete formation data); trading-window gaps
    are carried forward and reported via `stale_from`.
    """
    raw = panel.closes.loc[window.formation_mask(panel.dates)]
    if raw.empty or raw.index[0] != window.formation_start:
        raise MissingBasePrice(f"no trading day at {window.formation_start.date()}")
    if raw.isna().any().any():
        raise MissingBasePrice("formation window has gaps; filter the panel first")
    closes, stale_from = forward_filled_closes(panel, window)
    base = closes.loc[window.formation_start]
    values = np.log(closes).sub(np.log(base), axis=1)
    return NormalizedPanel(values=values, window=window, stale_from=stale_from)


# --- subperiods and the date-dependent cost schedule ------------------------


@dataclass(frozen=True)
class Subperiod:
    """Half-open [start, end) slice of history with its own cost regime."""

    label: str
    start: pd.Timestamp
    end: pd.Timestamp
    oneway_cost_bps: float
    short_fee_annual: float

    def __post_init__(self):
        if self.start >= self.end:
            raise ConfigError(f"subperiod {self.label}: start must precede end")
        if self.oneway_cost_bps < 0 or self.short_fee_annual < 0:
            raise ConfigError(f"subperiod {self.label}: costs must be >= 0")


@dataclass(frozen=True)
class SubperiodTable:
    """Contiguous, non-overlapping subperiod rows covering a span of history.

    The final row additionally accepts its own end date, so the table covers
    [first.start, last.end] inclusive.
    """

    rows: tuple[Subperiod, ...]

    def __post_init__(self):
        if not self.rows:
            raise ConfigError("subperiod table needs at least one row")
        for prev, nxt in zip(self.rows, self.rows[1:]):
            if prev.end != nxt.start:
                raise ConfigError(
                    f"subperiods {prev.label} and {nxt.label} are not contiguous"
                )

    @property
    def start(self) -> pd.Timestamp:
        return self.rows[0].start

    @property
    def end(self) -> pd.Timestamp:
        return self.rows[-1].end

    def covers(self, date: pd.Timestamp) -> bool:
        return self.start <= date <= self.end

    def locate(self, date: pd.Timestamp) -> Subperiod:
        if not self.covers(date):
            raise ConfigError(f"{date.date()} outside subperiod table")
        for row in self.rows:
            if row.start <= date < row.end:
                return row
        return self.rows[-1]

    @classmethod
    def single(
        cls,
        start: pd.Timestamp,
        end: pd.Timestamp,
        oneway_cost_bps: float,
        short_fee_annual: float,
        label: str = "all",
    ) -> "SubperiodTable":
        return cls(rows=(Subperiod(label, start, end, oneway_cost_bps, short_fee_annual),))

    @classmethod
    def default(cls) -> "SubperiodTable":
        """Six-regime 1990-2020 schedule with the declining one-way costs."""
        spec = [
            ("1990-00", "1990-01-01", "2000-03-01", 35.0),
            ("2000-02", "2000-03-01", "2002-10-01", 30.0),
            ("2002-07", "2002-10-01", "2007-08-01", 30.0),
            ("2007-09", "2007-08-01", "2009-06-01", 30.0),
            ("2009-20", "2009-06-01", "2020-02-20", 26.0),
            ("Covid", "2020-02-20", "2020-06-01", 26.0),
        ]
        rows = tuple(
            Subperiod(label, pd.Timestamp(s), pd.Timestamp(e), bps, 0.006)
            for label, s, e, bps in spec
        )
        return cls(rows=rows)

    @classmethod
    def from_csv(cls, path: str | Path) -> "SubperiodTable":
        """Read rows `label,start_date,end_date,oneway_cost_bps,short_fee_annual`."""
        p = Path(path)
        if not p.exists():
            raise MissingFile(str(p))
        rows = []
        with open(p, "r", encoding="utf-8", newline="") as handle:
            reader = csv.reader(handle)
            header = next(reader, None)
            if header is None or [h.strip().lower() for h in header] != [
                "label", "start_date", "end_date", "oneway_cost_bps", "short_fee_annual",
            ]:
                raise MalformedRow(1, f"bad subperiod header {header!r}")
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 5:
                    raise MalformedRow(lineno, f"expected 5 fields, got {len(row)}")
                try:
                    rows.append(
                        Subperiod(
                            label=row[0].strip(),
                            start=pd.Timestamp(row[1].strip()),
                            end=pd.Timestamp(row[2].strip()),
                            oneway_cost_bps=float(row[3]),
                            short_fee_annual=float(row[4]),
                        )
                    )
                except (ValueError, ConfigError) as exc:
                    raise MalformedRow(lineno, str(exc))
        return cls(rows=tuple(rows))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write("label,start_date,end_date,oneway_cost_bps,short_fee_annual\n")
            for row in self.rows:
                handle.write(
                    f"{row.label},{row.start.strftime('%Y-%m-%d')},"
                    f"{row.end.strftime('%Y-%m-%d')},{row.oneway_cost_bps!r},"
                    f"{row.short_fee_annual!r}\n"
                )

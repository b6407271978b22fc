"""Spread construction, threshold trading with execution lag, and cost accounting.

Trading rules: with z the spread standardized by its formation-period mean and
standard deviation, short the spread when z rises above the threshold, go long
below the negative threshold, close on the first day z touches or crosses
zero, and force-close anything still open on the last trading day.  A signal
on day t executes at the close of day t + lag.

Positions are dollar-neutral with gross notional 2 per pair (hedge-ratio
weighted on the cointegration path).  Each leg transaction pays the one-way
proportional cost of its transacted value; short legs accrue the annual
borrow fee pro rata per holding day, charged at close.  Daily returns are
mark-to-market P&L on one unit of committed capital per pair.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import (
    ConfigError,
    DegenerateSpread,
    EmptyTradingWindow,
    IndexMismatch,
    MissingHedgeRatio,
)
from .marketdata import DAYS_PER_YEAR, NormalizedPanel, PeriodWindow, PricePanel, SubperiodTable
from .pairselect import PairCandidate

OPEN_SHORT = "open_short_spread"
OPEN_LONG = "open_long_spread"
CLOSE = "close"
FORCE_CLOSE = "force_close"

CAPITAL_BASES = ("committed", "employed")


@dataclass(frozen=True)
class StrategyParams:
    """The tunable quadruple plus execution lag.

    `length_multiplier` scales the canonical 252-day formation / 126-day
    trading windows; `confidence` only matters on the cointegration path.
    """

    n_pairs: int = 20
    threshold: float = 2.0
    length_multiplier: float = 1.0
    confidence: float = 0.05
    lag: int = 1
    allow_reentry: bool = True

    def __post_init__(self):
        if self.n_pairs < 1:
            raise ConfigError("n_pairs must be >= 1")
        if self.threshold <= 0:
            raise ConfigError("threshold must be > 0")
        if self.length_multiplier <= 0:
            raise ConfigError("length_multiplier must be > 0")
        if not (0.0 < self.confidence <= 1.0):
            raise ConfigError("confidence must lie in (0, 1]")
        if self.lag < 0:
            raise ConfigError("lag must be >= 0")

    @property
    def formation_days(self) -> int:
        return round(252 * self.length_multiplier)

    @property
    def trading_days(self) -> int:
        return round(126 * self.length_multiplier)


@dataclass(frozen=True)
class CostModel:
    """One-way proportional costs (bps of notional) and the short-borrow fee.

    Costs are either flat or looked up by calendar date from a subperiod
    table; dates outside the table clamp to its first/last row.
    """

    flat_oneway_bps: float | None = None
    flat_short_fee: float | None = None
    subperiods: SubperiodTable | None = None

    def __post_init__(self):
        if self.flat_oneway_bps is None and self.subperiods is None:
            raise ConfigError("cost model needs a flat rate or a subperiod table")
        if self.flat_oneway_bps is not None and self.flat_oneway_bps < 0:
            raise ConfigError("one-way cost must be >= 0")
        if self.flat_short_fee is not None and self.flat_short_fee < 0:
            raise ConfigError("short fee must be >= 0")

    @classmethod
    def flat(cls, oneway_bps: float, short_fee_annual: float = 0.0) -> "CostModel":
        return cls(flat_oneway_bps=oneway_bps, flat_short_fee=short_fee_annual)

    @classmethod
    def zero(cls) -> "CostModel":
        return cls.flat(0.0, 0.0)

    @classmethod
    def from_subperiods(cls, table: SubperiodTable) -> "CostModel":
        return cls(subperiods=table)

    def _row(self, date: pd.Timestamp):
        table = self.subperiods
        if date < table.start:
            return table.rows[0]
        if date >= table.end:
            return table.rows[-1]
        return table.locate(date)

    def oneway_bps(self, date: pd.Timestamp) -> float:
        if self.flat_oneway_bps is not None:
            return self.flat_oneway_bps
        return self._row(date).oneway_cost_bps

    def short_fee_annual(self, date: pd.Timestamp) -> float:
        if self.flat_short_fee is not None:
            return self.flat_short_fee
        if self.subperiods is None:
            return 0.0
        return self._row(date).short_fee_annual

    def with_flat_oneway_bps(self, bps: float) -> "CostModel":
        """Override the transaction cost, keeping the short-fee source."""
        fee = self.flat_short_fee
        return CostModel(flat_oneway_bps=bps, flat_short_fee=fee, subperiods=self.subperiods)


@dataclass(frozen=True)
class SpreadSeries:
    """A pair's spread over formation + trading dates with formation stats.

    `degenerate` marks a zero formation standard deviation (identical legs);
    such pairs produce zero trades.  `halt_date` is the first trading day one
    leg's close had to be carried forward; the pair stops trading there.
    """

    pair: PairCandidate
    values: pd.Series
    window: PeriodWindow
    formation_mean: float
    formation_std: float
    degenerate: bool = False
    halt_date: pd.Timestamp | None = None


def build_spread(pair: PairCandidate, panel: NormalizedPanel, method: str) -> SpreadSeries:
    """Spread = price difference (distance) or regression residual (cointegration).

    Formation statistics use the unbiased (n-1) standard deviation over
    formation dates only, so trading z-scores never peek forward.
    """
    for leg in (pair.leg_a, pair.leg_b):
        if leg not in panel.values.columns:
            raise ConfigError(f"ticker {leg!r} not in panel")
    a = panel.values[pair.leg_a]
    b = panel.values[pair.leg_b]
    if method == "distance":
        values = a - b
    elif method == "cointegration":
        if pair.hedge_ratio is None or pair.intercept is None:
            raise MissingHedgeRatio(f"pair {pair.label} has no hedge ratio")
        values = a - pair.intercept - pair.hedge_ratio * b
    else:
        raise ConfigError(f"unknown spread method {method!r}")

    formation = values.loc[panel.window.formation_mask(values.index)]
    mean = float(formation.mean())
    std = float(formation.std(ddof=1))
    halt = None
    for leg in (pair.leg_a, pair.leg_b):
        stale = panel.stale_from.get(leg)
        if stale is not None and (halt is None or stale < halt):
            halt = stale
    return SpreadSeries(
        pair=pair,
        values=values,
        window=panel.window,
        formation_mean=mean,
        formation_std=std,
        degenerate=std == 0.0,
        halt_date=halt,
    )


def zscore(spread: SpreadSeries) -> pd.Series:
    """Trading-date spread standardized by the formation mean and std."""
    if spread.degenerate or spread.formation_std <= 0.0:
        raise DegenerateSpread(f"pair {spread.pair.label} has zero formation std")
    trading = spread.values.loc[spread.window.trading_mask(spread.values.index)]
    return (trading - spread.formation_mean) / spread.formation_std


@dataclass(frozen=True)
class TradeEvent:
    date: pd.Timestamp
    action: str
    leg_a_notional: float
    leg_b_notional: float
    cost_charged: float


@dataclass(frozen=True)
class TradeLedger:
    """Ordered open/close events plus the pair's daily net return series.

    Returns are defined on every trading day (0.0 when flat); `open_mask`
    marks days the pair holds a position, used by the employed-capital basis.
    """

    pair: str
    leg_a: str
    leg_b: str
    events: tuple[TradeEvent, ...]
    daily_returns: pd.Series
    open_mask: pd.Series

    @property
    def n_round_trips(self) -> int:
        return sum(1 for e in self.events if e.action in (OPEN_SHORT, OPEN_LONG))


def _signal_trades(z: np.ndarray, threshold: float, last: int, allow_reentry: bool):
    """Scan the z-series for (open_day, close_day|None, side) signal triples.

    side +1 = short the spread (entered above +threshold), -1 = long.
    A close signal fires on the first day z touches zero or flips sign
    relative to the entry side; re-entry resumes the following day.
    """
    trades = []
    state = 0
    open_i = -1
    for i in range(last + 1):
        if state == 0:
            if z[i] > threshold:
                state, open_i = 1, i
            elif z[i] < -threshold:
                state, open_i = -1, i
        else:
            if z[i] == 0.0 or (z[i] > 0) != (state > 0):
                trades.append((open_i, i, state))
                state = 0
                if not allow_reentry:
                    break
    if state != 0:
        trades.append((open_i, None, state))
    return trades


def simulate_pair(
    spread: SpreadSeries,
    prices: PricePanel | pd.DataFrame,
    params: StrategyParams,
    costs: CostModel,
) -> TradeLedger:
    """Run the threshold rules on one pair and account every cash flow.

    `prices` must cover both legs on all trading dates with no gaps (carry
    the last close forward upstream for halted tickers).  Entry executions
    never land on the pair's final live day, so every open is matched by a
    close or force-close.
    """
    pair = spread.pair
    window = spread.window
    if isinstance(prices, PricePanel):
        price_df = prices.closes
    else:
        price_df = prices
    trading_dates = spread.values.index[window.trading_mask(spread.values.index)]
    n_days = len(trading_dates)
    if n_days == 0:
        raise EmptyTradingWindow(f"no trading dates for pair {pair.label}")

    empty = pd.Series(np.zeros(n_days), index=trading_dates)
    flat_ledger = TradeLedger(
        pair=pair.label,
        leg_a=pair.leg_a,
        leg_b=pair.leg_b,
        events=(),
        daily_returns=empty,
        open_mask=empty.astype(bool),
    )
    if spread.degenerate:
        return flat_ledger

    # Final live day: the first stale date if a leg halts, else the last day.
    last = n_days - 1
    if spread.halt_date is not None and spread.halt_date <= trading_dates[-1]:
        last = int(trading_dates.searchsorted(spread.halt_date))
    if last <= 0:
        return flat_ledger

    z = zscore(spread).to_numpy()
    trades = _signal_trades(z, params.threshold, last, params.allow_reentry)
    if not trades:
        return flat_ledger

    s_a = price_df[pair.leg_a].reindex(trading_dates).to_numpy()
    s_b = price_df[pair.leg_b].reindex(trading_dates).to_numpy()
    if np.isnan(s_a[: last + 1]).any() or np.isnan(s_b[: last + 1]).any():
        raise ConfigError(f"price gaps for pair {pair.label}; forward-fill upstream")

    beta = 1.0 if pair.hedge_ratio is None else pair.hedge_ratio
    scale = 2.0 / (1.0 + abs(beta))
    # Long-spread dollar notionals; short spread is the negation.
    long_a, long_b = scale, -scale * beta

    pnl = np.zeros(n_days)
    open_mask = np.zeros(n_days, dtype=bool)
    events: list[TradeEvent] = []

    for open_i, close_i, side in trades:
        entry = open_i + params.lag
        if entry >= last:
            continue  # no opens on (or beyond) the final live day
        if close_i is None or close_i + params.lag > last:
            exit_, action = last, FORCE_CLOSE
        else:
            exit_, action = close_i + params.lag, CLOSE

        direction = -float(side)  # side +1 (z high) shorts the spread
        n_a, n_b = direction * long_a, direction * long_b
        q_a, q_b = float(n_a / s_a[entry]), float(n_b / s_b[entry])

        entry_cost = costs.oneway_bps(trading_dates[entry]) / 1e4 * (abs(n_a) + abs(n_b))
        pnl[entry] -= entry_cost
        events.append(
            TradeEvent(
                date=trading_dates[entry],
                action=OPEN_SHORT if side > 0 else OPEN_LONG,
                leg_a_notional=n_a,
                leg_b_notional=n_b,
                cost_charged=entry_cost,
            )
        )

        seg = slice(entry + 1, exit_ + 1)
        pnl[seg] += q_a * np.diff(s_a[entry : exit_ + 1]) + q_b * np.diff(s_b[entry : exit_ + 1])
        open_mask[entry : exit_ + 1] = True

        v_a, v_b = float(q_a * s_a[exit_]), float(q_b * s_b[exit_])
        exit_cost = costs.oneway_bps(trading_dates[exit_]) / 1e4 * (abs(v_a) + abs(v_b))
        short_notional = max(0.0, -n_a) + max(0.0, -n_b)
        fee = (
            costs.short_fee_annual(trading_dates[entry])
            / DAYS_PER_YEAR
            * (exit_ - entry)
            * short_notional
        )
        pnl[exit_] -= exit_cost + fee
        events.append(
            TradeEvent(
                date=trading_dates[exit_],
                action=action,
                leg_a_notional=v_a,
                leg_b_notional=v_b,
                cost_charged=exit_cost + fee,
            )
        )

    return TradeLedger(
        pair=pair.label,
        leg_a=pair.leg_a,
        leg_b=pair.leg_b,
        events=tuple(events),
        daily_returns=pd.Series(pnl, index=trading_dates),
        open_mask=pd.Series(open_mask, index=trading_dates),
    )


def portfolio_returns(
    ledgers: Sequence[TradeLedger], n_pairs: int, basis: str = "committed"
) -> pd.Series:
    """Aggregate pair ledgers into one daily portfolio return series.

    Committed basis divides each day's total P&L by the nominated pair count
    (unit capital per pair, traded or not); employed basis divides by the
    number of pairs actually holding a position that day (0 when none).
    """
    if basis not in CAPITAL_BASES:
        raise ConfigError(f"basis must be one of {CAPITAL_BASES}")
    if n_pairs < 1:
        raise ConfigError("n_pairs must be >= 1")
    if not ledgers:
        raise ConfigError("need at least one ledger")
    index = ledgers[0].daily_returns.index
    for ledger in ledgers[1:]:
        if not ledger.daily_returns.index.equals(index):
            raise IndexMismatch(f"ledger {ledger.pair} has a different date index")

    total = np.zeros(len(index))
    open_count = np.zeros(len(index))
    for ledger in ledgers:
        total += ledger.daily_returns.to_numpy()
        open_count += ledger.open_mask.to_numpy()
    if basis == "committed":
        out = total / float(n_pairs)
    else:
        out = np.divide(total, open_count, out=np.zeros_like(total), where=open_count > 0)
    return pd.Series(out, index=index)


LEDGER_CSV_HEADER = ["pair", "date", "action", "leg_a_notional", "leg_b_notional", "cost", "cum_pnl"]


def write_ledgers_csv(ledgers: Sequence[TradeLedger], dest: str | Path) -> None:
    with open(dest, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(LEDGER_CSV_HEADER)
        for ledger in ledgers:
            cum = 0.0
            returns = ledger.daily_returns
            event_iter = iter(ledger.events)
            event = next(event_iter, None)
            for date in returns.index:
                cum += float(returns.loc[date])
                while event is not None and event.date == date:
                    writer.writerow(
                        [
                            ledger.pair,
                            date.strftime("%Y-%m-%d"),
                            event.action,
                            repr(float(event.leg_a_notional)),
                            repr(float(event.leg_b_notional)),
                            repr(float(event.cost_charged)),
                            repr(cum),
                        ]
                    )
                    event = next(event_iter, None)


def write_returns_csv(returns: pd.Series, dest: str | Path) -> None:
    with open(dest, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("date,return\n")
        for date, value in returns.items():
            handle.write(f"{date.strftime('%Y-%m-%d')},{float(value)!r}\n")


def read_returns_csv(path: str | Path) -> pd.Series:
    frame = pd.read_csv(path, parse_dates=["date"])
    if list(frame.columns) != ["date", "return"]:
        raise ConfigError(f"expected header date,return in {path}")
    return pd.Series(frame["return"].to_numpy(), index=pd.DatetimeIndex(frame["date"]))

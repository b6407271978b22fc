"""Backtest orchestration: window tiling, grid search, walk-forward retuning.

run_backtest tiles formation/trading cycles back-to-back over a date range
(trading windows never overlap), re-selecting pairs each cycle.  run_grid
evaluates every parameter combination; "best" rankings use mean monthly net
return with the Sharpe ratio as tiebreaker (switchable).  adaptive_backtest
re-tunes on the immediately preceding block every two years, so parameter
choices never look forward.  Grid points are independent pure computations
over shared immutable data; parallel evaluation merges deterministically.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from .errors import PairsbtError, RangeTooShort, TooFewResults
from .marketdata import (
    PricePanel,
    SubperiodTable,
    filter_universe,
    forward_filled_closes,
    normalize_log_prices,
    window_at,
)
from .metrics import monthly_returns, sharpe_ratio
from .pairselect import SelectionConfig, select_pairs
from .tradesim import (
    CostModel,
    StrategyParams,
    TradeLedger,
    build_spread,
    portfolio_returns,
    simulate_pair,
)

BASELINE_PARAMS = StrategyParams(
    n_pairs=20, threshold=2.0, length_multiplier=1.0, confidence=0.05
)


@dataclass(frozen=True)
class ParamGrid:
    """Axis choices for the hyperparameter search (defaults: the full sweep)."""

    n_pairs_choices: tuple[int, ...] = (5, 10, 20, 40)
    threshold_choices: tuple[float, ...] = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
    multiplier_choices: tuple[float, ...] = (0.16, 0.5, 1.0, 1.5)
    confidence_choices: tuple[float, ...] = (0.01, 0.05, 0.1)

    def __post_init__(self):
        for name in ("n_pairs_choices", "threshold_choices", "multiplier_choices", "confidence_choices"):
            if not getattr(self, name):
                raise ValueError(f"{name} must be non-empty")

    def points(self, method: str, lag: int, allow_reentry: bool = True) -> list[StrategyParams]:
        """Cartesian product in deterministic axis order.

        The confidence axis only applies to the cointegration method; the
        distance grid pins it at 0.05 (unused there).
        """
        confidences = self.confidence_choices if method == "cointegration" else (0.05,)
        return [
            StrategyParams(
                n_pairs=n,
                threshold=thr,
                length_multiplier=mult,
                confidence=conf,
                lag=lag,
                allow_reentry=allow_reentry,
            )
            for n, thr, mult, conf in itertools.product(
                self.n_pairs_choices, self.threshold_choices, self.multiplier_choices, confidences
            )
        ]


@dataclass(frozen=True)
class CycleInfo:
    formation_start: pd.Timestamp
    formation_end: pd.Timestamp
    trading_end: pd.Timestamp
    n_selected: int
    exhausted: bool


@dataclass(frozen=True)
class BacktestResult:
    returns: pd.Series
    n_trades: int
    trade_open_counts: pd.Series
    cycles: tuple[CycleInfo, ...]
    ledgers: tuple[TradeLedger, ...] = ()
    selected: tuple = ()  # (cycle_index, PairCandidate) when ledgers are kept


def run_backtest(
    data: PricePanel,
    method: str,
    params: StrategyParams,
    costs: CostModel,
    start: pd.Timestamp,
    end: pd.Timestamp,
    benchmark_ticker: str | None = None,
    capital_basis: str = "committed",
    keep_ledgers: bool = False,
    exhaustive: bool = False,
) -> BacktestResult:
    """Full pipeline over one date range: filter, select, trade, aggregate.

    Cycles advance by the trading-window length; a final partial trading
    window is traded if at least one day remains.  The committed-capital
    return divides by the nominated pair count each cycle.
    """
    panel = data.restrict(start=start, end=end)
    if benchmark_ticker and benchmark_ticker in panel.closes.columns:
        panel = panel.drop_tickers([benchmark_ticker])
    dates = panel.dates
    f_days, t_days = params.formation_days, params.trading_days
    if len(dates) < f_days + 1:
        raise RangeTooShort(
            f"{len(dates)} trading days cannot host a {f_days}-day formation "
            "plus one trading day"
        )

    pieces: list[pd.Series] = []
    open_pieces: list[pd.Series] = []
    cycles: list[CycleInfo] = []
    ledgers: list[TradeLedger] = []
    selected: list = []
    n_trades = 0

    cursor = 0
    cycle_index = 0
    while cursor + f_days < len(dates):
        t_actual = min(t_days, len(dates) - cursor - f_days)
        window = window_at(dates, cursor, f_days, t_actual)
        filtered = filter_universe(panel, window)
        normalized = normalize_log_prices(filtered, window)
        config = SelectionConfig(
            method=method, n_pairs=params.n_pairs, confidence=params.confidence,
            exhaustive=exhaustive,
        )
        selection = select_pairs(normalized, window, config)
        prices, _ = forward_filled_closes(filtered, window)

        trading_dates = dates[(dates > window.formation_end) & (dates <= window.trading_end)]
        cycle_returns = pd.Series(np.zeros(len(trading_dates)), index=trading_dates)
        cycle_opens = pd.Series(np.zeros(len(trading_dates)), index=trading_dates)
        if selection.pairs:
            cycle_ledgers = [
                simulate_pair(build_spread(pair, normalized, method), prices, params, costs)
                for pair in selection.pairs
            ]
            cycle_returns = portfolio_returns(cycle_ledgers, params.n_pairs, capital_basis)
            for ledger in cycle_ledgers:
                n_trades += ledger.n_round_trips
                for event in ledger.events:
                    if event.action.startswith("open"):
                        cycle_opens.loc[event.date] += 1
            if keep_ledgers:
                ledgers.extend(cycle_ledgers)
                selected.extend((cycle_index, pair) for pair in selection.pairs)
        pieces.append(cycle_returns)
        open_pieces.append(cycle_opens)
        cycles.append(
            CycleInfo(
                formation_start=window.formation_start,
                formation_end=window.formation_end,
                trading_end=window.trading_end,
                n_selected=len(selection.pairs),
                exhausted=selection.exhausted,
            )
        )
        cursor += t_days
        cycle_index += 1

    return BacktestResult(
        returns=pd.concat(pieces),
        n_trades=n_trades,
        trade_open_counts=pd.concat(open_pieces),
        cycles=tuple(cycles),
        ledgers=tuple(ledgers),
        selected=tuple(selected),
    )


@dataclass(frozen=True)
class GridResult:
    params: StrategyParams
    mean_monthly_return: float
    annualized_sharpe: float
    n_trades: int
    start: pd.Timestamp
    end: pd.Timestamp

    @property
    def params_key(self) -> tuple:
        p = self.params
        return (p.n_pairs, p.threshold, p.length_multiplier, p.confidence)


@dataclass(frozen=True)
class GridFailure:
    params: StrategyParams
    error: str


@dataclass(frozen=True)
class GridRun:
    results: tuple[GridResult, ...]  # ranked best-first
    failures: tuple[GridFailure, ...]
    rank_by: str


def _rank_key(result: GridResult, rank_by: str) -> tuple:
    primary = result.mean_monthly_return
    secondary = result.annualized_sharpe
    if rank_by == "sharpe":
        primary, secondary = secondary, primary
    return (-primary, -secondary, result.params_key)


def rank_results(results: Sequence[GridResult], rank_by: str = "return") -> list[GridResult]:
    return sorted(results, key=lambda r: _rank_key(r, rank_by))


def _map_points(fn: Callable, points: Sequence, jobs: int) -> list:
    """Evaluate independent points, in order, optionally on a thread pool."""
    if jobs <= 1 or len(points) <= 1:
        return [fn(p) for p in points]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, points))


def run_grid(
    data: PricePanel,
    method: str,
    grid: ParamGrid,
    costs: CostModel,
    start: pd.Timestamp,
    end: pd.Timestamp,
    lag: int = 1,
    rank_by: str = "return",
    jobs: int = 1,
    benchmark_ticker: str | None = None,
    capital_basis: str = "committed",
    allow_reentry: bool = True,
) -> GridRun:
    """One GridResult per grid point, ranked; failed points are recorded."""
    points = grid.points(method, lag, allow_reentry)

    def evaluate(params: StrategyParams):
        try:
            bt = run_backtest(
                data, method, params, costs, start, end,
                benchmark_ticker=benchmark_ticker, capital_basis=capital_basis,
            )
            monthly = monthly_returns(bt.returns)["ret"].to_numpy()
            sharpe, _ = sharpe_ratio(monthly)
            return GridResult(
                params=params,
                mean_monthly_return=float(monthly.mean()),
                annualized_sharpe=sharpe,
                n_trades=bt.n_trades,
                start=start,
                end=end,
            )
        except PairsbtError as exc:
            return GridFailure(params=params, error=f"{type(exc).__name__}: {exc}")

    outcomes = _map_points(evaluate, points, jobs)
    results = [o for o in outcomes if isinstance(o, GridResult)]
    failures = [o for o in outcomes if isinstance(o, GridFailure)]
    return GridRun(
        results=tuple(rank_results(results, rank_by)),
        failures=tuple(failures),
        rank_by=rank_by,
    )


@dataclass(frozen=True)
class AveragedParams:
    """Arithmetic per-axis means over the top-k grid results."""

    n_pairs: float
    threshold: float
    multiplier: float
    confidence: float

    def snapped(self, grid: ParamGrid) -> StrategyParams:
        """Re-snap each mean to the nearest grid choice (ties toward smaller)."""

        def nearest(value: float, choices: Sequence[float]) -> float:
            return min(choices, key=lambda c: (abs(c - value), c))

        return StrategyParams(
            n_pairs=int(nearest(self.n_pairs, grid.n_pairs_choices)),
            threshold=nearest(self.threshold, grid.threshold_choices),
            length_multiplier=nearest(self.multiplier, grid.multiplier_choices),
            confidence=nearest(self.confidence, grid.confidence_choices),
        )


def best_and_averaged(
    results: Sequence[GridResult], k: int = 3, rank_by: str = "return"
) -> tuple[GridResult, AveragedParams]:
    """The rank-1 result plus per-axis means over the top k."""
    if len(results) < k:
        raise TooFewResults(f"need >= {k} grid results, got {len(results)}")
    ranked = rank_results(results, rank_by)
    top = ranked[:k]
    averaged = AveragedParams(
        n_pairs=float(np.mean([r.params.n_pairs for r in top])),
        threshold=float(np.mean([r.params.threshold for r in top])),
        multiplier=float(np.mean([r.params.length_multiplier for r in top])),
        confidence=float(np.mean([r.params.confidence for r in top])),
    )
    return ranked[0], averaged


@dataclass(frozen=True)
class BlockChoice:
    start: pd.Timestamp
    end: pd.Timestamp
    params: StrategyParams
    source: str  # baseline | tuned | carried
    traded: bool
    note: str = ""


@dataclass(frozen=True)
class AdaptiveResult:
    returns: pd.Series
    blocks: tuple[BlockChoice, ...]
    n_trades: int
    trade_open_counts: pd.Series


def adaptive_backtest(
    data: PricePanel,
    method: str,
    grid: ParamGrid,
    costs: CostModel,
    start: pd.Timestamp,
    end: pd.Timestamp,
    lag: int = 1,
    retune_years: int = 2,
    baseline: StrategyParams = BASELINE_PARAMS,
    rank_by: str = "return",
    jobs: int = 1,
    benchmark_ticker: str | None = None,
    capital_basis: str = "committed",
) -> AdaptiveResult:
    """Walk-forward strategy: re-tune on the preceding block, trade the next.

    Blocks are aligned to calendar years from the range start.  The first
    block (no history) trades the baseline parameters; each later block
    trades the rank-1 parameters of a grid run over the immediately
    preceding block, falling back to the previous choice when every grid
    point fails.  Parameter choices therefore never read past a block start.
    """
    start, end = pd.Timestamp(start), pd.Timestamp(end)
    offset = pd.DateOffset(years=retune_years)
    if start + offset >= end:
        raise RangeTooShort(f"range must span at least {retune_years} years twice")

    boundaries = [start]
    while boundaries[-1] + offset < end:
        boundaries.append(boundaries[-1] + offset)
    block_spans = [
        (b, min(nxt - pd.Timedelta(days=1), end))
        for b, nxt in zip(boundaries, boundaries[1:] + [end + pd.Timedelta(days=1)])
    ]

    baseline = replace(baseline, lag=lag)
    pieces: list[pd.Series] = []
    open_pieces: list[pd.Series] = []
    blocks: list[BlockChoice] = []
    n_trades = 0
    current = baseline
    for i, (b_start, b_end) in enumerate(block_spans):
        source, note = ("baseline", "") if i == 0 else ("tuned", "")
        if i > 0:
            tune_run = run_grid(
                data, method, grid, costs,
                start=block_spans[i - 1][0], end=block_spans[i - 1][1],
                lag=lag, rank_by=rank_by, jobs=jobs,
                benchmark_ticker=benchmark_ticker, capital_basis=capital_basis,
            )
            if tune_run.results:
                current = tune_run.results[0].params
            else:
                source, note = "carried", "grid had no successful points"
        try:
            bt = run_backtest(
                data, method, current, costs, b_start, b_end,
                benchmark_ticker=benchmark_ticker, capital_basis=capital_basis,
            )
            pieces.append(bt.returns)
            open_pieces.append(bt.trade_open_counts)
            n_trades += bt.n_trades
            blocks.append(BlockChoice(b_start, b_end, current, source, True, note))
        except RangeTooShort as exc:
            blocks.append(BlockChoice(b_start, b_end, current, source, False, str(exc)))

    if not pieces:
        raise RangeTooShort("no block could host a formation + trading cycle")
    return AdaptiveResult(
        returns=pd.concat(pieces),
        blocks=tuple(blocks),
        n_trades=n_trades,
        trade_open_counts=pd.concat(open_pieces),
    )


@dataclass(frozen=True)
class SensitivityCell:
    lag: int
    cost_bps: float
    averaged: AveragedParams | None
    per_subperiod: tuple[tuple[str, AveragedParams], ...]
    skipped: tuple[tuple[str, str], ...]  # (subperiod label, reason)


@dataclass(frozen=True)
class SensitivityResult:
    cells: tuple[SensitivityCell, ...]
    lags: tuple[int, ...]
    cost_levels: tuple[float, ...]

    def cell(self, lag: int, cost_bps: float) -> SensitivityCell:
        for c in self.cells:
            if c.lag == lag and c.cost_bps == cost_bps:
                return c
        raise KeyError((lag, cost_bps))


def sensitivity_table(
    data: PricePanel,
    method: str,
    grid: ParamGrid,
    lags: Sequence[int],
    cost_levels_bps: Sequence[float],
    start: pd.Timestamp,
    end: pd.Timestamp,
    subperiods: SubperiodTable,
    base_costs: CostModel | None = None,
    k: int = 3,
    rank_by: str = "return",
    jobs: int = 1,
    benchmark_ticker: str | None = None,
) -> SensitivityResult:
    """Average optimal parameters per (execution lag, flat cost level) cell.

    Each cell runs the grid per subperiod with the one-way cost overridden to
    a flat level, averages the top-k parameters per subperiod, then takes the
    unweighted mean across subperiods.  Subperiods too short for the grid (or
    outside the data range) are skipped and recorded.
    """
    start, end = pd.Timestamp(start), pd.Timestamp(end)
    short_fee = base_costs.flat_short_fee if base_costs is not None else 0.0
    cells: list[SensitivityCell] = []
    for lag in lags:
        for cost in cost_levels_bps:
            costs = CostModel.flat(cost, short_fee or 0.0)
            if base_costs is not None and base_costs.subperiods is not None:
                costs = base_costs.with_flat_oneway_bps(cost)
            per_sub: list[tuple[str, AveragedParams]] = []
            skipped: list[tuple[str, str]] = []
            for sub in subperiods.rows:
                s = max(sub.start, start)
                e = min(sub.end, end)
                if s >= e:
                    skipped.append((sub.label, "outside data range"))
                    continue
                run = run_grid(
                    data, method, grid, costs, s, e,
                    lag=lag, rank_by=rank_by, jobs=jobs,
                    benchmark_ticker=benchmark_ticker,
                )
                if len(run.results) < k:
                    skipped.append((sub.label, f"only {len(run.results)} grid points succeeded"))
                    continue
                _, averaged = best_and_averaged(run.results, k=k, rank_by=rank_by)
                per_sub.append((sub.label, averaged))
            if per_sub:
                averaged = AveragedParams(
                    n_pairs=float(np.mean([a.n_pairs for _, a in per_sub])),
                    threshold=float(np.mean([a.threshold for _, a in per_sub])),
                    multiplier=float(np.mean([a.multiplier for _, a in per_sub])),
                    confidence=float(np.mean([a.confidence for _, a in per_sub])),
                )
            else:
                averaged = None
            cells.append(
                SensitivityCell(
                    lag=lag,
                    cost_bps=cost,
                    averaged=averaged,
                    per_subperiod=tuple(per_sub),
                    skipped=tuple(skipped),
                )
            )
    return SensitivityResult(
        cells=tuple(cells), lags=tuple(lags), cost_levels=tuple(cost_levels_bps)
    )

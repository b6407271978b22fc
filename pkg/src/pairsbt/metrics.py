"""Monthly aggregation and per-subperiod performance summaries.

The risk-adjusted measure is an annualized Sharpe ratio over monthly returns
with a zero risk-free rate (mean/std * sqrt(12)); reports label it as such.
Returns are on the committed-capital basis unless stated otherwise upstream.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .errors import BenchmarkCoverageGap, ConfigError
from .marketdata import SubperiodTable

TOTAL_LABEL = "Total"


def monthly_returns(daily: pd.Series) -> pd.DataFrame:
    """Compound daily returns within each calendar month.

    Returns one row per month with columns `ret` (the compounded return),
    `last_day` (the month's final trading day, used for subperiod
    assignment), `n_days`, and `partial` flagging the series' boundary
    months, which may not span the full calendar month.
    """
    if daily.empty:
        raise ConfigError("daily return series is empty")
    if not daily.index.is_monotonic_increasing:
        raise ConfigError("daily returns must be date-sorted")
    period = daily.index.to_period("M")
    frame = pd.DataFrame({"ret": daily.to_numpy()}, index=daily.index)
    grouped = frame.groupby(period)["ret"]
    compounded = grouped.apply(lambda r: float(np.prod(1.0 + r.to_numpy()) - 1.0))
    out = pd.DataFrame(
        {
            "ret": compounded,
            "last_day": grouped.apply(lambda r: r.index[-1]),
            "n_days": grouped.size(),
        }
    )
    out["partial"] = False
    out.iloc[0, out.columns.get_loc("partial")] = True
    out.iloc[-1, out.columns.get_loc("partial")] = True
    out.index.name = "month"
    return out


@dataclass(frozen=True)
class PerformanceRow:
    """One scenario x subperiod line of the summary table."""

    scenario: str
    subperiod: str
    mean_monthly: float
    annualized_sharpe: float
    excess_monthly: float
    n_trades: int
    n_months: int
    degenerate_dispersion: bool = False


def sharpe_ratio(monthly: np.ndarray) -> tuple[float, bool]:
    """Annualized Sharpe; inf sentinel (flagged) when dispersion is zero.

    A constant series stored in floats can carry ~1e-18 of rounding noise in
    its std, so "zero dispersion" is judged relative to the mean's magnitude.
    """
    mean = float(monthly.mean())
    if len(monthly) < 2:
        return math.copysign(math.inf, mean) if mean != 0.0 else 0.0, True
    std = float(monthly.std(ddof=1))
    if std <= 1e-14 + abs(mean) * 1e-12:
        return math.copysign(math.inf, mean) if mean != 0.0 else 0.0, True
    return mean / std * math.sqrt(12.0), False


def performance_summary(
    strategy: pd.Series,
    benchmark: pd.Series,
    label: str,
    subperiods: SubperiodTable,
    trade_open_counts: pd.Series | None = None,
) -> list[PerformanceRow]:
    """One row per subperiod plus a Total row over the whole range.

    Months are assigned to the subperiod containing their final trading day;
    excess is the strategy's mean monthly return minus the benchmark's over
    the same months.  `trade_open_counts` (opens per date) feeds the trade
    counters when available.
    """
    if strategy.empty:
        raise ConfigError("strategy return series is empty")
    missing = strategy.index.difference(benchmark.index)
    if len(missing) > 0:
        raise BenchmarkCoverageGap(
            f"benchmark misses {len(missing)} strategy dates, first {missing[0].date()}"
        )
    strat_m = monthly_returns(strategy)
    bench_m = monthly_returns(benchmark.reindex(strategy.index))
    if trade_open_counts is None:
        trade_open_counts = pd.Series(0, index=strategy.index)
    # Guarantee the partition property: every month lands in exactly one row.
    if strat_m["last_day"].iloc[0] < subperiods.start or strat_m["last_day"].iloc[-1] > subperiods.end:
        raise ConfigError(
            f"strategy range {strategy.index[0].date()}..{strategy.index[-1].date()} "
            "not covered by the subperiod table"
        )

    def row_for(name: str, mask: np.ndarray, trade_mask: np.ndarray) -> PerformanceRow | None:
        months = strat_m.loc[mask]
        if months.empty:
            return None
        sharpe, degenerate = sharpe_ratio(months["ret"].to_numpy())
        mean = float(months["ret"].mean())
        bench_mean = float(bench_m.loc[mask, "ret"].mean())
        return PerformanceRow(
            scenario=label,
            subperiod=name,
            mean_monthly=mean,
            annualized_sharpe=sharpe,
            excess_monthly=mean - bench_mean,
            n_trades=int(trade_open_counts.loc[trade_mask].sum()),
            n_months=len(months),
            degenerate_dispersion=degenerate,
        )

    rows: list[PerformanceRow] = []
    last_days = strat_m["last_day"]
    dates = trade_open_counts.index
    for sub in subperiods.rows:
        is_last = sub is subperiods.rows[-1]
        month_mask = (last_days >= sub.start) & (
            (last_days <= sub.end) if is_last else (last_days < sub.end)
        )
        date_mask = (dates >= sub.start) & ((dates <= sub.end) if is_last else (dates < sub.end))
        row = row_for(sub.label, month_mask.to_numpy(), date_mask)
        if row is not None:
            rows.append(row)
    total = row_for(TOTAL_LABEL, np.ones(len(strat_m), dtype=bool), np.ones(len(dates), dtype=bool))
    rows.append(total)
    return rows


SUMMARY_CSV_HEADER = [
    "scenario", "subperiod", "mean_monthly", "annualized_sharpe",
    "excess_monthly", "n_trades", "n_months",
]


def write_summary_csv(rows: Sequence[PerformanceRow], dest: str | Path) -> None:
    with open(dest, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SUMMARY_CSV_HEADER)
        for row in rows:
            writer.writerow(
                [
                    row.scenario,
                    row.subperiod,
                    repr(row.mean_monthly),
                    repr(row.annualized_sharpe),
                    repr(row.excess_monthly),
                    row.n_trades,
                    row.n_months,
                ]
            )


def summary_text_table(rows: Sequence[PerformanceRow]) -> str:
    """Aligned console table: scenarios as rows, subperiods as column groups."""
    scenarios = list(dict.fromkeys(r.scenario for r in rows))
    subperiods = list(dict.fromkeys(r.subperiod for r in rows))
    by_key = {(r.scenario, r.subperiod): r for r in rows}

    def fmt_pct(x: float) -> str:
        if math.isinf(x):
            return "+inf" if x > 0 else "-inf"
        return f"{100.0 * x:.2f}%"

    def fmt_sharpe(x: float) -> str:
        if math.isinf(x):
            return "+inf*" if x > 0 else "-inf*"
        return f"{x:.2f}"

    header = ["scenario", "metric"] + subperiods
    lines = [header]
    for scenario in scenarios:
        for metric, getter in (
            ("monthly ret", lambda r: fmt_pct(r.mean_monthly)),
            ("sharpe (ann)", lambda r: fmt_sharpe(r.annualized_sharpe)),
            ("excess", lambda r: fmt_pct(r.excess_monthly)),
            ("trades", lambda r: str(r.n_trades)),
        ):
            cells = []
            for sub in subperiods:
                row = by_key.get((scenario, sub))
                cells.append(getter(row) if row is not None else "-")
            lines.append([scenario, metric] + cells)

    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    rendered = []
    for k, line in enumerate(lines):
        rendered.append("  ".join(cell.rjust(w) for cell, w in zip(line, widths)))
        if k == 0:
            rendered.append("  ".join("-" * w for w in widths))
    return "\n".join(rendered)

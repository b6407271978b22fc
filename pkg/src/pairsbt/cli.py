"""Command-line entry point.

Subcommands: synth, backtest, grid, adaptive, sensitivity, report.  Flag
values override config-file values, which override built-in defaults (the
default subperiod schedule is the six-row 1990-2020 table).  Exit codes:
0 success, 2 usage error or unknown command, 3 configuration error,
4 input-data error, 5 pipeline error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import pandas as pd

from . import plots
from .errors import ConfigError, DataError, PairsbtError
from .marketdata import (
    PricePanel,
    SubperiodTable,
    load_price_panel,
    write_price_panel,
)
from .metrics import (
    monthly_returns,
    performance_summary,
    summary_text_table,
    write_summary_csv,
)
from .output import (
    RunWriter,
    grid_manifest_records,
    write_blocks_csv,
    write_cycles_csv,
    write_grid_csv,
    write_monthly_csv,
    write_sensitivity_csv,
)
from .pairselect import write_pairs_csv
from .sweep import (
    BASELINE_PARAMS,
    ParamGrid,
    StrategyParams,
    adaptive_backtest,
    best_and_averaged,
    run_backtest,
    run_grid,
    sensitivity_table,
)
from .synthgen import SynthConfig, gen_universe, write_planted_manifest
from .tradesim import CostModel, read_returns_csv, write_ledgers_csv, write_returns_csv

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_DATA = 4
EXIT_PIPELINE = 5

EPILOG = """exit codes:
  0  success
  2  usage error / unknown command
  3  configuration error (bad flag, malformed config file)
  4  input data error (missing or malformed input file)
  5  pipeline error (e.g. range too short, empty universe)

config file: flat `key = value` lines using the long flag names without
the leading dashes (e.g. `method = coint`); `#` starts a comment.
precedence: command line > config file > built-in defaults.
"""

METHOD_ALIASES = {"distance": "distance", "coint": "cointegration", "cointegration": "cointegration"}


def _parse_float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip() != "")
    except ValueError:
        raise ConfigError(f"bad numeric list {text!r}")


def _parse_int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip() != "")
    except ValueError:
        raise ConfigError(f"bad integer list {text!r}")


def read_config_file(path: str | Path) -> dict[str, str]:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    values: dict[str, str] = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected `key = value`, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config_defaults(args: argparse.Namespace, parser_defaults: dict) -> None:
    """Fill unset flags from the config file, then from built-in defaults."""
    config = read_config_file(args.config) if args.config else {}
    for key, default in parser_defaults.items():
        if getattr(args, key, None) is not None:
            continue
        if key in config:
            raw = config[key]
            caster = type(default) if default is not None else str
            try:
                if isinstance(default, bool):
                    value = raw.lower() in ("1", "true", "yes", "on")
                else:
                    value = caster(raw)
            except ValueError:
                raise ConfigError(f"config key {key}: bad value {raw!r}")
            setattr(args, key, value)
        else:
            setattr(args, key, default)


# Built-in defaults, applied last (flags and config file parse as None first).
COMMON_DEFAULTS = {
    "benchmark_ticker": "",
    "method": "distance",
    "pairs": 20,
    "threshold": 2.0,
    "multiplier": 1.0,
    "confidence": 0.05,
    "lag": 1,
    "cost_bps": -1.0,  # -1 means "use the subperiod schedule"
    "short_fee": -1.0,
    "subperiods": "",
    "out": "out",
    "jobs": 1,
    "seed": 0,
    "rank_by": "return",
    "capital_basis": "committed",
    "start": "",
    "end": "",
    "no_reentry": False,
    "exhaustive_coint": False,
    "grid_pairs": "5,10,20,40",
    "grid_thresholds": "0.5,1,1.5,2,2.5,3",
    "grid_multipliers": "0.16,0.5,1,1.5",
    "grid_confidences": "0.01,0.05,0.1",
    "cost_levels": "0,10,20,30,40",
    "lags": "0,1",
    "retune_years": 2,
    "returns": "",
    "label": "strategy",
    "show_config": False,
    "data": "",
}

SYNTH_DEFAULTS = {
    "stocks": 20,
    "pairs": 3,  # planted pairs, not nominated pairs
    "days": 750,
    "seed": 0,
    "planted_beta": 1.0,
    "theta": 0.3,
    "sigma": 0.01,
    "walk_sigma": 0.02,
    "start_date": "2010-01-04",
    "benchmark_ticker": "",
}


def _defaults_for(command: str) -> dict:
    return SYNTH_DEFAULTS if command == "synth" else COMMON_DEFAULTS


def _add_common_flags(sub: argparse.ArgumentParser, *, data_required: bool = True) -> None:
    sub.add_argument("--data", required=data_required, help="input panel CSV (date,ticker,close,volume)")
    sub.add_argument("--benchmark-ticker", dest="benchmark_ticker",
                     help="reserved ticker carrying the market benchmark series")
    sub.add_argument("--method", choices=sorted(METHOD_ALIASES), help="pair formation method")
    sub.add_argument("--pairs", type=int, help="number of nominated pairs")
    sub.add_argument("--threshold", type=float, help="trading trigger in formation std units")
    sub.add_argument("--multiplier", type=float, help="period length multiplier")
    sub.add_argument("--confidence", type=float, help="cointegration confidence level")
    sub.add_argument("--lag", type=int, help="execution lag in trading days")
    sub.add_argument("--cost-bps", dest="cost_bps", type=float,
                     help="flat one-way cost override in bps (default: subperiod schedule)")
    sub.add_argument("--short-fee", dest="short_fee", type=float,
                     help="flat annual short-borrow fee override (e.g. 0.006)")
    sub.add_argument("--subperiods", help="subperiod table CSV (default: built-in 1990-2020 table)")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--jobs", type=int, help="parallel grid evaluation workers")
    sub.add_argument("--seed", type=int, help="top-level random seed (recorded in the manifest)")
    sub.add_argument("--rank-by", dest="rank_by", choices=["return", "sharpe"],
                     help="grid ranking criterion")
    sub.add_argument("--capital-basis", dest="capital_basis", choices=["committed", "employed"],
                     help="return denominator convention")
    sub.add_argument("--start", help="range start date (default: first panel date)")
    sub.add_argument("--end", help="range end date (default: last panel date)")
    sub.add_argument("--no-reentry", dest="no_reentry", action="store_const", const=True,
                     help="disallow re-opening a pair after convergence within a window")
    sub.add_argument("--exhaustive-coint", dest="exhaustive_coint", action="store_const", const=True,
                     help="test every candidate pair instead of stopping at --pairs passes")


def _add_grid_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--grid-pairs", dest="grid_pairs", help="comma list of pair counts")
    sub.add_argument("--grid-thresholds", dest="grid_thresholds", help="comma list of thresholds")
    sub.add_argument("--grid-multipliers", dest="grid_multipliers", help="comma list of multipliers")
    sub.add_argument("--grid-confidences", dest="grid_confidences", help="comma list of confidences")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pairsbt",
        description="Deterministic pairs-trading backtests: distance and cointegration "
        "pair formation, thresholded spread trading with costs, parameter sweeps.",
        epilog=EPILOG,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--config", help="flat key=value config file")
    commands = parser.add_subparsers(dest="command", required=True)

    synth = commands.add_parser("synth", help="generate a seeded synthetic universe CSV")
    synth.add_argument("--stocks", type=int, help="number of stocks")
    synth.add_argument("--pairs", type=int, help="number of planted cointegrated pairs")
    synth.add_argument("--days", type=int, help="number of trading days")
    synth.add_argument("--seed", type=int, help="generator seed")
    synth.add_argument("--out", required=True, help="output CSV path")
    synth.add_argument("--planted-beta", dest="planted_beta", type=float, help="planted hedge ratio")
    synth.add_argument("--theta", type=float, help="spread mean-reversion speed per day")
    synth.add_argument("--sigma", type=float, help="spread innovation volatility per day")
    synth.add_argument("--walk-sigma", dest="walk_sigma", type=float, help="random-walk volatility")
    synth.add_argument("--start-date", dest="start_date", help="first calendar date")
    synth.add_argument("--benchmark-ticker", dest="benchmark_ticker",
                       help="also emit a benchmark series under this ticker")

    backtest = commands.add_parser("backtest", help="run one parameterized backtest")
    _add_common_flags(backtest)

    grid = commands.add_parser("grid", help="grid-search strategy parameters")
    _add_common_flags(grid)
    _add_grid_flags(grid)

    adaptive = commands.add_parser("adaptive", help="walk-forward backtest, re-tuned every 2 years")
    _add_common_flags(adaptive)
    _add_grid_flags(adaptive)
    adaptive.add_argument("--retune-years", dest="retune_years", type=int,
                          help="length of each adaptation block in years")

    sensitivity = commands.add_parser(
        "sensitivity", help="averaged optimal parameters across lag x cost levels"
    )
    _add_common_flags(sensitivity)
    _add_grid_flags(sensitivity)
    sensitivity.add_argument("--cost-levels", dest="cost_levels",
                             help="comma list of flat one-way cost levels in bps")
    sensitivity.add_argument("--lags", help="comma list of execution lags")

    report = commands.add_parser("report", help="summarize a daily return series")
    _add_common_flags(report, data_required=False)
    report.add_argument("--returns", help="daily returns CSV (date,return)")
    report.add_argument("--label", help="scenario label for the summary")
    report.add_argument("--show-config", dest="show_config", action="store_const", const=True,
                        help="print the effective subperiod/cost configuration and exit")
    return parser


# --- shared helpers ---------------------------------------------------------


def _resolve_range(args, panel: PricePanel) -> tuple[pd.Timestamp, pd.Timestamp]:
    start = pd.Timestamp(args.start) if args.start else panel.dates[0]
    end = pd.Timestamp(args.end) if args.end else panel.dates[-1]
    if start > end:
        raise ConfigError(f"--start {start.date()} is after --end {end.date()}")
    return start, end


def _resolve_subperiods(args, start: pd.Timestamp, end: pd.Timestamp) -> SubperiodTable:
    """The requested table, or a single-row fallback when it cannot cover the range."""
    table = SubperiodTable.from_csv(args.subperiods) if args.subperiods else SubperiodTable.default()
    if table.covers(start) and table.covers(end):
        return table
    bps = args.cost_bps if args.cost_bps >= 0 else 30.0
    fee = args.short_fee if args.short_fee >= 0 else 0.006
    print(
        f"note: subperiod table does not cover {start.date()}..{end.date()}; "
        f"using a single-period fallback at {bps:g} bps",
        file=sys.stderr,
    )
    return SubperiodTable.single(start, end + pd.Timedelta(days=1), bps, fee)


def _resolve_costs(args, table: SubperiodTable) -> CostModel:
    flat_bps = args.cost_bps if args.cost_bps >= 0 else None
    flat_fee = args.short_fee if args.short_fee >= 0 else None
    if flat_bps is not None:
        return CostModel(flat_oneway_bps=flat_bps, flat_short_fee=flat_fee)
    return CostModel(flat_oneway_bps=None, flat_short_fee=flat_fee, subperiods=table)


def _strategy_params(args) -> StrategyParams:
    return StrategyParams(
        n_pairs=args.pairs,
        threshold=args.threshold,
        length_multiplier=args.multiplier,
        confidence=args.confidence,
        lag=args.lag,
        allow_reentry=not args.no_reentry,
    )


def _param_grid(args) -> ParamGrid:
    return ParamGrid(
        n_pairs_choices=tuple(int(x) for x in _parse_float_list(args.grid_pairs)),
        threshold_choices=_parse_float_list(args.grid_thresholds),
        multiplier_choices=_parse_float_list(args.grid_multipliers),
        confidence_choices=_parse_float_list(args.grid_confidences),
    )


def _benchmark_returns(panel: PricePanel, ticker: str) -> pd.Series | None:
    if not ticker or ticker not in panel.closes.columns:
        return None
    closes = panel.closes[ticker].dropna()
    return closes.pct_change().iloc[1:]


def _config_dict(args) -> dict:
    skip = {"command", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _emit_summary(
    writer: RunWriter,
    args,
    returns: pd.Series,
    benchmark: pd.Series | None,
    label: str,
    subperiods: SubperiodTable,
    trade_open_counts=None,
) -> None:
    """Shared report path: summary CSV + monthly CSV + figures + console table."""
    monthly = monthly_returns(returns)
    write_monthly_csv(monthly, writer.path("monthly_returns.csv"))
    writer.register("monthly_returns.csv")

    if benchmark is None:
        bench = pd.Series(0.0, index=returns.index)
        bench_note = " (benchmark: none supplied, excess vs zero)"
    else:
        bench, bench_note = benchmark, ""
    rows = performance_summary(returns, bench, label, subperiods, trade_open_counts)
    write_summary_csv(rows, writer.path("summary.csv"))
    writer.register("summary.csv")

    plots.save_figure(
        plots.cumulative_return_figure(returns, benchmark, title=f"{label}: cumulative return"),
        writer.path("equity_curve.png"),
    )
    writer.register("equity_curve.png")
    plots.save_figure(
        plots.monthly_return_figure(monthly, title=f"{label}: monthly returns"),
        writer.path("monthly_returns.png"),
    )
    writer.register("monthly_returns.png")

    print(f"scenario summary{bench_note} [capital basis: {args.capital_basis}]")
    print(summary_text_table(rows))


# --- commands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = SynthConfig(
        n_stocks=args.stocks,
        n_planted_pairs=args.pairs,
        days=args.days,
        hedge_ratios=args.planted_beta,
        ou_theta=args.theta,
        ou_sigma=args.sigma,
        walk_sigma=args.walk_sigma,
        seed=args.seed,
        start_date=args.start_date,
        benchmark_ticker=args.benchmark_ticker or None,
    )
    result = gen_universe(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_price_panel(result.panel, out)
    manifest = out.with_name(out.stem + "_pairs.csv")
    write_planted_manifest(result.planted, manifest)
    print(
        f"wrote {result.panel.n_tickers} tickers x {result.panel.n_dates} days to {out} "
        f"({len(result.planted)} planted pairs -> {manifest})"
    )
    return EXIT_OK


def cmd_backtest(args) -> int:
    panel = load_price_panel(args.data)
    start, end = _resolve_range(args, panel)
    subperiods = _resolve_subperiods(args, start, end)
    costs = _resolve_costs(args, subperiods)
    params = _strategy_params(args)
    writer = RunWriter(args.out, "backtest", _config_dict(args))

    result = run_backtest(
        panel, METHOD_ALIASES[args.method], params, costs, start, end,
        benchmark_ticker=args.benchmark_ticker or None,
        capital_basis=args.capital_basis,
        keep_ledgers=True,
        exhaustive=args.exhaustive_coint,
    )
    write_returns_csv(result.returns, writer.path("daily_returns.csv"))
    writer.register("daily_returns.csv")
    write_ledgers_csv(result.ledgers, writer.path("trades.csv"))
    writer.register("trades.csv")
    write_cycles_csv(result.cycles, writer.path("cycles.csv"))
    writer.register("cycles.csv")
    pairs_rows = [pair for _, pair in result.selected]
    cycle_ids = [i for i, _ in result.selected]
    write_pairs_csv(pairs_rows, writer.path("pairs.csv"), cycles=cycle_ids)
    writer.register("pairs.csv")

    benchmark = _benchmark_returns(panel, args.benchmark_ticker)
    _emit_summary(writer, args, result.returns, benchmark, "backtest", subperiods,
                  result.trade_open_counts)
    writer.add_record({"n_trades": result.n_trades, "n_cycles": len(result.cycles)})
    writer.finish()
    return EXIT_OK


def cmd_grid(args) -> int:
    panel = load_price_panel(args.data)
    start, end = _resolve_range(args, panel)
    subperiods = _resolve_subperiods(args, start, end)
    costs = _resolve_costs(args, subperiods)
    grid = _param_grid(args)
    writer = RunWriter(args.out, "grid", _config_dict(args))

    run = run_grid(
        panel, METHOD_ALIASES[args.method], grid, costs, start, end,
        lag=args.lag, rank_by=args.rank_by, jobs=args.jobs,
        benchmark_ticker=args.benchmark_ticker or None,
        capital_basis=args.capital_basis,
        allow_reentry=not args.no_reentry,
    )
    write_grid_csv(run, writer.path("grid_results.csv"))
    writer.register("grid_results.csv")
    for record in grid_manifest_records(run):
        writer.add_record(record)

    if run.results:
        best, averaged = best_and_averaged(run.results, k=min(3, len(run.results)),
                                           rank_by=args.rank_by)
        snapped = averaged.snapped(grid)
        with open(writer.path("optimal_params.csv"), "w", encoding="utf-8", newline="\n") as handle:
            handle.write("kind,n_pairs,threshold,multiplier,confidence\n")
            bp = best.params
            handle.write(f"best,{bp.n_pairs},{bp.threshold!r},{bp.length_multiplier!r},{bp.confidence!r}\n")
            handle.write(f"top3_mean,{averaged.n_pairs!r},{averaged.threshold!r},"
                         f"{averaged.multiplier!r},{averaged.confidence!r}\n")
            handle.write(f"top3_snapped,{snapped.n_pairs},{snapped.threshold!r},"
                         f"{snapped.length_multiplier!r},{snapped.confidence!r}\n")
        writer.register("optimal_params.csv")
        print(f"grid: {len(run.results)} points ok, {len(run.failures)} failed; "
              f"best mean monthly {best.mean_monthly_return:.4%} at "
              f"pairs={bp.n_pairs} threshold={bp.threshold:g} multiplier={bp.length_multiplier:g} "
              f"confidence={bp.confidence:g}")
    else:
        print(f"grid: no successful points ({len(run.failures)} failures)")
    writer.finish()
    return EXIT_OK


def cmd_adaptive(args) -> int:
    panel = load_price_panel(args.data)
    start, end = _resolve_range(args, panel)
    subperiods = _resolve_subperiods(args, start, end)
    costs = _resolve_costs(args, subperiods)
    grid = _param_grid(args)
    writer = RunWriter(args.out, "adaptive", _config_dict(args))

    result = adaptive_backtest(
        panel, METHOD_ALIASES[args.method], grid, costs, start, end,
        lag=args.lag, retune_years=args.retune_years,
        baseline=BASELINE_PARAMS, rank_by=args.rank_by, jobs=args.jobs,
        benchmark_ticker=args.benchmark_ticker or None,
        capital_basis=args.capital_basis,
    )
    write_returns_csv(result.returns, writer.path("daily_returns.csv"))
    writer.register("daily_returns.csv")
    write_blocks_csv(result, writer.path("blocks.csv"))
    writer.register("blocks.csv")

    benchmark = _benchmark_returns(panel, args.benchmark_ticker)
    _emit_summary(writer, args, result.returns, benchmark, "adaptive", subperiods,
                  result.trade_open_counts)
    writer.add_record({"n_trades": result.n_trades, "n_blocks": len(result.blocks)})
    writer.finish()
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    panel = load_price_panel(args.data)
    start, end = _resolve_range(args, panel)
    subperiods = _resolve_subperiods(args, start, end)
    costs = _resolve_costs(args, subperiods)
    grid = _param_grid(args)
    writer = RunWriter(args.out, "sensitivity", _config_dict(args))

    result = sensitivity_table(
        panel, METHOD_ALIASES[args.method], grid,
        lags=_parse_int_list(args.lags),
        cost_levels_bps=_parse_float_list(args.cost_levels),
        start=start, end=end, subperiods=subperiods, base_costs=costs,
        rank_by=args.rank_by, jobs=args.jobs,
        benchmark_ticker=args.benchmark_ticker or None,
    )
    write_sensitivity_csv(result, writer.path("sensitivity.csv"))
    writer.register("sensitivity.csv")
    plots.save_figure(plots.sensitivity_figure(result, "threshold"),
                      writer.path("sensitivity_threshold.png"))
    writer.register("sensitivity_threshold.png")
    for cell in result.cells:
        writer.add_record(
            {
                "cell": {"lag": cell.lag, "cost_bps": cell.cost_bps},
                "skipped_subperiods": list(cell.skipped),
                "averaged": None if cell.averaged is None else vars(cell.averaged),
            }
        )
    writer.finish()
    print(f"sensitivity: {len(result.cells)} cells "
          f"({len(result.lags)} lags x {len(result.cost_levels)} cost levels)")
    return EXIT_OK


def cmd_report(args) -> int:
    if args.show_config:
        if args.subperiods:
            table = SubperiodTable.from_csv(args.subperiods)
        else:
            table = SubperiodTable.default()
        print("subperiod  start       end         oneway_bps  short_fee")
        for row in table.rows:
            print(
                f"{row.label:<9}  {row.start.strftime('%Y/%m/%d')}  "
                f"{row.end.strftime('%Y/%m/%d')}  {row.oneway_cost_bps:<10g}  "
                f"{row.short_fee_annual:g}"
            )
        return EXIT_OK
    if not args.returns:
        raise ConfigError("report needs --returns (or --show-config)")
    returns = read_returns_csv(args.returns)
    start, end = returns.index[0], returns.index[-1]
    subperiods = _resolve_subperiods(args, start, end)
    benchmark = None
    if args.data:
        panel = load_price_panel(args.data)
        benchmark = _benchmark_returns(panel, args.benchmark_ticker)
    writer = RunWriter(args.out, "report", _config_dict(args))
    _emit_summary(writer, args, returns, benchmark, args.label, subperiods)
    writer.finish()
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "backtest": cmd_backtest,
    "grid": cmd_grid,
    "adaptive": cmd_adaptive,
    "sensitivity": cmd_sensitivity,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config_defaults(args, _defaults_for(args.command))
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except PairsbtError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())

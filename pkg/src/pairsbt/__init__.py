"""Deterministic pairs-trading backtest engine.

Pipeline: load or synthesize a daily price panel, filter the universe per
formation window, rank pairs by normalized-log-price distance (optionally
refined by Engle-Granger cointegration), trade the spread with threshold
rules, execution lag and transaction/short costs, then aggregate monthly and
per-subperiod performance and sweep hyperparameters.
"""

from .errors import PairsbtError
from .marketdata import (
    NormalizedPanel,
    PeriodWindow,
    PricePanel,
    Subperiod,
    SubperiodTable,
    filter_universe,
    load_price_panel,
    normalize_log_prices,
    window_at,
    write_price_panel,
)
from .metrics import PerformanceRow, monthly_returns, performance_summary
from .pairselect import (
    PairCandidate,
    SelectionConfig,
    engle_granger,
    rank_pairs,
    select_pairs,
    ssd_score,
)
from .sweep import (
    AveragedParams,
    GridResult,
    ParamGrid,
    adaptive_backtest,
    best_and_averaged,
    run_backtest,
    run_grid,
    sensitivity_table,
)
from .synthgen import SynthConfig, gen_universe
from .tradesim import (
    CostModel,
    SpreadSeries,
    StrategyParams,
    TradeLedger,
    build_spread,
    portfolio_returns,
    simulate_pair,
    zscore,
)
from .unitroot import adf_test

__version__ = "0.1.0"

__all__ = [
    "PairsbtError",
    "PricePanel",
    "NormalizedPanel",
    "PeriodWindow",
    "Subperiod",
    "SubperiodTable",
    "load_price_panel",
    "write_price_panel",
    "filter_universe",
    "normalize_log_prices",
    "window_at",
    "PairCandidate",
    "SelectionConfig",
    "ssd_score",
    "rank_pairs",
    "engle_granger",
    "select_pairs",
    "adf_test",
    "StrategyParams",
    "CostModel",
    "SpreadSeries",
    "TradeLedger",
    "build_spread",
    "zscore",
    "simulate_pair",
    "portfolio_returns",
    "monthly_returns",
    "performance_summary",
    "PerformanceRow",
    "ParamGrid",
    "GridResult",
    "AveragedParams",
    "run_backtest",
    "run_grid",
    "best_and_averaged",
    "adaptive_backtest",
    "sensitivity_table",
    "SynthConfig",
    "gen_universe",
    "__version__",
]

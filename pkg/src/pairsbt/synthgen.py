"""Seeded synthetic price universes with planted cointegrated pairs.

Non-planted stocks are independent geometric random walks.  A planted pair
(X, Y) satisfies log Y_t = alpha + beta * log X_t + s_t with s a discrete
Ornstein-Uhlenbeck process s_{t+1} = (1 - theta) s_t + sigma * eps_t, so the
true spread mean-reverts with known strength.  Generation is fully
deterministic for a given seed: all randomness flows from one NumPy PCG64
generator seeded via SeedSequence, so fixtures reproduce across platforms.

Ticker S000, S001, ... ordering is the construction order: planted pairs
occupy the first 2 * n_planted_pairs slots (X then Y), and the designated
low-liquidity decile sits at the end of the roster, letting universe-filter
tests assert exact drop sets.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError
from .marketdata import PricePanel

LIQUID_VOLUME_MEAN = 1_000_000.0
ILLIQUID_VOLUME_MEAN = 500.0


@dataclass(frozen=True)
class SynthConfig:
    n_stocks: int = 20
    n_planted_pairs: int = 3
    days: int = 750
    hedge_ratios: Sequence[float] | float = 1.0
    ou_theta: float = 0.3
    ou_sigma: float = 0.01
    walk_sigma: float = 0.02
    seed: int = 0
    start_date: str = "2010-01-04"
    base_price: float = 100.0
    benchmark_ticker: str | None = None
    # Planted zero-volume days: ticker -> day offsets (for gap/halt tests).
    zero_volume_days: Mapping[str, Sequence[int]] = field(default_factory=dict)

    def __post_init__(self):
        if self.n_stocks < 2 or self.days < 2:
            raise ConfigError("need at least 2 stocks and 2 days")
        if 2 * self.n_planted_pairs > self.n_stocks:
            raise ConfigError("2 * n_planted_pairs must be <= n_stocks")
        if not (0.0 < self.ou_theta < 1.0):
            raise ConfigError("ou_theta must lie in (0, 1)")
        if self.ou_sigma <= 0 or self.walk_sigma <= 0:
            raise ConfigError("sigmas must be > 0")

    def hedge_ratio(self, pair_index: int) -> float:
        if isinstance(self.hedge_ratios, (int, float)):
            return float(self.hedge_ratios)
        return float(self.hedge_ratios[pair_index])


@dataclass(frozen=True)
class PlantedPair:
    leg_a: str  # the driving random walk X
    leg_b: str  # the cointegrated response Y
    beta: float
    alpha: float
    theta: float
    sigma: float


@dataclass(frozen=True)
class SynthResult:
    panel: PricePanel
    planted: tuple[PlantedPair, ...]
    low_liquidity: tuple[str, ...]


def _ticker(i: int, width: int) -> str:
    return f"S{i:0{width}d}"


def gen_universe(cfg: SynthConfig) -> SynthResult:
    """Generate one seeded universe plus the manifest of planted structure."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    width = max(3, len(str(cfg.n_stocks - 1)))
    n = cfg.n_stocks
    days = cfg.days
    dates = pd.bdate_range(cfg.start_date, periods=days)

    log_prices = np.empty((days, n))
    base = np.log(cfg.base_price)

    planted: list[PlantedPair] = []
    for k in range(cfg.n_planted_pairs):
        ix, iy = 2 * k, 2 * k + 1
        beta = cfg.hedge_ratio(k)
        steps = rng.normal(0.0, cfg.walk_sigma, size=days - 1)
        log_x = base + np.concatenate([[0.0], np.cumsum(steps)])
        eps = rng.normal(0.0, cfg.ou_sigma, size=days)
        s = np.empty(days)
        s[0] = 0.0
        for t in range(1, days):
            s[t] = (1.0 - cfg.ou_theta) * s[t - 1] + eps[t]
        alpha = base * (1.0 - beta)  # keeps Y near the base price at t=0
        log_y = alpha + beta * log_x + s
        log_prices[:, ix] = log_x
        log_prices[:, iy] = log_y
        planted.append(
            PlantedPair(
                leg_a=_ticker(ix, width),
                leg_b=_ticker(iy, width),
                beta=beta,
                alpha=alpha,
                theta=cfg.ou_theta,
                sigma=cfg.ou_sigma,
            )
        )

    for i in range(2 * cfg.n_planted_pairs, n):
        steps = rng.normal(0.0, cfg.walk_sigma, size=days - 1)
        log_prices[:, i] = base + np.concatenate([[0.0], np.cumsum(steps)])

    tickers = [_ticker(i, width) for i in range(n)]
    closes = pd.DataFrame(np.exp(log_prices), index=dates, columns=tickers)

    n_illiquid = n // 10
    low_liq = tuple(tickers[n - n_illiquid :]) if n_illiquid else ()
    means = np.full(n, LIQUID_VOLUME_MEAN)
    if n_illiquid:
        means[n - n_illiquid :] = ILLIQUID_VOLUME_MEAN
    volumes = np.rint(rng.uniform(0.5, 1.5, size=(days, n)) * means)
    volumes = np.maximum(volumes, 1.0)
    volume_df = pd.DataFrame(volumes, index=dates, columns=tickers)

    for ticker, offsets in cfg.zero_volume_days.items():
        if ticker not in volume_df.columns:
            raise ConfigError(f"zero_volume_days names unknown ticker {ticker!r}")
        for off in offsets:
            volume_df.iloc[int(off), volume_df.columns.get_loc(ticker)] = 0.0

    if cfg.benchmark_ticker:
        if cfg.benchmark_ticker in closes.columns:
            raise ConfigError(f"benchmark ticker {cfg.benchmark_ticker!r} collides")
        steps = rng.normal(0.0002, 0.01, size=days - 1)
        bench = np.exp(base + np.concatenate([[0.0], np.cumsum(steps)]))
        closes[cfg.benchmark_ticker] = bench
        volume_df[cfg.benchmark_ticker] = np.rint(
            rng.uniform(0.5, 1.5, size=days) * LIQUID_VOLUME_MEAN
        )
        closes = closes[sorted(closes.columns)]
        volume_df = volume_df[closes.columns]

    closes.index.name = "date"
    volume_df.index.name = "date"
    panel = PricePanel(closes=closes, volumes=volume_df)
    return SynthResult(panel=panel, planted=tuple(planted), low_liquidity=low_liq)


MANIFEST_HEADER = ["leg_a", "leg_b", "beta", "alpha", "theta", "sigma"]


def write_planted_manifest(planted: Sequence[PlantedPair], dest: str | Path) -> None:
    with open(dest, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for p in planted:
            writer.writerow(
                [p.leg_a, p.leg_b, repr(p.beta), repr(p.alpha), repr(p.theta), repr(p.sigma)]
            )

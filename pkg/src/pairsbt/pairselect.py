"""Pair formation: SSD distance ranking and SSD-prefiltered cointegration.

The distance metric is the sum of squared deviations between two normalized
log-price series over the formation window.  The cointegration path scans the
SSD-ordered candidate list, runs the two-step Engle-Granger test on each pair
(OLS of the lexicographically first leg on the second, then an ADF test on
the residuals) and keeps significant pairs until enough are found.

All operations are pure functions of immutable inputs and safe to run
concurrently; outputs are deterministic regardless of evaluation order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .errors import (
    ConfigError,
    DegenerateRegressor,
    LengthMismatch,
    NumericalSingularity,
    TooFewTickers,
    TooShort,
)
from .marketdata import NormalizedPanel, PeriodWindow
from .unitroot import AdfResult, adf_test

METHODS = ("distance", "cointegration")
# Sentinel for an exactly-zero residual spread (duplicated price series).
DEGENERATE_STAT = float("-inf")


@dataclass(frozen=True)
class PairCandidate:
    """An unordered stock pair, stored with leg_a < leg_b.

    Hedge fields are populated only on the cointegration path; `degenerate`
    flags identical price series whose spread never diverges.
    """

    leg_a: str
    leg_b: str
    ssd: float
    hedge_ratio: float | None = None
    intercept: float | None = None
    adf_stat: float | None = None
    p_value: float | None = None
    degenerate: bool = False

    def __post_init__(self):
        if self.leg_a >= self.leg_b:
            raise ConfigError(f"pair legs out of order: {self.leg_a!r} >= {self.leg_b!r}")
        if self.ssd < 0:
            raise ConfigError("ssd must be >= 0")

    @property
    def label(self) -> str:
        return f"{self.leg_a}/{self.leg_b}"


@dataclass(frozen=True)
class SelectionConfig:
    method: str = "distance"
    n_pairs: int = 20
    confidence: float = 0.05
    max_lag: int | None = None
    # Test every candidate instead of stopping once n_pairs have passed.
    exhaustive: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.n_pairs < 1:
            raise ConfigError("n_pairs must be >= 1")
        if not (0.0 < self.confidence <= 1.0):
            raise ConfigError("confidence must lie in (0, 1]")


class SelectionResult(NamedTuple):
    pairs: list[PairCandidate]
    exhausted: bool  # candidate list ran out before n_pairs were found
    n_tested: int


class CointResult(NamedTuple):
    hedge_ratio: float
    intercept: float
    residuals: np.ndarray
    adf_stat: float
    p_value: float


def ssd_score(a: Sequence[float], b: Sequence[float]) -> float:
    """Sum of squared deviations between two equal-length series."""
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"shapes {x.shape} vs {y.shape}")
    if len(x) < 2:
        raise TooShort("need at least 2 observations")
    d = x - y
    return float(d @ d)


def rank_pairs(panel: NormalizedPanel, window: PeriodWindow | None = None) -> list[PairCandidate]:
    """All N*(N-1)/2 pairs ascending by formation-window SSD.

    Ties are broken by (leg_a, leg_b) so the ordering is deterministic.
    """
    window = window or panel.window
    tickers = panel.tickers
    if len(tickers) < 2:
        raise TooFewTickers(f"need >= 2 tickers, got {len(tickers)}")
    values = panel.values.loc[window.formation_mask(panel.values.index)].to_numpy()
    if values.shape[0] < 2:
        raise TooShort("formation window shorter than 2 days")

    candidates = []
    for i in range(len(tickers)):
        for j in range(i + 1, len(tickers)):
            d = values[:, i] - values[:, j]
            candidates.append(PairCandidate(tickers[i], tickers[j], float(d @ d)))
    candidates.sort(key=lambda c: (c.ssd, c.leg_a, c.leg_b))
    return candidates


def engle_granger(
    a: Sequence[float], b: Sequence[float], max_lag: int | None = None
) -> CointResult:
    """Two-step Engle-Granger test: OLS of a on b, then ADF on the residuals.

    A perfectly collinear pair (zero residuals) cannot be fed to the ADF
    regression; it is reported with the -inf statistic sentinel and p = 0.
    """
    x = np.asarray(b, dtype=float)
    y = np.asarray(a, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"shapes {y.shape} vs {x.shape}")
    if len(x) < 30:
        raise TooShort("need at least 30 observations for a cointegration test")

    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise DegenerateRegressor("second leg has zero variance")
    hedge = float(xc @ (y - y.mean())) / sxx
    intercept = float(y.mean() - hedge * x.mean())
    residuals = y - intercept - hedge * x
    if not np.isfinite(residuals).all():
        raise NumericalSingularity("non-finite residuals")

    if np.ptp(residuals) == 0.0:
        return CointResult(hedge, intercept, residuals, DEGENERATE_STAT, 0.0)
    result: AdfResult = adf_test(residuals, max_lag=max_lag)
    return CointResult(hedge, intercept, residuals, result.statistic, result.p_value)


def _with_cointegration(
    pair: PairCandidate, formation, max_lag: int | None
) -> PairCandidate:
    res = engle_granger(formation[pair.leg_a], formation[pair.leg_b], max_lag=max_lag)
    return PairCandidate(
        leg_a=pair.leg_a,
        leg_b=pair.leg_b,
        ssd=pair.ssd,
        hedge_ratio=res.hedge_ratio,
        intercept=res.intercept,
        adf_stat=res.adf_stat,
        p_value=res.p_value,
        degenerate=res.adf_stat == DEGENERATE_STAT,
    )


def select_pairs(
    panel: NormalizedPanel, window: PeriodWindow | None = None, config: SelectionConfig = SelectionConfig()
) -> SelectionResult:
    """Pick tradable pairs for one formation window.

    Distance method: the first n_pairs of the SSD ranking.  Cointegration
    method: walk the SSD ranking, keep pairs whose Engle-Granger p-value is
    at or below the confidence level, and stop once n_pairs have passed (or
    the list is exhausted, reported via the result flag).  A ticker may
    appear in several selected pairs.
    """
    window = window or panel.window
    ranked = rank_pairs(panel, window)

    if config.method == "distance":
        picked = ranked[: config.n_pairs]
        return SelectionResult(picked, exhausted=len(picked) < config.n_pairs, n_tested=len(picked))

    formation = panel.values.loc[window.formation_mask(panel.values.index)]
    picked = []
    n_tested = 0
    for candidate in ranked:
        if not config.exhaustive and len(picked) >= config.n_pairs:
            break
        try:
            tested = _with_cointegration(candidate, formation, config.max_lag)
        except DegenerateRegressor:
            n_tested += 1
            continue
        n_tested += 1
        if len(picked) < config.n_pairs and tested.p_value <= config.confidence:
            picked.append(tested)
    return SelectionResult(picked, exhausted=len(picked) < config.n_pairs, n_tested=n_tested)


PAIR_CSV_HEADER = ["leg_a", "leg_b", "ssd", "hedge_ratio", "intercept", "adf_stat", "p_value"]


def write_pairs_csv(
    pairs: Sequence[PairCandidate],
    dest: str | Path,
    cycles: Sequence[int] | None = None,
) -> None:
    """Export selected pairs; `cycles` prepends a per-row cycle-id column."""
    with open(dest, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        lead = ["cycle"] if cycles is not None else []
        writer.writerow(lead + PAIR_CSV_HEADER)
        for i, p in enumerate(pairs):
            row = [cycles[i]] if cycles is not None else []
            writer.writerow(
                row
                + [
                    p.leg_a,
                    p.leg_b,
                    repr(p.ssd),
                    "" if p.hedge_ratio is None else repr(p.hedge_ratio),
                    "" if p.intercept is None else repr(p.intercept),
                    "" if p.adf_stat is None else repr(p.adf_stat),
                    "" if p.p_value is None else repr(p.p_value),
                ]
            )

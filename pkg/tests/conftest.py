from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from pairsbt.marketdata import PricePanel

FIXTURES = Path(__file__).parent / "fixtures"


def make_panel(closes: np.ndarray, tickers=None, start="2015-01-05", volumes=None) -> PricePanel:
    """Panel from a (days x tickers) close matrix on a business-day index."""
    closes = np.asarray(closes, dtype=float)
    days, n = closes.shape
    if tickers is None:
        tickers = [f"T{i:03d}" for i in range(n)]
    dates = pd.bdate_range(start, periods=days)
    close_df = pd.DataFrame(closes, index=dates, columns=tickers)
    if volumes is None:
        volumes = np.full_like(closes, 1000.0)
    volume_df = pd.DataFrame(np.asarray(volumes, dtype=float), index=dates, columns=tickers)
    close_df.index.name = "date"
    volume_df.index.name = "date"
    return PricePanel(closes=close_df, volumes=volume_df)


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES

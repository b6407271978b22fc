import math

import numpy as np
import pandas as pd
import pytest

from pairsbt.errors import (
    ConfigError,
    DuplicateObservation,
    EmptyUniverse,
    MalformedRow,
    MissingBasePrice,
    MissingFile,
    NonPositivePrice,
)
from pairsbt.marketdata import (
    PeriodWindow,
    SubperiodTable,
    filter_universe,
    load_price_panel,
    normalize_log_prices,
    window_at,
    write_price_panel,
)

from conftest import make_panel


class TestLoadPanel:
    def test_fixture_round_trip_values(self, fixtures_dir):
        panel = load_price_panel(fixtures_dir / "panel_small.csv")
        assert panel.n_dates == 5
        assert panel.n_tickers == 3
        assert panel.tickers == ["AAA", "BBB", "CCC"]
        # spot values bit-equal to the file
        assert panel.closes.loc["2020-01-02", "AAA"] == 100.5
        assert panel.closes.loc["2020-01-06", "CCC"] == 7.25
        assert panel.closes.loc["2020-01-08", "BBB"] == 21.0
        assert panel.volumes.loc["2020-01-07", "AAA"] == 1250

    def test_header_only_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("date,ticker,close,volume\n")
        panel = load_price_panel(path)
        assert panel.n_dates == 0
        assert panel.n_tickers == 0

    def test_duplicate_observation(self, tmp_path):
        path = tmp_path / "dup.csv"
        path.write_text(
            "date,ticker,close,volume\n"
            "2020-01-02,AAA,10.0,100\n"
            "2020-01-02,AAA,11.0,100\n"
        )
        with pytest.raises(DuplicateObservation):
            load_price_panel(path)

    def test_nonpositive_price(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("date,ticker,close,volume\n2020-01-02,AAA,0.0,100\n")
        with pytest.raises(NonPositivePrice):
            load_price_panel(path)

    def test_malformed_row_carries_line_number(self, tmp_path):
        path = tmp_path / "malformed.csv"
        path.write_text(
            "date,ticker,close,volume\n"
            "2020-01-02,AAA,10.0,100\n"
            "2020-01-03,AAA,not_a_price,100\n"
        )
        with pytest.raises(MalformedRow) as err:
            load_price_panel(path)
        assert err.value.line_number == 3

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFile):
            load_price_panel(tmp_path / "nope.csv")

    def test_crlf_accepted(self, tmp_path):
        path = tmp_path / "crlf.csv"
        path.write_bytes(b"date,ticker,close,volume\r\n2020-01-02,AAA,10.5,100\r\n")
        panel = load_price_panel(path)
        assert panel.closes.iloc[0, 0] == 10.5

    def test_write_then_load_bit_exact(self, tmp_path):
        rng = np.random.default_rng(7)
        closes = np.exp(rng.normal(4.0, 0.3, size=(30, 4)))
        volumes = rng.integers(1, 10_000, size=(30, 4)).astype(float)
        panel = make_panel(closes, volumes=volumes)
        dest = tmp_path / "roundtrip.csv"
        write_price_panel(panel, dest)
        again = load_price_panel(dest)
        assert again.closes.equals(panel.closes)
        assert again.volumes.equals(panel.volumes)
        # and a second write is byte-identical
        dest2 = tmp_path / "roundtrip2.csv"
        write_price_panel(again, dest2)
        assert dest.read_bytes() == dest2.read_bytes()

    def test_roundtrip_preserves_gaps(self, tmp_path):
        closes = np.full((6, 3), 50.0)
        closes[2, 1] = np.nan
        panel = make_panel(closes)
        volumes = panel.volumes.copy()
        volumes.iloc[2, 1] = np.nan
        panel = make_panel(closes, volumes=volumes.to_numpy())
        dest = tmp_path / "gaps.csv"
        write_price_panel(panel, dest)
        again = load_price_panel(dest)
        assert math.isnan(again.closes.iloc[2, 1])
        assert again.closes.drop(again.dates[2]).equals(panel.closes.drop(panel.dates[2]))


def _window(panel, start=0, formation=10, trading=5) -> PeriodWindow:
    return window_at(panel.dates, start, formation, trading)


class TestFilterUniverse:
    def test_bottom_decile_of_ten(self):
        closes = np.full((15, 10), 10.0)
        volumes = np.full((15, 10), 1000.0)
        volumes[:, 3] = 10.0  # clearly the least liquid
        panel = make_panel(closes, volumes=volumes)
        out = filter_universe(panel, _window(panel))
        assert out.n_tickers == 9
        assert "T003" not in out.tickers

    def test_gap_ticker_dropped_despite_liquidity(self):
        closes = np.full((15, 10), 10.0)
        volumes = np.full((15, 10), 1000.0)
        volumes[:, 0] = 1_000_000.0
        closes[4, 0] = np.nan  # missing formation day
        panel = make_panel(closes, volumes=volumes)
        out = filter_universe(panel, _window(panel))
        assert "T000" not in out.tickers

    def test_zero_volume_day_dropped(self):
        closes = np.full((15, 10), 10.0)
        volumes = np.full((15, 10), 1000.0)
        volumes[7, 2] = 0.0
        panel = make_panel(closes, volumes=volumes)
        out = filter_universe(panel, _window(panel))
        assert "T002" not in out.tickers

    def test_survivors_keep_all_window_dates(self):
        closes = np.full((20, 10), 10.0)
        panel = make_panel(closes)
        window = _window(panel, formation=10, trading=5)
        out = filter_universe(panel, window)
        assert len(out.dates) == 15
        assert out.dates[0] == window.formation_start
        assert out.dates[-1] == window.trading_end

    def test_brute_force_decile_oracle(self):
        # 100 tickers with randomized liquidity and a few planted gaps.
        rng = np.random.default_rng(11)
        days, n = 25, 100
        closes = np.exp(rng.normal(3, 0.5, size=(days, n)))
        volumes = rng.integers(100, 1_000_000, size=(days, n)).astype(float)
        gap_cols = [5, 40, 77]
        for c in gap_cols:
            volumes[rng.integers(0, 15), c] = 0.0
        panel = make_panel(closes, volumes=volumes)
        window = _window(panel, formation=15, trading=5)

        # oracle: explicit python recomputation of the decile cut
        tickers = panel.tickers
        fdates = [
            d for d in panel.dates
            if window.formation_start <= d <= window.formation_end
        ]
        liquidity = {}
        for ticker in tickers:
            total = 0.0
            for d in fdates:
                c = panel.closes.loc[d, ticker]
                v = panel.volumes.loc[d, ticker]
                if not (math.isnan(c) or math.isnan(v)):
                    total += c * v
            liquidity[ticker] = total
        ranked = sorted(tickers, key=lambda t: (liquidity[t], t))
        expected_drops = set(ranked[: n // 10])
        for c in gap_cols:
            expected_drops.add(tickers[c])
        expected_survivors = [t for t in tickers if t not in expected_drops]

        out = filter_universe(panel, window)
        assert out.tickers == expected_survivors

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        closes = np.exp(rng.normal(3, 0.5, size=(20, 30)))
        volumes = rng.integers(100, 10_000, size=(20, 30)).astype(float)
        panel = make_panel(closes, volumes=volumes)
        window = _window(panel, formation=12, trading=6)
        once = filter_universe(panel, window)
        twice = filter_universe(once, window)
        assert twice.tickers == once.tickers
        assert twice.closes.equals(once.closes)

    def test_positive_volume_on_every_formation_day(self):
        rng = np.random.default_rng(5)
        closes = np.exp(rng.normal(3, 0.5, size=(20, 40)))
        volumes = rng.integers(0, 5_000, size=(20, 40)).astype(float)
        panel = make_panel(closes, volumes=volumes)
        window = _window(panel, formation=12, trading=6)
        out = filter_universe(panel, window)
        formation = out.volumes.loc[window.formation_mask(out.dates)]
        assert (formation > 0).all().all()

    def test_empty_universe(self):
        closes = np.full((15, 2), 10.0)
        volumes = np.zeros((15, 2))
        panel = make_panel(closes, volumes=volumes)
        with pytest.raises(EmptyUniverse):
            filter_universe(panel, _window(panel))

    def test_window_outside_panel(self):
        panel = make_panel(np.full((10, 3), 5.0))
        window = window_at(pd.bdate_range("2015-01-05", periods=40), 0, 20, 10)
        with pytest.raises(ConfigError):
            filter_universe(panel, window)


class TestNormalize:
    def test_constant_price_all_zero(self):
        panel = make_panel(np.full((15, 3), 100.0))
        normalized = normalize_log_prices(panel, _window(panel))
        assert np.allclose(normalized.values.to_numpy(), 0.0)

    def test_two_day_arithmetic(self):
        closes = np.array([[100.0, 50.0], [110.0, 50.0], [121.0, 55.0]])
        panel = make_panel(closes)
        window = window_at(panel.dates, 0, 2, 1)
        normalized = normalize_log_prices(panel, window)
        v = normalized.values.to_numpy()
        assert v[0, 0] == 0.0
        assert abs(v[1, 0] - math.log(1.1)) < 1e-15
        assert abs(v[2, 0] - math.log(1.21)) < 1e-15
        assert abs(v[2, 1] - math.log(1.1)) < 1e-15

    def test_scalar_oracle_50_days(self):
        rng = np.random.default_rng(9)
        closes = np.exp(rng.normal(4, 0.2, size=(50, 4)))
        panel = make_panel(closes)
        window = window_at(panel.dates, 0, 30, 20)
        normalized = normalize_log_prices(panel, window)
        for j, ticker in enumerate(panel.tickers):
            base = math.log(closes[0, j])
            for i in range(50):
                expected = math.log(closes[i, j]) - base
                assert abs(normalized.values.iloc[i, j] - expected) < 1e-14

    def test_uniform_scaling_invariance(self):
        rng = np.random.default_rng(13)
        closes = np.exp(rng.normal(4, 0.2, size=(30, 3)))
        panel = make_panel(closes)
        window = window_at(panel.dates, 0, 20, 10)
        base_values = normalize_log_prices(panel, window).values

        scaled = closes.copy()
        scaled[:, 1] *= 7.5
        panel2 = make_panel(scaled)
        scaled_values = normalize_log_prices(panel2, window).values
        assert np.allclose(base_values.to_numpy(), scaled_values.to_numpy(), atol=1e-12)

    def test_trading_gap_carried_forward_and_flagged(self):
        closes = np.full((15, 2), 10.0)
        closes[12, 0] = np.nan
        closes[13, 0] = np.nan
        closes[12:, 1] = 20.0
        panel = make_panel(closes)
        window = _window(panel)
        normalized = normalize_log_prices(panel, window)
        assert normalized.stale_from["T000"] == panel.dates[12]
        # carried value equals the last observed one
        assert normalized.values.iloc[12, 0] == normalized.values.iloc[11, 0]
        assert normalized.values.iloc[13, 0] == normalized.values.iloc[11, 0]

    def test_formation_gap_rejected(self):
        closes = np.full((15, 2), 10.0)
        closes[3, 0] = np.nan
        panel = make_panel(closes)
        with pytest.raises(MissingBasePrice):
            normalize_log_prices(panel, _window(panel))


class TestWindows:
    def test_window_at_bounds(self):
        dates = pd.bdate_range("2020-01-01", periods=40)
        window = window_at(dates, 0, 30, 10)
        assert window.formation_start == dates[0]
        assert window.formation_end == dates[29]
        assert window.trading_end == dates[39]
        with pytest.raises(ConfigError):
            window_at(dates, 0, 35, 10)

    def test_window_ordering_enforced(self):
        dates = pd.bdate_range("2020-01-01", periods=10)
        with pytest.raises(ConfigError):
            PeriodWindow(dates[5], dates[2], dates[8], 3, 3)


class TestSubperiods:
    def test_default_table_matches_published_schedule(self):
        table = SubperiodTable.default()
        starts = [r.start.strftime("%Y/%m/%d") for r in table.rows]
        assert starts == [
            "1990/01/01", "2000/03/01", "2002/10/01",
            "2007/08/01", "2009/06/01", "2020/02/20",
        ]
        assert [r.oneway_cost_bps for r in table.rows] == [35, 30, 30, 30, 26, 26]
        assert all(r.short_fee_annual == 0.006 for r in table.rows)
        assert table.end == pd.Timestamp("2020-06-01")

    def test_contiguity_enforced(self):
        from pairsbt.marketdata import Subperiod

        rows = (
            Subperiod("a", pd.Timestamp("2000-01-01"), pd.Timestamp("2001-01-01"), 30, 0.006),
            Subperiod("b", pd.Timestamp("2001-06-01"), pd.Timestamp("2002-01-01"), 30, 0.006),
        )
        with pytest.raises(ConfigError):
            SubperiodTable(rows=rows)

    def test_locate(self):
        table = SubperiodTable.default()
        assert table.locate(pd.Timestamp("1995-05-05")).label == "1990-00"
        assert table.locate(pd.Timestamp("2000-03-01")).label == "2000-02"
        assert table.locate(pd.Timestamp("2020-06-01")).label == "Covid"
        with pytest.raises(ConfigError):
            table.locate(pd.Timestamp("1980-01-01"))

    def test_csv_round_trip(self, tmp_path):
        table = SubperiodTable.default()
        dest = tmp_path / "subs.csv"
        table.to_csv(dest)
        again = SubperiodTable.from_csv(dest)
        assert again == table

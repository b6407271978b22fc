"""Independent oracles used to cross-check the library implementations.

Everything here is deliberately written as plain day-by-day / pair-by-pair
Python with no shared code paths into the package: brute force over clarity,
so a disagreement always indicts the implementation (or this file), never a
common helper.
"""

import math


def brute_force_ssd_ranking(values_by_ticker: dict[str, list[float]]) -> list[tuple]:
    """All pairs as (ssd, leg_a, leg_b), ascending by (ssd, leg_a, leg_b)."""
    tickers = sorted(values_by_ticker)
    out = []
    for i in range(len(tickers)):
        for j in range(i + 1, len(tickers)):
            a, b = values_by_ticker[tickers[i]], values_by_ticker[tickers[j]]
            ssd = 0.0
            for t in range(len(a)):
                d = a[t] - b[t]
                ssd += d * d
            out.append((ssd, tickers[i], tickers[j]))
    out.sort()
    return out


def two_pass_ols_slope(y: list[float], x: list[float]) -> tuple[float, float]:
    """Closed-form OLS slope/intercept of y on x via explicit loops."""
    n = len(x)
    mx = sum(x) / n
    my = sum(y) / n
    sxy = 0.0
    sxx = 0.0
    for t in range(n):
        sxy += (x[t] - mx) * (y[t] - my)
        sxx += (x[t] - mx) * (x[t] - mx)
    slope = sxy / sxx
    return slope, my - slope * mx


def monthly_compound(dates, daily: list[float]) -> dict[tuple[int, int], float]:
    """Per (year, month) compounded return via an explicit product loop."""
    out: dict[tuple[int, int], float] = {}
    for date, r in zip(dates, daily):
        key = (date.year, date.month)
        out[key] = out.get(key, 1.0) * (1.0 + r)
    return {k: v - 1.0 for k, v in out.items()}


def replay_pair_simulation(
    z: list[float],
    prices_a: list[float],
    prices_b: list[float],
    threshold: float,
    lag: int,
    hedge_ratio: float,
    oneway_bps: list[float],
    short_fee_annual: float,
    allow_reentry: bool = True,
    last_live_day: int | None = None,
) -> list[float]:
    """Day-by-day mark-to-market replay of the threshold trading rules.

    Maintains explicit position state per day instead of per-trade segments:
    quantities are set at entry execution, P&L accrues from daily price
    moves, each transacted leg pays its one-way cost, the short side accrues
    the borrow fee per held day (charged at exit).  Returns the daily P&L on
    one unit of committed capital.
    """
    n = len(z)
    end = n - 1 if last_live_day is None else last_live_day
    scale = 2.0 / (1.0 + abs(hedge_ratio))

    # signal scan -> list of (entry_exec, exit_exec, side)
    plans = []
    state = 0
    open_day = -1
    for i in range(end + 1):
        if state == 0:
            if z[i] > threshold:
                state, open_day = 1, i
            elif z[i] < -threshold:
                state, open_day = -1, i
        else:
            crossed = z[i] == 0.0 or (z[i] > 0) != (state > 0)
            if crossed:
                plans.append((open_day, i, state))
                state = 0
                if not allow_reentry:
                    break
    if state != 0:
        plans.append((open_day, None, state))

    pnl = [0.0] * n
    q_a = q_b = 0.0
    entry_day = -1
    short_entry_notional = 0.0
    schedule = []
    for open_day, close_day, side in plans:
        entry = open_day + lag
        if entry >= end:
            continue
        exit_ = end if close_day is None else min(close_day + lag, end)
        schedule.append((entry, exit_, side))

    k = 0
    holding = False
    for day in range(n):
        if holding:
            pnl[day] += q_a * (prices_a[day] - prices_a[day - 1])
            pnl[day] += q_b * (prices_b[day] - prices_b[day - 1])
        if k < len(schedule):
            entry, exit_, side = schedule[k]
            if day == entry:
                direction = -side
                n_a = direction * scale
                n_b = -direction * scale * hedge_ratio
                q_a = n_a / prices_a[day]
                q_b = n_b / prices_b[day]
                pnl[day] -= oneway_bps[day] / 1e4 * (abs(n_a) + abs(n_b))
                entry_day = day
                short_entry_notional = max(0.0, -n_a) + max(0.0, -n_b)
                holding = True
            if day == exit_ and holding:
                v_a = q_a * prices_a[day]
                v_b = q_b * prices_b[day]
                pnl[day] -= oneway_bps[day] / 1e4 * (abs(v_a) + abs(v_b))
                pnl[day] -= short_fee_annual / 252.0 * (day - entry_day) * short_entry_notional
                holding = False
                q_a = q_b = 0.0
                k += 1
    return pnl


def per_subperiod_stats(months: list[tuple], spans: list[tuple]) -> dict[str, tuple]:
    """(mean, sharpe-ready std, count) per subperiod from (last_day, ret) rows.

    `spans` holds (label, start, end, inclusive_end); a month belongs to the
    span containing its final trading day.
    """
    out = {}
    for label, start, end, inclusive in spans:
        values = [
            r
            for last_day, r in months
            if last_day >= start and (last_day <= end if inclusive else last_day < end)
        ]
        if not values:
            continue
        mean = sum(values) / len(values)
        if len(values) > 1:
            var = sum((v - mean) ** 2 for v in values) / (len(values) - 1)
            std = math.sqrt(var)
        else:
            std = 0.0
        out[label] = (mean, std, len(values))
    return out

"""Figure rendering for the report path (written to files, never shown).

Uses the Agg backend and pinned savefig metadata so a fixed input produces
byte-identical PNGs run after run.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .sweep import SensitivityResult

FIG_DPI = 120
# Strip the Software tag so the bytes do not depend on the mpl patch level.
PNG_METADATA = {"Software": None}


def save_figure(fig, dest: str | Path) -> None:
    fig.savefig(dest, dpi=FIG_DPI, metadata=PNG_METADATA)
    plt.close(fig)


def cumulative_return_figure(
    returns: pd.Series, benchmark: pd.Series | None = None, title: str = "Cumulative return"
):
    fig, ax = plt.subplots(figsize=(9, 4.5))
    curve = (1.0 + returns).cumprod()
    ax.plot(curve.index, curve.to_numpy(), label="strategy", lw=1.2)
    if benchmark is not None:
        bench = benchmark.reindex(returns.index).fillna(0.0)
        bcurve = (1.0 + bench).cumprod()
        ax.plot(bcurve.index, bcurve.to_numpy(), label="benchmark", lw=1.0, alpha=0.8)
    ax.set_ylabel("growth of 1 unit committed capital")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.autofmt_xdate()
    fig.tight_layout()
    return fig


def monthly_return_figure(monthly: pd.DataFrame, title: str = "Monthly returns"):
    fig, ax = plt.subplots(figsize=(9, 3.5))
    values = monthly["ret"].to_numpy() * 100.0
    positions = np.arange(len(values))
    colors = np.where(values >= 0, "#2166ac", "#b2182b")
    ax.bar(positions, values, color=colors)
    step = max(1, len(values) // 12)
    ax.set_xticks(positions[::step])
    ax.set_xticklabels([str(m) for m in monthly.index[::step]], rotation=45, ha="right")
    ax.set_ylabel("monthly return [%]")
    ax.set_title(title)
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    return fig


def sensitivity_figure(result: SensitivityResult, field: str = "threshold"):
    """Heatmap of one averaged-parameter field over the lag x cost matrix."""
    rows = len(result.cost_levels)
    cols = len(result.lags)
    mat = np.full((rows, cols), np.nan)
    for i, cost in enumerate(result.cost_levels):
        for j, lag in enumerate(result.lags):
            cell = result.cell(lag, cost)
            if cell.averaged is not None:
                mat[i, j] = getattr(cell.averaged, field)
    fig, ax = plt.subplots(figsize=(1.8 + 1.4 * cols, 1.2 + 0.7 * rows))
    im = ax.imshow(mat, aspect="auto", cmap="viridis")
    ax.set_xticks(range(cols))
    ax.set_xticklabels([f"lag {lag}" for lag in result.lags])
    ax.set_yticks(range(rows))
    ax.set_yticklabels([f"{c:g} bps" for c in result.cost_levels])
    for i in range(rows):
        for j in range(cols):
            if not np.isnan(mat[i, j]):
                ax.text(j, i, f"{mat[i, j]:.2f}", ha="center", va="center", color="white")
    ax.set_title(f"averaged optimal {field}")
    fig.colorbar(im, ax=ax, shrink=0.85)
    fig.tight_layout()
    return fig

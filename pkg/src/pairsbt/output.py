"""Run-directory writing: CSV layouts, JSON-lines manifest with checksums.

Every emitted file is registered in `run_manifest.jsonl` with its SHA-256, so
re-runs can be compared byte-for-byte.  Nothing here writes wall-clock
timestamps; identical inputs must produce identical bytes.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Sequence

from .sweep import (
    AdaptiveResult,
    GridRun,
    SensitivityResult,
)

GRID_CSV_HEADER = [
    "n_pairs", "threshold", "multiplier", "confidence", "lag",
    "mean_monthly", "sharpe", "n_trades",
]


class RunWriter:
    """Collects emitted files for one command run and writes the manifest."""

    def __init__(self, out_dir: str | Path, command: str, config: dict):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config = config
        self.records: list[dict] = []

    def path(self, name: str) -> Path:
        return self.out_dir / name

    def register(self, name: str) -> Path:
        """Checksum a file already written under the run directory."""
        path = self.path(name)
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        self.records.append({"file": name, "sha256": digest, "bytes": path.stat().st_size})
        return path

    def add_record(self, record: dict) -> None:
        self.records.append(record)

    def finish(self) -> Path:
        manifest = self.path("run_manifest.jsonl")
        with open(manifest, "w", encoding="utf-8", newline="\n") as handle:
            header = {"command": self.command, "config": self.config}
            handle.write(json.dumps(header, sort_keys=True, default=str) + "\n")
            for record in self.records:
                handle.write(json.dumps(record, sort_keys=True, default=str) + "\n")
        return manifest


def write_grid_csv(run: GridRun, dest: str | Path) -> None:
    with open(dest, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(GRID_CSV_HEADER)
        for r in run.results:
            p = r.params
            writer.writerow(
                [
                    p.n_pairs, repr(p.threshold), repr(p.length_multiplier),
                    repr(p.confidence), p.lag,
                    repr(r.mean_monthly_return), repr(r.annualized_sharpe), r.n_trades,
                ]
            )


def grid_manifest_records(run: GridRun) -> list[dict]:
    """One status line per grid point, successes then recorded failures."""
    records = []
    for r in run.results:
        p = r.params
        records.append(
            {
                "grid_point": {
                    "n_pairs": p.n_pairs, "threshold": p.threshold,
                    "multiplier": p.length_multiplier, "confidence": p.confidence,
                    "lag": p.lag,
                },
                "status": "ok",
                "mean_monthly": r.mean_monthly_return,
                "sharpe": r.annualized_sharpe,
                "n_trades": r.n_trades,
            }
        )
    for f in run.failures:
        p = f.params
        records.append(
            {
                "grid_point": {
                    "n_pairs": p.n_pairs, "threshold": p.threshold,
                    "multiplier": p.length_multiplier, "confidence": p.confidence,
                    "lag": p.lag,
                },
                "status": "failed",
                "error": f.error,
            }
        )
    return records


def write_blocks_csv(result: AdaptiveResult, dest: str | Path) -> None:
    with open(dest, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            ["block_start", "block_end", "source", "traded",
             "n_pairs", "threshold", "multiplier", "confidence", "lag", "note"]
        )
        for b in result.blocks:
            p = b.params
            writer.writerow(
                [
                    b.start.strftime("%Y-%m-%d"), b.end.strftime("%Y-%m-%d"),
                    b.source, int(b.traded),
                    p.n_pairs, repr(p.threshold), repr(p.length_multiplier),
                    repr(p.confidence), p.lag, b.note,
                ]
            )


def write_sensitivity_csv(result: SensitivityResult, dest: str | Path) -> None:
    """Matrix layout: one row per cost level, one column group per lag."""
    fields = ("n_pairs", "threshold", "multiplier", "confidence")
    header = ["cost_bps"]
    for lag in result.lags:
        header.extend(f"lag{lag}_{f}" for f in fields)
    with open(dest, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for cost in result.cost_levels:
            row: list = [repr(cost)]
            for lag in result.lags:
                cell = result.cell(lag, cost)
                if cell.averaged is None:
                    row.extend([""] * len(fields))
                else:
                    a = cell.averaged
                    row.extend(
                        [repr(a.n_pairs), repr(a.threshold), repr(a.multiplier), repr(a.confidence)]
                    )
            writer.writerow(row)


def write_monthly_csv(monthly, dest: str | Path) -> None:
    """Monthly table: `month,return,n_days,partial`."""
    with open(dest, "w", encoding="utf-8", newline="\n") as handle:
        handle.write("month,return,n_days,partial\n")
        for month, row in monthly.iterrows():
            handle.write(
                f"{month},{float(row['ret'])!r},{int(row['n_days'])},{int(row['partial'])}\n"
            )


def write_cycles_csv(cycles: Sequence, dest: str | Path) -> None:
    with open(dest, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["cycle", "formation_start", "formation_end", "trading_end",
                         "n_selected", "exhausted"])
        for i, c in enumerate(cycles):
            writer.writerow(
                [
                    i,
                    c.formation_start.strftime("%Y-%m-%d"),
                    c.formation_end.strftime("%Y-%m-%d"),
                    c.trading_end.strftime("%Y-%m-%d"),
                    c.n_selected,
                    int(c.exhausted),
                ]
            )

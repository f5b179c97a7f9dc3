"""Readers for simulation run directories.

A run directory is what `tdsim run` leaves behind: config.yaml plus
summary.csv / per_tick.csv / per_episode.csv. This package touches only the
CSVs and treats their headers as the contract; anything missing is reported
by column and file name rather than guessed at.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

SUMMARY_COLUMNS = (
    "policy",
    "num_vehicles",
    "tx_power_dbm",
    "state_config",
    "profile",
    "master_seed",
    "mean_reward",
    "mean_qos",
    "mean_qoe",
    "p50_delay_s",
    "p95_delay_s",
    "p50_prp",
    "share_R",
    "share_SC",
    "share_SA",
)
TICK_COLUMNS = ("delay_mean_s", "prp")

METRIC_COLUMNS = SUMMARY_COLUMNS[6:]


@dataclass(frozen=True)
class RunData:
    """One run directory reduced to what the figures need."""

    path: str
    policy: str
    num_vehicles: int
    tx_power_dbm: float
    state_config: str
    metrics: dict[str, float]
    tick_delay_s: np.ndarray
    tick_prp: np.ndarray


def read_columns(path: str, required: tuple[str, ...]) -> dict[str, list[str]]:
    if not os.path.isfile(path):
        raise FileNotFoundError(f"missing input file {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"empty CSV: {path}")
        for col in required:
            if col not in header:
                raise ValueError(f"missing column '{col}' in {path}")
        columns: dict[str, list[str]] = {col: [] for col in header}
        for record in reader:
            for col, value in zip(header, record):
                columns[col].append(value)
    return columns


def is_run_dir(path: str) -> bool:
    return all(
        os.path.isfile(os.path.join(path, name)) for name in ("summary.csv", "per_tick.csv")
    )


def load_run(path: str) -> RunData:
    summary = read_columns(os.path.join(path, "summary.csv"), SUMMARY_COLUMNS)
    rows = len(summary["policy"])
    if rows != 1:
        raise ValueError(f"expected one summary row in {path}, found {rows}")
    ticks = read_columns(os.path.join(path, "per_tick.csv"), TICK_COLUMNS)
    return RunData(
        path=path,
        policy=summary["policy"][0],
        num_vehicles=int(summary["num_vehicles"][0]),
        tx_power_dbm=float(summary["tx_power_dbm"][0]),
        state_config=summary["state_config"][0],
        metrics={name: float(summary[name][0]) for name in METRIC_COLUMNS},
        tick_delay_s=np.asarray(ticks["delay_mean_s"], dtype=float),
        tick_prp=np.asarray(ticks["prp"], dtype=float),
    )


def discover_runs(in_dir: str) -> list[RunData]:
    """Load in_dir if it is itself a run directory, else its run subdirectories."""
    if not os.path.isdir(in_dir):
        raise FileNotFoundError(f"missing input directory {in_dir}")
    if is_run_dir(in_dir):
        return [load_run(in_dir)]
    run_dirs = sorted(
        entry.path for entry in os.scandir(in_dir) if entry.is_dir() and is_run_dir(entry.path)
    )
    if not run_dirs:
        raise ValueError(f"no run directories found under {in_dir}")
    return [load_run(d) for d in run_dirs]

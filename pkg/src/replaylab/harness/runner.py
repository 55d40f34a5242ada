"""Seeded multi-run execution with append-only CSV logging, exact
re-aggregation, trailing smoothing, and wall-clock reporting.

Raw files are one CSV per seed, flushed at checkpoint boundaries; a run is
considered complete (and is skipped on re-run) when its final row carries
the expected last step.  Aggregates hold the per-checkpoint mean and
standard error across seeds.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np


def fmt(value) -> str:
    """Lossless text form: 17 significant digits for floats."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


class CheckpointWriter:
    """Append-only CSV writer flushed after every row."""

    def __init__(self, path: str | Path, columns: list[str]):
        self.path = Path(path)
        self.columns = columns
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._fh.write(",".join(columns) + "\n")
        self._fh.flush()

    def write_row(self, values: dict) -> None:
        self._fh.write(",".join(fmt(values[c]) for c in self.columns) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    """CSV -> column arrays (float64)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    data = np.array(rows, dtype=np.float64) if rows else np.empty((0, len(header)))
    return {name: data[:, i] for i, name in enumerate(header)}


def raw_path(out_dir: str | Path, seed: int) -> Path:
    return Path(out_dir) / f"raw_seed{seed}.csv"


def run_complete(path: Path, final_step: int) -> bool:
    """True when the file exists and its last row reaches final_step."""
    if not path.exists():
        return False
    try:
        last = None
        with open(path) as fh:
            next(fh)  # header
            for line in fh:
                if line.strip():
                    last = line
        if last is None:
            return False
        return int(float(last.split(",", 1)[0])) == final_step
    except (ValueError, StopIteration):
        return False


def run_seeds(worker, config, out_dir: str | Path, final_step: int,
              workers: int = 0) -> list[Path]:
    """Execute worker(config, seed, raw_csv_path) for every incomplete seed,
    in parallel processes, then write the aggregate."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    pending = [s for s in config.seeds
               if not run_complete(raw_path(out_dir, s), final_step)]
    n_workers = workers or config.workers or os.cpu_count() or 1
    if pending:
        if n_workers > 1 and len(pending) > 1:
            with ProcessPoolExecutor(max_workers=n_workers) as pool:
                futures = [pool.submit(worker, config, seed,
                                       raw_path(out_dir, seed))
                           for seed in pending]
                for fut in futures:
                    fut.result()
        else:
            for seed in pending:
                worker(config, seed, raw_path(out_dir, seed))
    paths = [raw_path(out_dir, s) for s in config.seeds]
    aggregate(out_dir, config.seeds)
    return paths


def aggregate(out_dir: str | Path, seeds) -> Path:
    """Per-step mean and standard error across the seeds' raw files.

    Deterministic given the raw files (seeds processed in sorted order), so
    re-aggregation reproduces the aggregate bit-identically.
    """
    out_dir = Path(out_dir)
    tables = []
    for seed in sorted(seeds):
        path = raw_path(out_dir, seed)
        if path.exists():
            tables.append(read_csv(path))
    if not tables:
        raise FileNotFoundError(f"no raw CSVs under {out_dir}")
    columns = list(tables[0].keys())
    step_col = columns[0]
    steps = tables[0][step_col]
    out_path = out_dir / "aggregate.csv"
    header = [step_col, "n_seeds"]
    for col in columns[1:]:
        header += [f"{col}_mean", f"{col}_stderr"]
    with open(out_path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i, step in enumerate(steps):
            row = [fmt(step)]
            values_by_col = {}
            for col in columns[1:]:
                vals = np.array([t[col][i] for t in tables if i < len(t[col])])
                values_by_col[col] = vals
            n = min(len(v) for v in values_by_col.values()) if values_by_col else 0
            row.append(str(len(tables)))
            for col in columns[1:]:
                vals = values_by_col[col]
                finite = vals[np.isfinite(vals)]
                if len(finite) == 0:
                    mean, stderr = float("nan"), float("nan")
                else:
                    mean = float(finite.mean())
                    stderr = (float(finite.std(ddof=1) / math.sqrt(len(finite)))
                              if len(finite) > 1 else 0.0)
                row += [fmt(mean), fmt(stderr)]
            fh.write(",".join(row) + "\n")
    return out_path


def smooth(series, window: int):
    """Trailing moving average with truncated head windows."""
    if window < 1:
        raise ValueError("window must be >= 1")
    series = np.asarray(series, dtype=np.float64)
    out = np.empty_like(series)
    csum = np.cumsum(series)
    for i in range(len(series)):
        lo = max(0, i - window + 1)
        total = csum[i] - (csum[lo - 1] if lo > 0 else 0.0)
        out[i] = total / (i - lo + 1)
    return out


def wall_clock_report(out_dir: str | Path, output: str | Path | None = None) -> Path:
    """Per-checkpoint mean cumulative seconds vs mean evaluation return."""
    out_dir = Path(out_dir)
    paths = sorted(out_dir.glob("raw_seed*.csv"))
    if not paths:
        raise FileNotFoundError(f"no raw CSVs under {out_dir}")
    tables = [read_csv(p) for p in paths]
    n_rows = min(len(t["wall_clock_seconds"]) for t in tables)
    output = Path(output) if output else out_dir / "wall_clock.csv"
    with open(output, "w", newline="") as fh:
        fh.write("seconds,eval_return\n")
        for i in range(n_rows):
            secs = np.mean([t["wall_clock_seconds"][i] for t in tables])
            rets = np.mean([t["eval_return"][i] for t in tables])
            fh.write(f"{fmt(secs)},{fmt(rets)}\n")
    return output

"""Paper-style figures from harness CSVs.

Curves come from aggregate CSVs (step + <metric>_mean/_stderr columns) and
are drawn as a line per series with a shaded standard-error band; heatmaps
come from resolution^2-row grid CSVs (ix, iy, prob) with the origin at the
bottom-left.  PNG output is deterministic: identical inputs give identical
bytes (no embedded timestamps or version strings).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

# the paper's color scheme for figure comparability
VARIANT_COLORS = {
    "dyna_td": "black",
    "dyna_value": "blue",
    "prioritized_er": "forestgreen",
    "er": "magenta",
    "dyna_td_long": "orange",
}

_SAVE_KW = dict(dpi=150, metadata={"Software": None})


@dataclass
class Series:
    csv: str
    label: str
    color: str | None = None


@dataclass
class FigureSpec:
    series: list[Series]
    metric: str
    out: str
    x_label: str = "step"
    y_label: str = ""
    smooth_window: int = 1
    title: str = ""

    @classmethod
    def from_file(cls, path: str | Path) -> "FigureSpec":
        raw = json.loads(Path(path).read_text())
        series = [Series(**s) for s in raw.pop("series")]
        return cls(series=series, **raw)


def read_columns(path: str | Path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [r for r in reader if r]
    data = np.asarray(rows, dtype=np.float64)
    return {name: data[:, i] for i, name in enumerate(header)}


def smooth(series: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average with truncated head windows."""
    if window < 1:
        raise ValueError("window must be >= 1")
    out = np.empty_like(series)
    csum = np.cumsum(series)
    for i in range(len(series)):
        lo = max(0, i - window + 1)
        out[i] = (csum[i] - (csum[lo - 1] if lo else 0.0)) / (i - lo + 1)
    return out


def plot_curves(spec: FigureSpec):
    """Render the spec; returns (figure, output path)."""
    if not spec.series:
        raise ValueError("figure spec has no series")
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    x_col = None
    for entry in spec.series:
        data = read_columns(entry.csv)
        columns = list(data.keys())
        if x_col is None:
            x_col = columns[0]
        elif columns[0] != x_col:
            raise ValueError(
                f"{entry.csv}: x-axis column {columns[0]!r} does not match "
                f"{x_col!r}")
        mean_col = f"{spec.metric}_mean"
        err_col = f"{spec.metric}_stderr"
        for needed in (mean_col, err_col):
            if needed not in data:
                raise ValueError(f"{entry.csv}: missing column {needed!r}")
        x = data[x_col]
        mean = smooth(data[mean_col], spec.smooth_window)
        err = smooth(data[err_col], spec.smooth_window)
        color = entry.color or VARIANT_COLORS.get(entry.label)
        line, = ax.plot(x, mean, label=entry.label, color=color, linewidth=1.4)
        ax.fill_between(x, mean - err, mean + err, alpha=0.25,
                        color=line.get_color(), linewidth=0)
    ax.set_xlabel(spec.x_label or x_col)
    ax.set_ylabel(spec.y_label or spec.metric)
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, **_SAVE_KW)
    return fig, out


def plot_heatmap(grid_csv: str | Path, resolution: int, output: str | Path,
                 title: str = ""):
    """State-density heatmap; heavy color marks high density, origin at the
    bottom-left to match the environments' coordinates."""
    data = read_columns(grid_csv)
    if len(data["prob"]) != resolution ** 2:
        raise ValueError(
            f"{grid_csv}: expected {resolution ** 2} rows, "
            f"got {len(data['prob'])}")
    grid = np.zeros((resolution, resolution))
    grid[data["ix"].astype(int), data["iy"].astype(int)] = data["prob"]
    fig, ax = plt.subplots(figsize=(4.0, 3.6))
    im = ax.imshow(grid.T, origin="lower", cmap="Blues",
                   extent=(0, 1, 0, 1), aspect="equal")
    fig.colorbar(im, ax=ax, shrink=0.85)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output, **_SAVE_KW)
    return fig, output

"""Dataset ingestion: CSV loading, chronological splits, supervised windows,
the few-shot subset rule, and line-chart rasterization of input windows.

Charts are binary images drawn by direct pixel stamping (no plotting
dependency) so that rendering is a bit-reproducible pure function.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NumericError


@dataclass
class RawSeries:
    """A multivariate series: N timestamps, N x D values, D variable names."""

    timestamps: list[str]
    values: np.ndarray
    variable_names: list[str]

    def __post_init__(self):
        if len(self.timestamps) != self.values.shape[0]:
            raise DataError("timestamp count does not match value rows")
        if self.values.ndim != 2 or self.values.shape[1] != len(self.variable_names):
            raise DataError("value matrix must be N x D with D variable names")


@dataclass
class DatasetSplit:
    """Chronological train/val/test ranges plus train-only z-score statistics."""

    train: tuple[int, int]
    val: tuple[int, int]
    test: tuple[int, int]
    mean: np.ndarray
    std: np.ndarray

    def range_for(self, part: str) -> tuple[int, int]:
        try:
            return {"train": self.train, "val": self.val, "test": self.test}[part]
        except KeyError:
            raise DataError(f"unknown split part {part!r}") from None


def load_csv(path) -> RawSeries:
    """Read an ETT-style CSV: header row, first column "date", numeric rest."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataError(f"{path}: need a date column plus at least one variable")
        names = [h.strip() for h in header[1:]]
        timestamps: list[str] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
            timestamps.append(row[0].strip())
            parsed = []
            for col, cell in enumerate(row[1:], start=2):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric cell at row {lineno}, column {col}: {cell!r}") from None
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: no data rows")
    return RawSeries(timestamps, np.asarray(rows, dtype=np.float64), names)


def chronological_split(series: RawSeries, train_ratio: float = 0.7,
                        val_ratio: float = 0.1) -> DatasetSplit:
    """Split by time order and compute per-variable stats on the train range."""
    n = series.values.shape[0]
    n_train = int(n * train_ratio)
    n_val = int(n * val_ratio)
    if n_train < 2 or n - n_train - n_val < 1:
        raise DataError(f"series of length {n} too short for ratios "
                        f"({train_ratio}, {val_ratio})")
    split = DatasetSplit(
        train=(0, n_train),
        val=(n_train, n_train + n_val),
        test=(n_train + n_val, n),
        mean=np.zeros(series.values.shape[1]),
        std=np.ones(series.values.shape[1]),
    )
    return _with_train_stats(split, series)


def _with_train_stats(split: DatasetSplit, series: RawSeries) -> DatasetSplit:
    lo, hi = split.train
    chunk = series.values[lo:hi]
    mean = chunk.mean(axis=0)
    std = chunk.std(axis=0)
    flat = np.flatnonzero(std <= 0)
    if flat.size:
        names = [series.variable_names[i] for i in flat]
        raise DataError(f"constant variable(s) in the train range: {names}")
    split.mean, split.std = mean, std
    return split


def few_shot_subset(train_range: tuple[int, int], fraction: float) -> tuple[int, int]:
    """First floor(fraction * N_train) steps of the training range."""
    if not 0.0 < fraction <= 1.0:
        raise DataError(f"few-shot fraction must lie in (0, 1], got {fraction}")
    lo, hi = train_range
    keep = int(np.floor(fraction * (hi - lo)))
    return (lo, lo + keep)


def apply_few_shot(split: DatasetSplit, series: RawSeries, fraction: float) -> DatasetSplit:
    """Shrink the train range to its few-shot prefix and recompute stats."""
    shrunk = DatasetSplit(
        train=few_shot_subset(split.train, fraction),
        val=split.val,
        test=split.test,
        mean=split.mean,
        std=split.std,
    )
    if shrunk.train[1] - shrunk.train[0] < 2:
        raise DataError("few-shot prefix too short to compute statistics")
    return _with_train_stats(shrunk, series)


@dataclass
class WindowSample:
    """One supervised example: standardized input window, target horizon,
    rasterized chart, and optionally attached texts."""

    x_enc: np.ndarray          # (L, D) standardized
    target: np.ndarray         # (H, D) standardized
    chart: np.ndarray          # (H_img, W_img) binary {0,1}
    start_index: int           # offset within its split range
    abs_start: int             # absolute row index in the source series
    texts: list = field(default_factory=list)


def window_count(n_split: int, lookback: int, horizon: int, stride: int) -> int:
    if n_split < lookback + horizon:
        return 0
    return (n_split - lookback - horizon) // stride + 1


def make_windows(series: RawSeries, split: DatasetSplit, part: str, lookback: int,
                 horizon: int, stride: int = 1, chart_height: int = 64,
                 patch_count: int = 1) -> list[WindowSample]:
    """Slide a (lookback, horizon) window over one split range.

    Inputs and targets are z-scored with train statistics; each window also
    carries its rendered chart.
    """
    if stride < 1:
        raise DataError("stride must be >= 1")
    lo, hi = split.range_for(part)
    n_split = hi - lo
    count = window_count(n_split, lookback, horizon, stride)
    if count == 0:
        raise DataError(f"{part} range of length {n_split} shorter than "
                        f"lookback + horizon = {lookback + horizon}")
    z = (series.values - split.mean) / split.std
    samples = []
    for w in range(count):
        off = w * stride
        x_enc = z[lo + off: lo + off + lookback]
        target = z[lo + off + lookback: lo + off + lookback + horizon]
        chart = render_chart(x_enc, chart_height, patch_count)
        samples.append(WindowSample(x_enc, target, chart, off, lo + off))
    return samples


def render_chart(x_enc: np.ndarray, height: int, patch_count: int) -> np.ndarray:
    """Rasterize a window as overlaid polylines on a binary canvas.

    The canvas is height x (patch_count * height) so each of the patch_count
    vertical bands is square. Values are min-max scaled over the whole window
    (shared scale across variables); each column gets exactly one stamped
    pixel per variable.
    """
    x = np.asarray(x_enc, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise NumericError("render_chart: window contains non-finite values")
    if patch_count < 1:
        raise DataError("patch_count must be >= 1")
    if x.ndim == 1:
        x = x[:, None]
    length, n_vars = x.shape
    width = patch_count * height
    lo, hi = x.min(), x.max()
    if hi > lo:
        scaled = (x - lo) / (hi - lo)
    else:
        scaled = np.full_like(x, 0.5)
    image = np.zeros((height, width), dtype=bool)
    # column c samples the polyline at time c * (L-1) / (W-1)
    t_grid = np.linspace(0.0, float(length - 1), width) if width > 1 else np.zeros(1)
    base = np.arange(length, dtype=np.float64)
    cols = np.arange(width)
    for v in range(n_vars):
        vals = np.interp(t_grid, base, scaled[:, v]) if length > 1 else np.full(width, scaled[0, v])
        rows = np.rint((1.0 - vals) * (height - 1)).astype(int)
        image[rows, cols] = True
    return image


def write_windows_manifest(samples: dict[str, list[WindowSample]], path) -> None:
    """Reproducibility audit: one row (start_index, split) per window."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["start_index", "split"])
        for part in ("train", "val", "test"):
            for sample in samples.get(part, []):
                writer.writerow([sample.start_index, part])


def synthetic_sine_trend(n_steps: int = 2000, n_vars: int = 2, seed: int = 0,
                         noise_std: float = 0.0) -> RawSeries:
    """Two-variable sine + linear-trend benchmark series with hourly stamps."""
    rng = np.random.default_rng(seed)
    t = np.arange(n_steps, dtype=np.float64)
    periods = [24.0, 32.0, 48.0, 16.0]
    phases = [0.0, 0.7, 1.9, 2.6]
    slopes = [8e-4, -5e-4, 3e-4, -2e-4]
    cols = []
    for v in range(n_vars):
        wave = np.sin(2 * np.pi * (t / periods[v % 4] + phases[v % 4]))
        cols.append(wave + slopes[v % 4] * t)
    values = np.stack(cols, axis=1)
    if noise_std > 0:
        values = values + rng.normal(0.0, noise_std, size=values.shape)
    start = np.datetime64("2020-01-01T00:00")
    stamps = [str(start + np.timedelta64(i, "h")) for i in range(n_steps)]
    return RawSeries(stamps, values, [f"var{v}" for v in range(n_vars)])

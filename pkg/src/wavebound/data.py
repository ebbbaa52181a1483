"""Series generation, CSV ingestion, splitting, windowing, and batching.

A series is a (T, K) float64 matrix: T time steps, K features.  A window
pairs L past rows with the M rows that follow immediately; stride is 1, so
a segment of length T' yields T' - L - M + 1 windows.  Splits are
chronological, applied to the raw series before windowing, so windows never
cross a split boundary.  Standardization statistics come from the train
segment alone and are shared by the validation and test segments.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .rng import Rng


@dataclass
class SeriesDataset:
    """Immutable multivariate series plus the statistics used to scale it.

    mean/std record the affine map already applied to `values`
    (raw = values * std + mean); they stay at 0/1 until a split attaches
    train-segment statistics.
    """

    values: np.ndarray
    feature_names: list[str]
    mean: np.ndarray = field(default=None)  # type: ignore[assignment]
    std: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] < 1:
            raise DataError(f"series must be (T, K) with T >= 1, got shape {self.values.shape}")
        if len(self.feature_names) != self.values.shape[1]:
            raise DataError(
                f"{len(self.feature_names)} feature names for {self.values.shape[1]} columns"
            )
        k = self.values.shape[1]
        if self.mean is None:
            self.mean = np.zeros(k)
        if self.std is None:
            self.std = np.ones(k)
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.std = np.asarray(self.std, dtype=np.float64)
        if self.mean.shape != (k,) or self.std.shape != (k,):
            raise DataError("mean/std must be per-feature vectors")
        if not (self.std > 0).all():
            raise DataError("std entries must be positive")
        self.values.setflags(write=False)

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def destandardize(self, values: np.ndarray) -> np.ndarray:
        """Map scaled values back to the raw scale of the source series."""
        return np.asarray(values) * self.std + self.mean


@dataclass
class WindowPair:
    """L past rows and the M rows that follow them, starting one step later.

    origin_index is the segment row index of the last past row, so
    past = segment[origin_index-L+1 : origin_index+1] and
    future = segment[origin_index+1 : origin_index+1+M].
    """

    past: np.ndarray
    future: np.ndarray
    origin_index: int

    def __post_init__(self):
        self.past = np.asarray(self.past, dtype=np.float64)
        self.future = np.asarray(self.future, dtype=np.float64)
        if self.past.ndim != 2 or self.future.ndim != 2:
            raise DataError("window slices must be 2-D")
        if self.past.shape[1] != self.future.shape[1]:
            raise DataError("past and future must share the feature axis")


@dataclass(frozen=True)
class SplitSpec:
    """Chronological train/validation/test ratios, e.g. (0.6, 0.2, 0.2)."""

    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2)

    def __post_init__(self):
        if len(self.ratios) != 3:
            raise ConfigError("need exactly three split ratios")
        if any(r <= 0 for r in self.ratios):
            raise ConfigError(f"split ratios must be positive, got {self.ratios}")
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ConfigError(f"split ratios must sum to 1, got {self.ratios}")

    @classmethod
    def parse(cls, text: str) -> "SplitSpec":
        """Parse colon-separated weights like "6:2:2" or "7:1:2"."""
        try:
            parts = [float(p) for p in text.split(":")]
        except ValueError:
            raise ConfigError(f"cannot parse split ratios {text!r}") from None
        if len(parts) != 3 or any(p <= 0 for p in parts):
            raise ConfigError(f"split ratios need three positive parts, got {text!r}")
        total = sum(parts)
        return cls((parts[0] / total, parts[1] / total, parts[2] / total))

    def boundaries(self, total: int) -> tuple[int, int]:
        """Row indices ending the train and validation segments."""
        a = round(total * self.ratios[0])
        b = round(total * (self.ratios[0] + self.ratios[1]))
        a = min(max(a, 1), total)
        b = min(max(b, a), total)
        return a, b


def synth_series(length: int, sigma: float, seed: int) -> SeriesDataset:
    """Two superposed sines (periods 32 and 48) plus N(0, sigma^2) noise.

    f(t) = 2*sin(2*pi*t/32) + sin(2*pi*t/48) + sigma*z_t for t = 0..length-1.
    The noiseless series is exactly periodic with period 96.
    """
    if length < 1:
        raise ConfigError("length must be >= 1")
    if sigma < 0:
        raise ConfigError("sigma must be >= 0")
    t = np.arange(length, dtype=np.float64)
    clean = 2.0 * np.sin(2.0 * np.pi * t / 32.0) + np.sin(2.0 * np.pi * t / 48.0)
    noise = sigma * Rng(seed).normal(size=length)
    return SeriesDataset((clean + noise)[:, None], ["signal"])


def load_csv(path) -> SeriesDataset:
    """Read a series CSV: header row, timestamp first column, numeric rest.

    The timestamp column is ignored for modeling.  Rows are kept in file
    order.  Ragged rows and unparseable numeric cells are hard errors.
    """
    rows = []
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty dataset") from None
        if len(header) < 2:
            raise DataError(f"{path}: need a timestamp column plus at least one feature")
        width = len(header)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise DataError(f"{path}: row {lineno}: expected {width} columns, got {len(row)}")
            parsed = []
            for col, cell in enumerate(row[1:], start=2):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise DataError(
                        f"{path}: row {lineno}, column {col}: cannot parse {cell!r} as a number"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: empty dataset")
    return SeriesDataset(np.asarray(rows, dtype=np.float64), header[1:])


def save_csv(dataset: SeriesDataset, path) -> None:
    """Write a dataset in the load_csv format, with row indices as timestamps."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["date"] + list(dataset.feature_names))
        for i, row in enumerate(dataset.values):
            writer.writerow([i] + [repr(float(v)) for v in row])


def select_feature(dataset: SeriesDataset, name: str | None = None) -> SeriesDataset:
    """Univariate view of one column; defaults to the last (target) column."""
    if name is None:
        col = dataset.n_features - 1
    else:
        if name not in dataset.feature_names:
            raise DataError(f"unknown feature {name!r}; available: {dataset.feature_names}")
        col = dataset.feature_names.index(name)
    return SeriesDataset(
        dataset.values[:, col : col + 1].copy(),
        [dataset.feature_names[col]],
        mean=dataset.mean[col : col + 1].copy(),
        std=dataset.std[col : col + 1].copy(),
    )


def split_and_standardize(
    dataset: SeriesDataset, spec: SplitSpec, standardize: bool = True
) -> tuple[SeriesDataset, SeriesDataset, SeriesDataset]:
    """Chronological split; z-score all segments with train-segment stats.

    A constant feature would give std 0; it is clamped to 1 with a warning
    so the standardized column is all zeros instead of NaN.
    """
    a, b = spec.boundaries(dataset.length)
    segments = (dataset.values[:a], dataset.values[a:b], dataset.values[b:])
    if min(s.shape[0] for s in segments) < 1:
        raise DataError(
            f"series of length {dataset.length} too short for split {spec.ratios}"
        )
    if not standardize:
        return tuple(SeriesDataset(s.copy(), list(dataset.feature_names)) for s in segments)
    train = segments[0]
    mean = train.mean(axis=0)
    std = train.std(axis=0)
    degenerate = std == 0
    if degenerate.any():
        names = [n for n, d in zip(dataset.feature_names, degenerate) if d]
        warnings.warn(f"constant feature(s) {names}: std clamped to 1", stacklevel=2)
        std = np.where(degenerate, 1.0, std)
    return tuple(
        SeriesDataset((s - mean) / std, list(dataset.feature_names), mean.copy(), std.copy())
        for s in segments
    )


def windowize(segment: SeriesDataset, input_len: int, output_len: int) -> list[WindowPair]:
    """All stride-1 windows of a segment: count = T' - L - M + 1."""
    if input_len < 1 or output_len < 1:
        raise ConfigError("window lengths must be >= 1")
    values = segment.values
    count = values.shape[0] - input_len - output_len + 1
    if count <= 0:
        warnings.warn(
            f"segment of length {values.shape[0]} shorter than "
            f"{input_len}+{output_len}; no windows",
            stacklevel=2,
        )
        return []
    out = []
    for origin in range(input_len - 1, input_len - 1 + count):
        out.append(
            WindowPair(
                past=values[origin - input_len + 1 : origin + 1],
                future=values[origin + 1 : origin + 1 + output_len],
                origin_index=origin,
            )
        )
    return out


def stack_windows(windows: list[WindowPair]) -> tuple[np.ndarray, np.ndarray]:
    """Stack a window list into (n, L, K) past and (n, M, K) future tensors."""
    if not windows:
        raise DataError("empty window set")
    past = np.stack([w.past for w in windows])
    future = np.stack([w.future for w in windows])
    return past, future


def batch_indices(
    count: int, batch_size: int, rng: Rng | None = None, shuffle: bool = False
) -> list[np.ndarray]:
    """Index arrays covering range(count); the final short batch is kept."""
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    if count < 1:
        raise DataError("cannot batch an empty window set")
    if shuffle:
        if rng is None:
            raise ConfigError("shuffling requires an rng")
        order = rng.permutation(count)
    else:
        order = np.arange(count)
    return [order[i : i + batch_size] for i in range(0, count, batch_size)]


def batches(
    windows: list[WindowPair], batch_size: int, rng: Rng | None = None, shuffle: bool = False
) -> list[list[WindowPair]]:
    """Window-list view of batch_indices, same order contract."""
    return [
        [windows[i] for i in idx]
        for idx in batch_indices(len(windows), batch_size, rng, shuffle)
    ]

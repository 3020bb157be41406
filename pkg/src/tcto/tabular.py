"""Dataset ingestion, stratified splitting, and per-column statistics."""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

CLASSIFICATION = "classification"
REGRESSION = "regression"
TASKS = (CLASSIFICATION, REGRESSION)

STAT_DIM = 7


class DataError(ValueError):
    """Input data violates the ingestion or splitting contract."""


@dataclass(frozen=True)
class StatEmbedding:
    """Seven descriptive statistics of one column, in source units."""

    mean: float
    std: float
    vmin: float
    vmax: float
    q1: float
    median: float
    q3: float

    def as_vector(self) -> np.ndarray:
        return np.array(
            [self.mean, self.std, self.vmin, self.vmax, self.q1, self.median, self.q3]
        )

    @classmethod
    def from_vector(cls, v) -> "StatEmbedding":
        v = [float(x) for x in v]
        if len(v) != STAT_DIM:
            raise DataError(f"stat vector must have {STAT_DIM} entries, got {len(v)}")
        return cls(*v)


def column_stats(v) -> StatEmbedding:
    """Mean, population std, min, max and linearly interpolated quartiles."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise DataError("cannot compute statistics of an empty column")
    if not np.all(np.isfinite(v)):
        raise DataError("column contains non-finite values")
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    return StatEmbedding(
        mean=float(v.mean()),
        std=float(v.std()),
        vmin=float(v.min()),
        vmax=float(v.max()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
    )


@dataclass(frozen=True)
class Dataset:
    """Immutable column-major feature matrix plus labels.

    Classification labels are contiguous integers starting at 0; regression
    labels are arbitrary finite reals.
    """

    column_names: tuple[str, ...]
    columns: tuple[np.ndarray, ...]
    labels: np.ndarray
    task: str
    dropped_rows: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise DataError(f"unknown task {self.task!r}")
        if len(self.column_names) != len(self.columns):
            raise DataError("column name/vector count mismatch")
        if not self.columns:
            raise DataError("dataset needs at least one feature column")
        cols = tuple(_readonly(np.asarray(c, dtype=float)) for c in self.columns)
        labels = _readonly(np.asarray(self.labels, dtype=float))
        n = cols[0].shape[0]
        if n < 2:
            raise DataError("dataset needs at least 2 rows")
        for name, c in zip(self.column_names, cols):
            if c.ndim != 1 or c.shape[0] != n:
                raise DataError(f"column {name!r} has inconsistent length")
            if not np.all(np.isfinite(c)):
                raise DataError(f"column {name!r} contains non-finite values")
        if labels.shape != (n,):
            raise DataError("label vector length mismatch")
        if self.task == CLASSIFICATION:
            if not np.all(np.isfinite(labels)):
                raise DataError("classification labels must be finite")
            if not np.all(labels == np.floor(labels)) or labels.min() < 0:
                raise DataError("classification labels must be integers >= 0")
        else:
            if not np.all(np.isfinite(labels)):
                raise DataError("regression labels must be finite")
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "columns", cols)
        object.__setattr__(self, "labels", labels)

    @property
    def n_rows(self) -> int:
        return self.columns[0].shape[0]

    @property
    def n_features(self) -> int:
        return len(self.columns)

    @property
    def n_classes(self) -> int:
        if self.task != CLASSIFICATION:
            raise DataError("n_classes is only defined for classification")
        return int(self.labels.max()) + 1

    def matrix(self) -> np.ndarray:
        return np.column_stack(self.columns)

    def subset(self, indices) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(
            column_names=self.column_names,
            columns=tuple(c[idx] for c in self.columns),
            labels=self.labels[idx],
            task=self.task,
        )


def _readonly(a: np.ndarray) -> np.ndarray:
    a = a.copy() if not a.flags.owndata else a
    a.flags.writeable = False
    return a


def load_csv(path, task: str, label_column: str) -> Dataset:
    """Parse an RFC-4180 CSV with a header row into a Dataset.

    Rows with unparsable or non-finite cells are dropped; the count lands in
    ``Dataset.dropped_rows``. Classification labels are re-indexed to 0..C-1
    in first-appearance order.
    """
    if task not in TASKS:
        raise DataError(f"unknown task {task!r}")
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError("empty CSV: missing header row") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"label column {label_column!r} not in header {header}")
        label_idx = header.index(label_column)
        feat_idx = [i for i in range(len(header)) if i != label_idx]
        if not feat_idx:
            raise DataError("no feature columns besides the label")

        feat_rows: list[list[float]] = []
        raw_labels: list[str] = []
        dropped = 0
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                dropped += 1
                continue
            vals = []
            ok = True
            for i in feat_idx:
                x = _parse_float(row[i])
                if x is None:
                    ok = False
                    break
                vals.append(x)
            label_cell = row[label_idx].strip()
            if ok and task == REGRESSION:
                y = _parse_float(label_cell)
                if y is None:
                    ok = False
            elif ok and not label_cell:
                ok = False
            if not ok:
                dropped += 1
                continue
            feat_rows.append(vals)
            raw_labels.append(label_cell)

    if len(feat_rows) < 2:
        raise DataError(f"fewer than 2 surviving rows (dropped {dropped})")

    if task == CLASSIFICATION:
        mapping: dict[str, int] = {}
        labels = np.empty(len(raw_labels))
        for i, cell in enumerate(raw_labels):
            if cell not in mapping:
                mapping[cell] = len(mapping)
            labels[i] = mapping[cell]
        if len(mapping) < 2:
            raise DataError("classification labels contain a single class")
    else:
        labels = np.array([float(c) for c in raw_labels])

    matrix = np.array(feat_rows)
    return Dataset(
        column_names=tuple(header[i] for i in feat_idx),
        columns=tuple(matrix[:, j] for j in range(matrix.shape[1])),
        labels=labels,
        task=task,
        dropped_rows=dropped,
    )


def _parse_float(cell: str) -> float | None:
    try:
        x = float(cell)
    except (TypeError, ValueError):
        return None
    return x if math.isfinite(x) else None


def equal_width_bins(values, k: int = 5) -> np.ndarray:
    """Assign each value to one of k equal-width ranges over [min, max]."""
    v = np.asarray(values, dtype=float)
    lo, hi = v.min(), v.max()
    if hi <= lo:
        return np.zeros(v.shape, dtype=int)
    bins = np.floor((v - lo) / (hi - lo) * k).astype(int)
    return np.clip(bins, 0, k - 1)


def stratified_split_indices(d: Dataset, test_fraction: float, seed: int):
    """Per-class (or per-label-range) test index draw; deterministic in seed."""
    if not 0.0 < test_fraction < 1.0:
        raise DataError("test_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    if d.task == CLASSIFICATION:
        groups = d.labels.astype(int)
    else:
        groups = equal_width_bins(d.labels, 5)

    test_parts = []
    for g in np.unique(groups):
        members = np.flatnonzero(groups == g)
        if members.size < 2:
            warnings.warn(
                f"stratification group {g} has {members.size} member(s); "
                "placing them all in the training split"
            )
            continue
        n_test = int(math.floor(test_fraction * members.size + 0.5))
        picked = rng.permutation(members)[:n_test]
        test_parts.append(picked)

    test_idx = np.sort(np.concatenate(test_parts)) if test_parts else np.array([], dtype=int)
    mask = np.ones(d.n_rows, dtype=bool)
    mask[test_idx] = False
    train_idx = np.flatnonzero(mask)
    return train_idx, test_idx


def stratified_split(d: Dataset, test_fraction: float, seed: int):
    train_idx, test_idx = stratified_split_indices(d, test_fraction, seed)
    return d.subset(train_idx), d.subset(test_idx)

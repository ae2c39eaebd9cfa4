"""
Dataset ingestion for the experiment harness.

Reads PMLB-style CSV exports (header row, a "target" column holding the
labels), scales features onto the Chebyshev domain [-1, 1] with train-only
min/max statistics, splits stratified by class, and generates the synthetic
rings and XOR benchmarks.
"""

import csv
import logging
import math
import os

import numpy as np

from chebybasis import affine_to_unit
from numcore import ShapeError, as_matrix

logger = logging.getLogger(__name__)

TARGET_COLUMN = "target"


class CsvFormatError(ValueError):
    """Raised when a CSV cell cannot be parsed."""

    def __init__(self, row, column, value, reason="is not a real number"):
        self.row = row
        self.column = column
        self.value = value
        super().__init__(f"Cell {value!r} at row {row}, column {column!r} {reason}")


class EmptyDatasetError(ValueError):
    """Raised when a file or split holds no samples."""


class SingleClassError(ValueError):
    """Raised when a dataset has fewer than two classes."""


class Dataset:
    """Feature matrix with integer labels in [0, n_classes)."""

    def __init__(self, X, y, n_classes=None, feature_names=None, name="dataset"):
        self.X = np.asarray(X, dtype=np.float64)
        if self.X.ndim != 2:
            raise ShapeError(f"Feature matrix must be 2-D, got shape {self.X.shape}")
        self.y = np.asarray(y, dtype=np.int64).reshape(-1)
        if self.X.shape[0] != self.y.shape[0]:
            raise ShapeError(f"{self.X.shape[0]} samples but {self.y.shape[0]} labels")
        self.n_classes = int(n_classes) if n_classes is not None else int(self.y.max(initial=-1)) + 1
        self.feature_names = list(feature_names) if feature_names else [f"x{i}" for i in range(self.X.shape[1])]
        if len(self.feature_names) != self.X.shape[1]:
            raise ShapeError(f"{len(self.feature_names)} feature names for {self.X.shape[1]} features")
        self.name = name

    @property
    def n_samples(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    def validate(self):
        """Check that labels lie in range and every class appears."""
        if self.n_samples == 0:
            raise EmptyDatasetError(f"Dataset {self.name!r} has no samples")
        if np.any((self.y < 0) | (self.y >= self.n_classes)):
            raise ValueError(f"Dataset {self.name!r} has labels outside [0, {self.n_classes})")
        missing = sorted(set(range(self.n_classes)) - set(self.y.tolist()))
        if missing:
            raise ValueError(f"Dataset {self.name!r} has no samples of class(es) {missing}")
        if self.n_classes < 2:
            raise SingleClassError(f"Dataset {self.name!r} has a single class")
        return self

    def subset(self, indices):
        """Rows at the given indices; n_classes and names are kept."""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self.X[indices], self.y[indices], self.n_classes, self.feature_names, self.name)

    def with_features(self, X):
        return Dataset(X, self.y, self.n_classes, self.feature_names, self.name)

    def class_counts(self):
        return np.bincount(self.y, minlength=self.n_classes)

    def __str__(self):
        return f"{self.name} ({self.n_samples} samples, {self.n_features} features, {self.n_classes} classes)"


class ScalerParams:
    """Per-feature min and max fitted on a training split."""

    def __init__(self, mins, maxs):
        self.mins = np.array(mins, dtype=np.float64).reshape(-1)
        self.maxs = np.array(maxs, dtype=np.float64).reshape(-1)
        if self.mins.shape != self.maxs.shape:
            raise ShapeError("Scaler min and max vectors differ in length")
        if np.any(self.maxs < self.mins):
            raise ValueError("Scaler max must be >= min for every feature")

    @property
    def constant(self):
        """Boolean flag per feature: True where the training column was constant."""
        return self.maxs <= self.mins

    def to_dict(self):
        return {"min": self.mins.tolist(), "max": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, doc):
        return cls(doc["min"], doc["max"])


def _parse_label_values(raw):
    try:
        return [float(v) for v in raw]
    except ValueError:
        return list(raw)


def load_csv(path, name=None):
    """Load a PMLB-style CSV file.

    The column named "target" (or the last column) holds the labels, which
    are remapped to 0..C-1 by sorted original value. Every other column must
    parse as a finite real.

    Args:
        path: CSV file path (UTF-8, comma separated, header row)
        name: Dataset name; defaults to the file name without extension

    Returns:
        Dataset: The loaded dataset
    """
    with open(path, newline="", encoding="utf-8") as f:
        rows = [(line_no, row) for line_no, row in enumerate(csv.reader(f), start=1) if row]

    if not rows:
        raise EmptyDatasetError(f"{path} is empty")
    header = [h.strip() for h in rows[0][1]]
    body = rows[1:]
    if not body:
        raise EmptyDatasetError(f"{path} has a header but no data rows")

    target_idx = header.index(TARGET_COLUMN) if TARGET_COLUMN in header else len(header) - 1
    feature_cols = [i for i in range(len(header)) if i != target_idx]

    X = np.empty((len(body), len(feature_cols)), dtype=np.float64)
    raw_labels = []
    for r, (line_no, row) in enumerate(body):
        if len(row) != len(header):
            raise CsvFormatError(line_no, None, ",".join(row), f"has {len(row)} cells, header has {len(header)}")
        for c, col in enumerate(feature_cols):
            cell = row[col].strip()
            try:
                value = float(cell)
            except ValueError:
                raise CsvFormatError(line_no, header[col], cell) from None
            if not math.isfinite(value):
                raise CsvFormatError(line_no, header[col], cell, "is not finite")
            X[r, c] = value
        raw_labels.append(row[target_idx].strip())

    label_values = _parse_label_values(raw_labels)
    classes = sorted(set(label_values))
    if len(classes) < 2:
        raise SingleClassError(f"{path} holds a single class ({raw_labels[0]!r})")
    mapping = {value: idx for idx, value in enumerate(classes)}
    y = np.array([mapping[v] for v in label_values], dtype=np.int64)

    if name is None:
        name = os.path.splitext(os.path.basename(path))[0]
    ds = Dataset(X, y, len(classes), [header[i] for i in feature_cols], name)
    logger.info(f"Loaded {ds} from {path}")
    return ds.validate()


def save_csv(ds, path):
    """Write a dataset in the same CSV form load_csv reads."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(list(ds.feature_names) + [TARGET_COLUMN])
        for features, label in zip(ds.X, ds.y):
            writer.writerow([repr(float(v)) for v in features] + [int(label)])


def fit_scaler(train):
    """Fit per-feature min/max on the training split only."""
    if train.n_samples == 0:
        raise EmptyDatasetError("Cannot fit a scaler on an empty split")
    params = ScalerParams(train.X.min(axis=0), train.X.max(axis=0))
    if np.any(params.constant):
        logger.warning(f"Constant feature(s) {np.flatnonzero(params.constant).tolist()} map to 0")
    return params


def apply_scaler(params, X):
    """Map features onto [-1, 1]; constant features become 0 and values outside the training range are clamped."""
    X = as_matrix(X, "X")
    if X.shape[1] != params.mins.size:
        raise ShapeError(f"Scaler fitted on {params.mins.size} features, got {X.shape[1]}")
    out = np.zeros_like(X)
    for col in np.flatnonzero(~params.constant):
        out[:, col] = affine_to_unit(X[:, col], params.mins[col], params.maxs[col])
    return np.clip(out, -1.0, 1.0)


def stratified_split_indices(ds, train_fraction=0.8, seed=0):
    """Per-class shuffled split.

    Class c contributes floor(fraction * count_c) training samples, with the
    remainder distributed by largest fractional part so the training total is
    round(fraction * n). Classes with two or more samples keep at least one
    sample on each side; a single-sample class goes to train.

    Returns:
        tuple: (sorted train indices, sorted test indices)
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must lie in (0, 1), got {train_fraction}")

    rng = np.random.default_rng(seed)
    counts = ds.class_counts()
    exact = train_fraction * counts
    n_train = np.floor(exact).astype(np.int64)
    remainder = int(math.floor(train_fraction * ds.n_samples + 0.5)) - int(n_train.sum())
    if remainder > 0:
        order = sorted(range(ds.n_classes), key=lambda c: (-(exact[c] - n_train[c]), c))
        for c in order[:remainder]:
            n_train[c] += 1

    train_idx, test_idx = [], []
    for c in range(ds.n_classes):
        members = np.flatnonzero(ds.y == c)
        if members.size == 0:
            continue
        if members.size == 1:
            logger.warning(f"Class {c} of {ds.name!r} has a single sample; it goes to the training split")
            take = 1
        else:
            take = int(min(max(n_train[c], 1), members.size - 1))
        shuffled = rng.permutation(members)
        train_idx.extend(shuffled[:take].tolist())
        test_idx.extend(shuffled[take:].tolist())
    return np.sort(np.array(train_idx, dtype=np.int64)), np.sort(np.array(test_idx, dtype=np.int64))


def stratified_split(ds, train_fraction=0.8, seed=0):
    """Split a dataset into (train, test) subsets; deterministic for a given seed."""
    train_idx, test_idx = stratified_split_indices(ds, train_fraction, seed)
    return ds.subset(train_idx), ds.subset(test_idx)


def xor_label(x1, x2):
    return int(np.sign(x1) * np.sign(x2) > 0)


def make_xor(n, seed=0):
    """Uniform points in [-1, 1]^2 labelled 1 where both coordinates share a sign.

    The first two points are reflected into quadrants I and II so both
    classes are always present.
    """
    if n < 8:
        raise ValueError(f"make_xor needs n >= 8, got {n}")
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, 2))
    X[0] = np.abs(X[0])
    X[1] = [-abs(X[1, 0]), abs(X[1, 1])]
    y = (np.sign(X[:, 0]) * np.sign(X[:, 1]) > 0).astype(np.int64)
    return Dataset(X, y, 2, ["x0", "x1"], "xor").validate()


def make_rings(n, noise_sd=0.03, seed=0):
    """Two concentric rings of radius 0.4 (class 0) and 0.85 (class 1) with radial Gaussian noise."""
    if n < 8:
        raise ValueError(f"make_rings needs n >= 8, got {n}")
    if noise_sd < 0:
        raise ValueError(f"noise_sd must be >= 0, got {noise_sd}")
    rng = np.random.default_rng(seed)
    n_inner = n // 2
    y = np.concatenate([np.zeros(n_inner, dtype=np.int64), np.ones(n - n_inner, dtype=np.int64)])
    radius = np.where(y == 0, 0.4, 0.85)
    if noise_sd > 0:
        radius = radius + rng.normal(0.0, noise_sd, size=n)
    angle = rng.uniform(0.0, 2.0 * np.pi, size=n)
    X = np.clip(np.column_stack([radius * np.cos(angle), radius * np.sin(angle)]), -1.0, 1.0)
    order = rng.permutation(n)
    return Dataset(X[order], y[order], 2, ["x0", "x1"], "rings").validate()

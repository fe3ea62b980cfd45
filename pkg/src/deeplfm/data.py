"""Datasets, normalization, and the CSV formats used by the command line.

A dataset is a table of input columns and target columns plus named index
splits. Values are written with ``repr`` so a generate/load/write cycle
reproduces every float exactly.

File formats:

data CSV      header names the columns; input columns first, then target
              columns, then optional noiseless ``true_<target>`` columns.
splits CSV    header ``split,index``; one row per (split name, row index).
predictions   input columns, then ``mean_<target>`` and ``var_<target>``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass
class SeriesDataset:
    """Inputs, targets, and named splits, all in original (raw) units."""

    inputs: np.ndarray                 # (n, p)
    targets: np.ndarray                # (n, d)
    splits: dict                       # name -> int indices
    input_names: list
    target_names: list
    truth: np.ndarray = None           # optional noiseless targets, (n, d)

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise DataError("SeriesDataset: inputs and targets must be 2-D")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise DataError(
                f"SeriesDataset: {self.inputs.shape[0]} input rows vs "
                f"{self.targets.shape[0]} target rows"
            )
        if len(self.input_names) != self.inputs.shape[1]:
            raise DataError("SeriesDataset: input_names length mismatch")
        if len(self.target_names) != self.targets.shape[1]:
            raise DataError("SeriesDataset: target_names length mismatch")
        if self.truth is not None:
            self.truth = np.asarray(self.truth, dtype=np.float64)
            if self.truth.shape != self.targets.shape:
                raise DataError(
                    f"SeriesDataset: truth shape {self.truth.shape} != "
                    f"targets shape {self.targets.shape}"
                )
        n = self.inputs.shape[0]
        cleaned = {}
        for name, idx in self.splits.items():
            idx = np.asarray(idx, dtype=np.intp)
            if idx.size and (idx.min() < 0 or idx.max() >= n):
                raise DataError(
                    f"SeriesDataset: split {name!r} has indices outside "
                    f"[0, {n})"
                )
            cleaned[name] = idx
        self.splits = cleaned

    @property
    def n_points(self):
        return self.inputs.shape[0]

    def split_arrays(self, name, use_truth=False):
        """(inputs, targets) for a named split, in raw units."""
        if name not in self.splits:
            raise DataError(
                f"split {name!r} not found; available: {sorted(self.splits)}"
            )
        idx = self.splits[name]
        targets = self.truth if use_truth else self.targets
        if use_truth and self.truth is None:
            raise DataError("dataset has no noiseless truth columns")
        return self.inputs[idx], targets[idx]


@dataclass
class Normalization:
    """Z-score statistics computed from training data.

    Columns with zero variance get unit scale so normalization stays
    defined; metrics are always computed in denormalized units anyway.
    """

    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: np.ndarray
    y_std: np.ndarray

    @classmethod
    def fit(cls, inputs, targets, x_mode="zscore"):
        """Fit from training data; targets are always z-scored.

        ``x_mode`` selects the input treatment: "zscore" for generic
        regression columns, "identity" to leave inputs untouched (time
        axes already live on a unit scale, and shifting them would move
        the origin that anchors the response-feature transients).
        """
        inputs = np.asarray(inputs, dtype=np.float64)
        targets = np.asarray(targets, dtype=np.float64)
        if inputs.shape[0] < 2:
            raise DataError("normalization needs at least two training points")
        if x_mode not in ("zscore", "identity"):
            raise DataError(f"unknown input normalization {x_mode!r}")
        y_std = targets.std(axis=0)
        if x_mode == "identity":
            x_mean = np.zeros(inputs.shape[1])
            x_std = np.ones(inputs.shape[1])
        else:
            x_std = inputs.std(axis=0)
            x_mean = inputs.mean(axis=0)
            x_std = np.where(x_std == 0.0, 1.0, x_std)
        return cls(
            x_mean=x_mean,
            x_std=x_std,
            y_mean=targets.mean(axis=0),
            y_std=np.where(y_std == 0.0, 1.0, y_std),
        )

    def normalize_x(self, x):
        return (np.asarray(x, dtype=np.float64) - self.x_mean) / self.x_std

    def normalize_y(self, y):
        return (np.asarray(y, dtype=np.float64) - self.y_mean) / self.y_std

    def denormalize_mean(self, mean):
        return mean * self.y_std + self.y_mean

    def denormalize_var(self, var):
        return var * np.square(self.y_std)

    def to_dict(self):
        return {
            "x_mean": self.x_mean, "x_std": self.x_std,
            "y_mean": self.y_mean, "y_std": self.y_std,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            x_mean=np.asarray(d["x_mean"], dtype=np.float64),
            x_std=np.asarray(d["x_std"], dtype=np.float64),
            y_mean=np.asarray(d["y_mean"], dtype=np.float64),
            y_std=np.asarray(d["y_std"], dtype=np.float64),
        )


def _format(value):
    return repr(float(value))


def write_data_csv(path, dataset):
    names = list(dataset.input_names) + list(dataset.target_names)
    if dataset.truth is not None:
        names += [f"true_{t}" for t in dataset.target_names]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for i in range(dataset.n_points):
            row = [_format(v) for v in dataset.inputs[i]]
            row += [_format(v) for v in dataset.targets[i]]
            if dataset.truth is not None:
                row += [_format(v) for v in dataset.truth[i]]
            writer.writerow(row)


def write_splits_csv(path, splits):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["split", "index"])
        for name in splits:
            for idx in splits[name]:
                writer.writerow([name, int(idx)])


def load_splits_csv(path):
    splits = {}
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != ["split", "index"]:
                raise DataError(
                    f"{path}: expected header 'split,index', got {header}"
                )
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != 2:
                    raise DataError(f"{path}:{lineno}: expected 2 fields")
                name = row[0].strip()
                try:
                    idx = int(row[1])
                except ValueError as exc:
                    raise DataError(
                        f"{path}:{lineno}: index {row[1]!r} is not an integer"
                    ) from exc
                splits.setdefault(name, []).append(idx)
    except OSError as exc:
        raise DataError(f"cannot read splits file {path}: {exc}") from exc
    return {name: np.asarray(idx, dtype=np.intp) for name, idx in splits.items()}


def load_data_csv(path, input_cols=None, target_cols=None):
    """Read a data CSV into column arrays.

    Column roles default to convention: names starting with ``true_`` are
    noiseless truth, names starting with ``y`` are targets, everything
    else is an input. Explicit column lists override the convention.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise DataError(f"{path}: empty file")
            header = [h.strip() for h in header]
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise DataError(
                        f"{path}:{lineno}: {len(row)} fields, expected "
                        f"{len(header)}"
                    )
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise DataError(
                        f"{path}:{lineno}: non-numeric value"
                    ) from exc
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from exc

    if input_cols is None and target_cols is None:
        truth_cols = [h for h in header if h.startswith("true_")]
        target_cols = [
            h for h in header if h.startswith("y") and not h.startswith("true_")
        ]
        input_cols = [
            h for h in header if h not in target_cols and h not in truth_cols
        ]
    elif input_cols is None or target_cols is None:
        raise DataError("specify both input and target columns, or neither")
    else:
        truth_cols = [
            f"true_{t}" for t in target_cols if f"true_{t}" in header
        ]
        if truth_cols and len(truth_cols) != len(target_cols):
            raise DataError(
                f"{path}: found truth columns for only some targets"
            )
    if not input_cols or not target_cols:
        raise DataError(
            f"{path}: could not identify input/target columns in {header}"
        )
    for col in list(input_cols) + list(target_cols) + truth_cols:
        if col not in header:
            raise DataError(f"{path}: column {col!r} not in header {header}")

    table = np.asarray(rows, dtype=np.float64)
    if table.size == 0:
        table = table.reshape(0, len(header))
    col_index = {h: i for i, h in enumerate(header)}
    inputs = table[:, [col_index[c] for c in input_cols]]
    targets = table[:, [col_index[c] for c in target_cols]]
    truth = (
        table[:, [col_index[c] for c in truth_cols]] if truth_cols else None
    )
    return inputs, targets, truth, list(input_cols), list(target_cols)


def load_dataset(data_path, splits_path=None, input_cols=None, target_cols=None):
    inputs, targets, truth, input_names, target_names = load_data_csv(
        data_path, input_cols, target_cols
    )
    splits = load_splits_csv(splits_path) if splits_path else {}
    if not splits:
        splits = {"train": np.arange(inputs.shape[0])}
    return SeriesDataset(
        inputs=inputs,
        targets=targets,
        splits=splits,
        input_names=input_names,
        target_names=target_names,
        truth=truth,
    )


def write_predictions_csv(path, inputs, mean, var, input_names, target_names):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = list(input_names)
        header += [f"mean_{t}" for t in target_names]
        header += [f"var_{t}" for t in target_names]
        writer.writerow(header)
        for i in range(np.asarray(inputs).shape[0]):
            row = [_format(v) for v in inputs[i]]
            row += [_format(v) for v in mean[i]]
            row += [_format(v) for v in var[i]]
            writer.writerow(row)


def load_inputs_csv(path, input_cols=None):
    """Read an inputs-only CSV (all columns are inputs unless named)."""
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise DataError(f"{path}: empty file")
            header = [h.strip() for h in header]
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise DataError(f"{path}:{lineno}: non-numeric value") from exc
    except OSError as exc:
        raise DataError(f"cannot read inputs file {path}: {exc}") from exc
    if input_cols is None:
        input_cols = header
    for col in input_cols:
        if col not in header:
            raise DataError(f"{path}: column {col!r} not in header {header}")
    table = np.asarray(rows, dtype=np.float64)
    if table.size == 0:
        table = table.reshape(0, len(header))
    col_index = {h: i for i, h in enumerate(header)}
    return table[:, [col_index[c] for c in input_cols]], list(input_cols)

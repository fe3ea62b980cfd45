"""Evaluation metrics, computed per output dimension in original units.

NMSE divides the mean squared error by the population variance (ddof 0)
of the test targets, so predicting the test mean scores 1.0. MNLL is the
mean Gaussian negative log-likelihood under the predictive mean and
variance.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataError

_LOG_2PI = float(np.log(2.0 * np.pi))


def _check_2d(name, *arrays):
    out = []
    first = None
    for arr in arrays:
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise DataError(f"{name}: expected 2-D arrays, got shape {arr.shape}")
        if first is None:
            first = arr.shape
        elif arr.shape != first:
            raise DataError(f"{name}: shape mismatch {arr.shape} vs {first}")
        out.append(arr)
    if first[0] == 0:
        raise DataError(f"{name}: empty arrays")
    return out


def nmse(y_true, y_pred):
    """Normalized mean squared error per output, shape (d,)."""
    y_true, y_pred = _check_2d("nmse", y_true, y_pred)
    var = y_true.var(axis=0)
    if np.any(var == 0.0):
        raise DataError("nmse: test targets are constant in some output")
    return np.mean(np.square(y_true - y_pred), axis=0) / var


def mnll(y_true, mean, var):
    """Mean Gaussian negative log-likelihood per output, shape (d,)."""
    y_true, mean, var = _check_2d("mnll", y_true, mean, var)
    if np.any(var <= 0.0):
        raise DataError("mnll: predictive variance must be strictly positive")
    return np.mean(
        0.5 * (_LOG_2PI + np.log(var) + np.square(y_true - mean) / var),
        axis=0,
    )


@dataclass
class MetricReport:
    """Per-output and aggregate metrics for one evaluation split."""

    split: str
    n_points: int
    target_names: list
    nmse_per_output: np.ndarray
    mnll_per_output: np.ndarray

    @property
    def mean_nmse(self):
        return float(np.mean(self.nmse_per_output))

    @property
    def mean_mnll(self):
        return float(np.mean(self.mnll_per_output))

    def to_dict(self):
        return {
            "split": self.split,
            "n_points": int(self.n_points),
            "nmse": {
                name: float(v)
                for name, v in zip(self.target_names, self.nmse_per_output)
            },
            "mnll": {
                name: float(v)
                for name, v in zip(self.target_names, self.mnll_per_output)
            },
            "mean_nmse": self.mean_nmse,
            "mean_mnll": self.mean_mnll,
        }


def evaluate_predictions(split, target_names, y_true, mean, var):
    return MetricReport(
        split=split,
        n_points=int(np.asarray(y_true).shape[0]),
        target_names=list(target_names),
        nmse_per_output=nmse(y_true, mean),
        mnll_per_output=mnll(y_true, mean, var),
    )

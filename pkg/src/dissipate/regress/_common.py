from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class RegressionError(ValueError):
    pass


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True)
class FeatureWeights:
    """Non-negative per-feature weights normalized to sum to one."""

    weights: np.ndarray
    feature_ids: tuple
    method: str

    @classmethod
    def from_raw(cls, raw, feature_ids, method):
        raw = np.asarray(raw, dtype=np.float64)
        total = raw.sum()
        if not total > 0:
            w = np.full(raw.size, 1.0 / raw.size)
        else:
            w = raw / total
        return cls(w, tuple(feature_ids), method)

    def as_dict(self):
        return dict(zip(self.feature_ids, self.weights.tolist()))


def as_xy(data):
    """Accept a DesignMatrix or an ``(X, y)`` pair."""
    if hasattr(data, "X") and hasattr(data, "y"):
        ids = tuple(getattr(data, "feature_ids", ()))
        X, y = data.X, data.y
    else:
        X, y = data
        ids = ()
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.ascontiguousarray(y, dtype=np.float64).ravel()
    if X.shape[0] != y.size:
        raise RegressionError("X and y have different numbers of rows")
    if not ids:
        ids = tuple(f"x{i}" for i in range(X.shape[1]))
    return X, y, ids


def check_inputs(X, n_features):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != n_features:
        raise RegressionError(
            f"dimension mismatch: model has {n_features} features, input has {X.shape[1]}"
        )
    return np.ascontiguousarray(X)

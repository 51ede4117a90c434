"""Neighbourhood component analysis for regression (feature weighting).

Each sample predicts from a kernel-weighted random reference neighbour; the
feature weights of the weighted L1 distance are learned by minimizing the
regularized mean leave-one-out absolute error.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ._common import FeatureWeights, RegressionError, as_xy, check_inputs


class NcaDivergenceError(RegressionError):
    pass


@dataclass(frozen=True)
class NcaModel:
    weights: np.ndarray
    regularization: float
    kernel_width: float
    X_train: np.ndarray = field(repr=False)
    y_train: np.ndarray = field(repr=False)
    feature_ids: tuple = ()
    objective: float = float("nan")
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    method = "nca"

    def predict(self, X):
        return nca_predict(self, X)

    def feature_weights(self):
        return nca_feature_weights(self)

    def to_dict(self):
        return {
            "weights": self.weights.tolist(),
            "regularization": self.regularization,
            "kernel_width": self.kernel_width,
            "X_train": self.X_train.tolist(),
            "y_train": self.y_train.tolist(),
            "objective": self.objective,
        }

    @classmethod
    def from_dict(cls, d, feature_ids=()):
        return cls(np.array(d["weights"], float), float(d["regularization"]),
                   float(d["kernel_width"]), np.array(d["X_train"], float),
                   np.array(d["y_train"], float), tuple(feature_ids),
                   float(d.get("objective", float("nan"))))


def nca_probabilities(X, w, kernel_width=1.0):
    """Reference-point probabilities ``p_ij`` (zero diagonal, rows sum to 1)."""
    X = np.asarray(X, dtype=np.float64)
    D = np.abs(X[:, None, :] - X[None, :, :]) @ (np.asarray(w, float) ** 2)
    np.fill_diagonal(D, np.inf)
    D -= D.min(axis=1, keepdims=True)
    P = np.exp(-D / kernel_width)
    return P / P.sum(axis=1, keepdims=True)


def nca_objective(X, y, w, regularization, kernel_width=1.0):
    """``(f, grad)`` of the regularized mean LOO absolute error."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    w = np.ascontiguousarray(w, dtype=np.float64)
    return kernels.nca_objective_grad(X, y, w, float(kernel_width), float(regularization))


def _descend(fun, w0, max_iter, tol, armijo=1e-4):
    """Gradient descent with Barzilai-Borwein trial steps and backtracking.

    Only steps that decrease the objective are accepted, so the returned
    trace is non-increasing.
    """
    w = w0.copy()
    f, g = fun(w)
    if not np.isfinite(f):
        raise NcaDivergenceError("non-finite objective at the starting point")
    trace = [f]
    gnorm = float(np.max(np.abs(g)))
    step = 1.0 / gnorm if gnorm > 0 else 1.0
    for _ in range(max_iter):
        gg = float(g @ g)
        if gg == 0.0:
            break
        while True:
            w_new = w - step * g
            f_new, g_new = fun(w_new)
            if np.isfinite(f_new) and f_new <= f - armijo * step * gg:
                break
            step *= 0.5
            if step < 1e-14:
                return w, f, np.array(trace)
        s = w_new - w
        yk = g_new - g
        sy = float(s @ yk)
        step = float(s @ s) / sy if sy > 0 else 2.0 * step
        improvement = f - f_new
        w, f, g = w_new, f_new, g_new
        trace.append(f)
        if improvement <= tol * max(1.0, abs(f)):
            break
    if not np.all(np.isfinite(w)):
        raise NcaDivergenceError(f"weights diverged after {len(trace)} accepted steps")
    return w, f, np.array(trace)


def fit_nca(data, regularization=None, kernel_width=1.0, n_starts=3, seed=0,
            max_iter=500, tol=1e-8):
    """Learn NCA feature weights; best of ``n_starts`` descents is kept.

    The first start uses unit weights, the others seeded uniform draws in
    [0.5, 1.5]. ``regularization`` defaults to ``1 / m``.
    """
    X, y, ids = as_xy(data)
    m, n = X.shape
    if m < 3:
        raise RegressionError("NCA needs at least 3 samples")
    reg = 1.0 / m if regularization is None else float(regularization)
    if reg < 0:
        raise RegressionError("regularization must be non-negative")

    def fun(w):
        return nca_objective(X, y, w, reg, kernel_width)

    rng = np.random.default_rng(seed)
    best = None
    for k in range(max(1, n_starts)):
        w0 = np.ones(n) if k == 0 else rng.uniform(0.5, 1.5, n)
        w, f, trace = _descend(fun, w0, max_iter, tol)
        if best is None or f < best[1]:
            best = (w, f, trace)
    w, f, trace = best
    return NcaModel(w, reg, float(kernel_width), X.copy(), y.copy(), ids, float(f), trace)


def nca_predict(model, X):
    """Kernel-weighted average of training targets for new inputs."""
    if model.X_train.shape[0] == 0:
        raise RegressionError("model has an empty training set")
    X = check_inputs(X, model.weights.size)
    return kernels.nca_predict(model.X_train, model.y_train, model.weights,
                               float(model.kernel_width), X)


def nca_feature_weights(model):
    """Absolute learned weights, normalized to sum to one."""
    return FeatureWeights.from_raw(np.abs(model.weights), model.feature_ids, "nca")

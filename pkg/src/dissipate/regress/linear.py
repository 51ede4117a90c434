"""Ordinary least squares and LASSO by cyclic coordinate descent."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ._common import ConvergenceWarning, RegressionError, as_xy, check_inputs


@dataclass(frozen=True)
class LinearModel:
    intercept: float
    coefficients: np.ndarray
    feature_ids: tuple = ()

    method = "lr"

    def predict(self, X):
        return predict_linear(self, X)

    def to_dict(self):
        return {"intercept": self.intercept, "coefficients": self.coefficients.tolist()}

    @classmethod
    def from_dict(cls, d, feature_ids=()):
        return cls(float(d["intercept"]), np.array(d["coefficients"], float), tuple(feature_ids))


@dataclass(frozen=True)
class LassoModel(LinearModel):
    penalty: float = 0.0
    n_sweeps: int = 0
    final_delta: float = 0.0
    objective_trace: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    method = "lasso"

    def to_dict(self):
        return {**super().to_dict(), "penalty": self.penalty}

    @classmethod
    def from_dict(cls, d, feature_ids=()):
        return cls(float(d["intercept"]), np.array(d["coefficients"], float),
                   tuple(feature_ids), penalty=float(d["penalty"]))


def predict_linear(model, X):
    X = check_inputs(X, model.coefficients.size)
    return model.intercept + X @ model.coefficients


def _dependent_columns(A, names):
    """Names of columns lying in the span of the columns before them."""
    out = []
    rank = 0
    for j in range(A.shape[1]):
        r = np.linalg.matrix_rank(A[:, : j + 1])
        if r == rank:
            out.append(names[j])
        rank = r
    return out


def fit_ols(data):
    """Least-squares fit of an intercept plus one slope per feature."""
    X, y, ids = as_xy(data)
    m, n = X.shape
    if m <= n + 1:
        raise RegressionError(f"OLS needs more than {n + 1} rows, got {m}")
    A = np.column_stack([np.ones(m), X])
    if np.linalg.matrix_rank(A) < n + 1:
        dep = _dependent_columns(A, ("intercept",) + ids)
        raise RegressionError(f"rank-deficient design matrix; dependent columns: {dep}")
    beta, *_ = np.linalg.lstsq(A, y, rcond=None)
    return LinearModel(float(beta[0]), beta[1:].copy(), ids)


def lasso_max_penalty(data):
    """Smallest penalty at which every slope is exactly zero."""
    X, y, _ = as_xy(data)
    return float(2.0 * np.max(np.abs((X - X.mean(axis=0)).T @ (y - y.mean()))))


def _lasso_path_fit(X, y, penalty, beta0, tol, max_sweeps):
    xm = X.mean(axis=0)
    ym = y.mean()
    Xc = np.ascontiguousarray(X - xm)
    yc = np.ascontiguousarray(y - ym)
    beta = np.array(beta0, dtype=np.float64, copy=True)
    sweeps, delta, trace = kernels.lasso_cd(Xc, yc, float(penalty), beta, float(tol),
                                            int(max_sweeps))
    return beta, float(ym - xm @ beta), int(sweeps), float(delta), trace


def fit_lasso(data, penalty=None, tol=1e-8, max_sweeps=100_000, cv_folds=5, seed=0):
    """Minimize ``sum((f(x) - y)**2) + penalty * sum(|beta_j|)``.

    The intercept is unpenalized. When ``penalty`` is None it is chosen by
    ``cv_folds``-fold cross-validation on ``data`` (see :func:`lasso_cv`).
    """
    X, y, ids = as_xy(data)
    if penalty is None:
        penalty = lasso_cv(data, folds=cv_folds, seed=seed)
    if penalty < 0:
        raise RegressionError("penalty must be non-negative")
    beta, b0, sweeps, delta, trace = _lasso_path_fit(
        X, y, penalty, np.zeros(X.shape[1]), tol, max_sweeps)
    if delta >= tol:
        warnings.warn(
            f"LASSO did not converge in {sweeps} sweeps (last max change {delta:.3g})",
            ConvergenceWarning,
        )
    return LassoModel(b0, beta, ids, penalty=float(penalty), n_sweeps=sweeps,
                      final_delta=delta, objective_trace=trace)


def lasso_cv(data, folds=5, seed=0, n_penalties=30, min_ratio=1e-4, tol=1e-8,
             max_sweeps=100_000):
    """Penalty minimizing the k-fold cross-validated squared error.

    Candidates are log-spaced from the deactivation bound down to
    ``min_ratio`` times it. Penalties are rescaled by the fold's share of
    rows because the objective sums (rather than averages) residuals.
    Ties go to the larger penalty.
    """
    X, y, _ = as_xy(data)
    m = X.shape[0]
    top = lasso_max_penalty((X, y))
    if top == 0:
        return 0.0
    grid = top * np.logspace(0.0, np.log10(min_ratio), n_penalties)
    order = np.random.default_rng(seed).permutation(m)
    parts = np.array_split(order, folds)
    sse = np.zeros(n_penalties)
    for k in range(folds):
        test = parts[k]
        train = np.concatenate([parts[j] for j in range(folds) if j != k])
        frac = train.size / m
        beta = np.zeros(X.shape[1])
        for i, lam in enumerate(grid):
            beta, b0, *_ = _lasso_path_fit(X[train], y[train], lam * frac, beta, tol,
                                           max_sweeps)
            resid = y[test] - (b0 + X[test] @ beta)
            sse[i] += resid @ resid
    best = np.flatnonzero(sse <= sse.min() * (1 + 1e-12))[0]
    return float(grid[best])

"""Gaussian process regression with an ARD squared-exponential kernel.

The model is ``y = beta0 + h(x) + eps`` with ``h ~ GP(0, k_ARD)`` and
``eps ~ N(0, sigma**2)``. Hyperparameters are optimized on the exact log
marginal likelihood with the constant ``beta0`` profiled out by generalized
least squares.

Parameter vector ``theta`` (all natural logs)::

    theta[:n]   length scales, one per input dimension
    theta[n]    signal standard deviation
    theta[n+1]  noise standard deviation
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .. import kernels
from ._common import FeatureWeights, RegressionError, as_xy, check_inputs

JITTER_START = 1e-10
JITTER_MAX = 1e-4
_LOG_2PI = math.log(2.0 * math.pi)


class GprFitError(RegressionError):
    pass


def ard_kernel(x_i, x_j, length_scales, signal_std):
    """Covariance between two input vectors."""
    x_i = np.asarray(x_i, dtype=np.float64).ravel()
    x_j = np.asarray(x_j, dtype=np.float64).ravel()
    ls = np.asarray(length_scales, dtype=np.float64).ravel()
    if not (x_i.size == x_j.size == ls.size):
        raise RegressionError("dimension mismatch in ard_kernel")
    if np.any(ls <= 0) or signal_std <= 0:
        raise RegressionError("length scales and signal std must be positive")
    z = (x_i - x_j) / ls
    return float(signal_std ** 2 * math.exp(-0.5 * float(z @ z)))


def ard_kernel_matrix(X1, X2, length_scales, signal_std):
    X1 = np.ascontiguousarray(X1, dtype=np.float64)
    X2 = np.ascontiguousarray(X2, dtype=np.float64)
    ls = np.ascontiguousarray(length_scales, dtype=np.float64)
    return kernels.ard_kernel(X1, X2, ls, float(signal_std) ** 2)


def _cholesky(K):
    """Lower Cholesky factor with escalating diagonal jitter."""
    base = float(np.mean(np.diag(K)))
    if not base > 0:
        base = 1.0
    jitter = JITTER_START * base
    while jitter <= JITTER_MAX * base * (1 + 1e-9):
        try:
            A = K.copy()
            A[np.diag_indices_from(A)] += jitter
            return linalg.cholesky(A, lower=True, check_finite=False), jitter
        except linalg.LinAlgError:
            jitter *= 10.0
    raise GprFitError("kernel matrix not positive definite after jitter escalation")


def log_marginal_likelihood(theta, X, y, gradient=True):
    """Profiled log marginal likelihood, optionally with its gradient.

    Returns ``(lml, grad, state)``; ``state`` carries the factorization and
    the GLS constant for reuse.
    """
    theta = np.asarray(theta, dtype=np.float64)
    m, n = X.shape
    ls = np.exp(theta[:n])
    sf = math.exp(theta[n])
    sn = math.exp(theta[n + 1])
    K = kernels.ard_kernel(X, X, ls, sf * sf)
    Ky = K.copy()
    Ky[np.diag_indices_from(Ky)] += sn * sn
    L, jitter = _cholesky(Ky)
    ones = np.ones(m)
    kinv_1 = linalg.cho_solve((L, True), ones, check_finite=False)
    kinv_y = linalg.cho_solve((L, True), y, check_finite=False)
    beta = float(ones @ kinv_y) / float(ones @ kinv_1)
    alpha = kinv_y - beta * kinv_1
    r = y - beta
    lml = -0.5 * float(r @ alpha) - float(np.sum(np.log(np.diag(L)))) - 0.5 * m * _LOG_2PI
    state = {"L": L, "alpha": alpha, "beta": beta, "jitter": jitter,
             "length_scales": ls, "signal_std": sf, "noise_std": sn}
    if not gradient:
        return lml, None, state
    Kinv = linalg.cho_solve((L, True), np.eye(m), check_finite=False)
    W = np.outer(alpha, alpha) - Kinv
    WK = np.ascontiguousarray(W * K)
    grad = np.empty(n + 2)
    grad[:n] = 0.5 * kernels.ard_grad_traces(X, WK, ls)
    grad[n] = float(WK.sum())
    grad[n + 1] = sn * sn * float(np.trace(W))
    return lml, grad, state


@dataclass(frozen=True)
class GprModel:
    length_scales: np.ndarray
    signal_std: float
    noise_std: float
    basis_coefficient: float
    X_train: np.ndarray = field(repr=False)
    y_train: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    chol: np.ndarray = field(repr=False)
    jitter: float = 0.0
    log_marginal_likelihood: float = float("nan")
    feature_ids: tuple = ()

    method = "gpr"

    @property
    def theta(self):
        return np.concatenate([np.log(self.length_scales),
                               [math.log(self.signal_std), math.log(self.noise_std)]])

    def predict(self, X):
        return gpr_predict(self, X)[0]

    def feature_weights(self):
        return gpr_feature_weights(self)

    def to_dict(self):
        return {
            "length_scales": self.length_scales.tolist(),
            "signal_std": self.signal_std,
            "noise_std": self.noise_std,
            "basis_coefficient": self.basis_coefficient,
            "X_train": self.X_train.tolist(),
            "y_train": self.y_train.tolist(),
            "log_marginal_likelihood": self.log_marginal_likelihood,
        }

    @classmethod
    def from_dict(cls, d, feature_ids=()):
        """Rebuild the cached factorization from stored hyperparameters."""
        model = from_hyperparameters(
            np.array(d["X_train"], float), np.array(d["y_train"], float),
            np.array(d["length_scales"], float), float(d["signal_std"]),
            float(d["noise_std"]), feature_ids,
        )
        return model


def from_hyperparameters(X, y, length_scales, signal_std, noise_std, feature_ids=()):
    """Condition a GP with fixed hyperparameters on ``(X, y)``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    theta = np.concatenate([np.log(length_scales), [math.log(signal_std), math.log(noise_std)]])
    lml, _, st = log_marginal_likelihood(theta, X, y, gradient=False)
    ids = tuple(feature_ids) or tuple(f"x{i}" for i in range(X.shape[1]))
    return GprModel(st["length_scales"], st["signal_std"], st["noise_std"], st["beta"],
                    X, y, st["alpha"], st["L"], st["jitter"], lml, ids)


def initial_theta(X, y):
    """Scale-aware starting point: mean pairwise distance per dimension,
    ``std(y)`` for the signal and ``0.1 * std(y)`` for the noise."""
    m, n = X.shape
    ls = np.empty(n)
    for d in range(n):
        col = np.sort(X[:, d])
        # mean |xi - xj| over i<j from sorted order
        k = np.arange(m)
        s = float(np.sum((2 * k - m + 1) * col))
        ls[d] = s / (m * (m - 1) / 2)
    ls[~(ls > 0)] = 1.0
    sy = _target_scale(y)
    return np.concatenate([np.log(ls), [math.log(sy), math.log(0.1 * sy)]])


def _target_scale(y):
    s = float(np.std(y))
    return s if s > 0 else 1.0


def theta_bounds(theta0, y, noise_floor=1e-6):
    n = theta0.size - 2
    sy = _target_scale(y)
    span = math.log(1e3)
    b = [(t - span, t + span) for t in theta0[:n]]
    b.append((math.log(1e-4 * sy), math.log(1e2 * sy)))
    b.append((math.log(noise_floor * sy), math.log(10.0 * sy)))
    return b


def fit_gpr(data, n_restarts=5, seed=0, noise_floor=1e-6, max_iter=300):
    """Maximize the marginal likelihood with L-BFGS-B from several starts.

    The first start is :func:`initial_theta`; the remaining ``n_restarts - 1``
    perturb it by seeded log-normal factors. The best optimum is kept.
    """
    X, y, ids = as_xy(data)
    m, n = X.shape
    if m < 5:
        raise RegressionError("GPR needs at least 5 samples")
    theta0 = initial_theta(X, y)
    bounds = theta_bounds(theta0, y, noise_floor)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    theta0 = np.clip(theta0, lo, hi)
    rng = np.random.default_rng(seed)
    starts = [theta0]
    for _ in range(max(1, n_restarts) - 1):
        starts.append(np.clip(theta0 + rng.normal(0.0, 1.0, theta0.size), lo, hi))

    def objective(t):
        try:
            lml, grad, _ = log_marginal_likelihood(t, X, y)
        except GprFitError:
            return 1e300, np.zeros_like(t)
        return -lml, -grad

    best = None
    for t0 in starts:
        res = optimize.minimize(objective, t0, jac=True, method="L-BFGS-B",
                                bounds=bounds, options={"maxiter": max_iter})
        if res.fun < 1e299 and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise GprFitError("every optimizer start failed to factorize the kernel")
    t = best.x
    return from_hyperparameters(X, y, np.exp(t[:n]), math.exp(t[n]), math.exp(t[n + 1]), ids)


def gpr_predict(model, X):
    """Posterior predictive mean and standard deviation (noise included)."""
    X = check_inputs(X, model.length_scales.size)
    Ks = kernels.ard_kernel(X, model.X_train, model.length_scales, model.signal_std ** 2)
    mean = model.basis_coefficient + Ks @ model.alpha
    V = linalg.solve_triangular(model.chol, Ks.T, lower=True, check_finite=False)
    var = model.signal_std ** 2 - np.einsum("ij,ij->j", V, V) + model.noise_std ** 2
    return mean, np.sqrt(np.maximum(var, 0.0))


def gpr_feature_weights(model):
    """``exp(-length_scale)`` per feature, normalized to sum to one."""
    z = -model.length_scales
    w = np.exp(z - z.max())
    return FeatureWeights(w / w.sum(), model.feature_ids, "gpr")

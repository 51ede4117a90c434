"""Target transforms and normal probability plot support."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LAMBDA_RANGE = (-5.0, 5.0)


class TransformError(ValueError):
    pass


def _positive(y):
    y = np.asarray(y, dtype=np.float64)
    if np.any(~(y > 0)):
        raise TransformError("transform requires strictly positive data")
    return y


def boxcox_apply(y, lam):
    """``(y**lam - 1) / lam``, or ``log(y)`` when ``lam == 0``."""
    logy = np.log(_positive(y))
    if lam == 0:
        return logy
    # log(y) * expm1(t) / t with t = lam * log(y); stays exact as lam -> 0
    return logy * _expm1_ratio(lam * logy)


def boxcox_invert(z, lam):
    z = np.asarray(z, dtype=np.float64)
    if lam == 0:
        return np.exp(z)
    base = lam * z
    if np.any(base <= -1):
        raise TransformError("value outside the range of the Box-Cox transform")
    return np.exp(z * _log1p_ratio(base))


def _expm1_ratio(t):
    t = np.asarray(t, dtype=np.float64)
    safe = np.where(t == 0, 1.0, t)
    return np.where(t == 0, 1.0, np.expm1(safe) / safe)


def _log1p_ratio(s):
    s = np.asarray(s, dtype=np.float64)
    safe = np.where(s == 0, 1.0, s)
    return np.where(s == 0, 1.0, np.log1p(safe) / safe)


def log_apply(y):
    return np.log(_positive(y))


def log_invert(z):
    return np.exp(np.asarray(z, dtype=np.float64))


def boxcox_loglik(y, lam):
    """Profile log-likelihood of ``lam`` (normal fit plus Jacobian term)."""
    y = _positive(y)
    z = boxcox_apply(y, lam)
    var = np.mean((z - z.mean()) ** 2)
    if var <= 0:
        return -np.inf
    return -0.5 * y.size * math.log(var) + (lam - 1.0) * float(np.sum(np.log(y)))


@dataclass(frozen=True)
class BoxCoxParams:
    lam: float
    loglik: float = float("nan")


def boxcox_optimize(y, grid_step=0.01, tol=1e-6):
    """Maximum-likelihood Box-Cox exponent on [-5, 5].

    A grid scan at ``grid_step`` brackets the maximum, then golden-section
    search refines it to ``tol``.
    """
    y = _positive(y)
    if y.size < 10:
        raise TransformError("Box-Cox fit needs at least 10 values")
    lo, hi = LAMBDA_RANGE
    grid = np.round(np.arange(lo, hi + grid_step / 2, grid_step), 12)
    ll = np.array([boxcox_loglik(y, g) for g in grid])
    k = int(np.argmax(ll))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, grid.size - 1)]
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = boxcox_loglik(y, c), boxcox_loglik(y, d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = boxcox_loglik(y, c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = boxcox_loglik(y, d)
    lam = 0.5 * (a + b)
    best = boxcox_loglik(y, lam)
    if ll[k] > best:
        lam, best = float(grid[k]), float(ll[k])
    return BoxCoxParams(float(lam), float(best))


@dataclass(frozen=True)
class TargetTransform:
    """Output transform applied before fitting and undone after predicting."""

    kind: str = "log"
    lam: float | None = None

    def __post_init__(self):
        if self.kind not in ("none", "log", "boxcox"):
            raise TransformError(f"unknown transform {self.kind!r}")

    @classmethod
    def fit(cls, kind, y):
        if kind == "boxcox":
            return cls("boxcox", boxcox_optimize(y).lam)
        return cls(kind)

    def forward(self, y):
        if self.kind == "none":
            return np.asarray(y, dtype=np.float64)
        if self.kind == "log":
            return log_apply(y)
        return boxcox_apply(y, self.lam)

    def inverse(self, z):
        if self.kind == "none":
            return np.asarray(z, dtype=np.float64)
        if self.kind == "log":
            return log_invert(z)
        lam = self.lam
        z = np.asarray(z, dtype=np.float64)
        # predictions can stray outside the transform's range; clamp to it
        if lam > 0:
            z = np.maximum(z, (-1.0 + 1e-12) / lam)
        elif lam < 0:
            z = np.minimum(z, (-1.0 + 1e-12) / lam)
        return boxcox_invert(z, lam)

    def to_dict(self):
        return {"kind": self.kind, "lambda": self.lam}

    @classmethod
    def from_dict(cls, d):
        return cls(d["kind"], d.get("lambda"))


def filliben_medians(m):
    """Uniform order-statistic medians (Filliben approximation)."""
    if m < 2:
        raise TransformError("need at least 2 order statistics")
    last = 0.5 ** (1.0 / m)
    i = np.arange(1, m + 1, dtype=np.float64)
    med = (i - 0.3175) / (m + 0.365)
    med[0] = 1.0 - last
    med[-1] = last
    return med


# Acklam's rational approximation to the normal quantile (relative error
# below 1.15e-9), followed by one Halley step against math.erfc.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _ndtri_scalar(p):
    if not 0.0 < p < 1.0:
        if p == 0.0:
            return -math.inf
        if p == 1.0:
            return math.inf
        raise TransformError(f"probability {p} outside [0, 1]")
    if p > 0.5:
        # 1 - p is exact here; the refinement below is only accurate for p <= 0.5
        return -_ndtri_scalar(1.0 - p)
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = ((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
             / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    elif p <= 1.0 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = ((((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
             / (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0))
    else:
        q = math.sqrt(-2.0 * math.log1p(-p))
        x = -((((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5])
              / ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0))
    e = 0.5 * math.erfc(-x / math.sqrt(2.0)) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


def norm_ppf(p):
    """Standard normal quantile function."""
    p = np.asarray(p, dtype=np.float64)
    out = np.array([_ndtri_scalar(float(v)) for v in p.ravel()])
    return out.reshape(p.shape) if p.ndim else float(out[0])


@dataclass(frozen=True)
class ProbabilityPlotData:
    theoretical_quantiles: np.ndarray
    sorted_values: np.ndarray

    def correlation(self):
        q, v = self.theoretical_quantiles, self.sorted_values
        if np.ptp(v) == 0:
            return float("nan")
        return float(np.corrcoef(q, v)[0, 1])

    def write_csv(self, path):
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["theoretical_quantile", "sample_value"])
            for q, v in zip(self.theoretical_quantiles, self.sorted_values):
                w.writerow([repr(float(q)), repr(float(v))])


def probability_plot(y):
    """Sorted sample paired with normal quantiles of the Filliben medians."""
    y = np.sort(np.asarray(y, dtype=np.float64).ravel())
    if y.size < 2:
        raise TransformError("probability plot needs at least 2 values")
    return ProbabilityPlotData(norm_ppf(filliben_medians(y.size)), y)

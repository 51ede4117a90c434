"""Test-set error metrics and their aggregation over repeated trials."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

METRIC_NAMES = ("mae", "rmse", "relrmse", "r2", "prediction_accuracy")


class MetricError(ValueError):
    pass


def _pair(pred, actual):
    pred = np.asarray(pred, dtype=np.float64).ravel()
    actual = np.asarray(actual, dtype=np.float64).ravel()
    if pred.shape != actual.shape:
        raise MetricError("pred and actual lengths differ")
    if pred.size < 2:
        raise MetricError("metrics need at least 2 samples")
    return pred, actual


def mae(pred, actual):
    pred, actual = _pair(pred, actual)
    return float(np.mean(np.abs(pred - actual)))


def rmse(pred, actual):
    pred, actual = _pair(pred, actual)
    return float(math.sqrt(np.mean((pred - actual) ** 2)))


def relrmse(pred, actual):
    """RMSE divided by the mean prediction."""
    pred, actual = _pair(pred, actual)
    mean_pred = float(np.mean(pred))
    if mean_pred == 0:
        raise MetricError("relrmse undefined: mean prediction is zero")
    return rmse(pred, actual) / mean_pred


def r2(pred, actual):
    """Squared Pearson correlation between predictions and actual values."""
    pred, actual = _pair(pred, actual)
    dp = pred - pred.mean()
    da = actual - actual.mean()
    spp = float(dp @ dp)
    saa = float(da @ da)
    if spp == 0 or saa == 0:
        raise MetricError("undefined correlation: constant sequence")
    spa = float(dp @ da)
    # no square roots, so identical sequences give exactly 1
    return min(spa * spa / (spp * saa), 1.0)


def r2_sse(pred, actual):
    """``1 - SSE/SST``; diagnostic only, can be negative."""
    pred, actual = _pair(pred, actual)
    sst = float(np.sum((actual - actual.mean()) ** 2))
    if sst == 0:
        raise MetricError("undefined: constant actual values")
    return 1.0 - float(np.sum((pred - actual) ** 2)) / sst


def prediction_accuracy(pred, actual):
    """Mean of pointwise predicted/actual ratios."""
    pred, actual = _pair(pred, actual)
    zero = np.flatnonzero(actual == 0)
    if zero.size:
        raise MetricError(f"actual value is zero at index {int(zero[0])}")
    return float(np.mean(pred / actual))


@dataclass(frozen=True)
class MetricsReport:
    mae: float
    rmse: float
    relrmse: float
    r2: float
    prediction_accuracy: float
    n: int

    def to_dict(self):
        return asdict(self)


def evaluate(pred, actual, constant_r2=None):
    """All five metrics.

    ``constant_r2`` replaces the undefined R² of a constant prediction
    vector (None keeps it an error).
    """
    pv = np.asarray(pred, dtype=np.float64)
    if constant_r2 is not None and pv.size and np.all(pv == pv.flat[0]):
        score = float(constant_r2)
    else:
        score = r2(pred, actual)
    return MetricsReport(
        mae=mae(pred, actual),
        rmse=rmse(pred, actual),
        relrmse=relrmse(pred, actual),
        r2=score,
        prediction_accuracy=prediction_accuracy(pred, actual),
        n=int(np.asarray(actual).size),
    )


def aggregate(reports):
    """Mean, sample std and extrema of every metric across trial reports.

    With a single report the std is reported as 0 and ``std_defined`` is
    False.
    """
    reports = list(reports)
    if not reports:
        raise MetricError("nothing to aggregate")
    out = {"trials": len(reports), "std_defined": len(reports) > 1}
    for name in METRIC_NAMES:
        v = np.array([getattr(r, name) for r in reports])
        out[name] = {
            "mean": float(v.mean()),
            "std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
            "min": float(v.min()),
            "min_trial": int(np.argmin(v)),
            "max": float(v.max()),
            "max_trial": int(np.argmax(v)),
        }
    out["best_r2_trial"] = out["r2"]["max_trial"]
    return out


def box_stats(values, whisker=1.5):
    """Box-chart statistics with linearly interpolated quartiles.

    Whiskers end at the most extreme points within ``whisker * IQR`` of the
    quartiles; points beyond are outliers.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 4:
        raise MetricError("box statistics need at least 4 values")
    q25, med, q75 = np.quantile(v, [0.25, 0.5, 0.75], method="linear")
    iqr = q75 - q25
    lo_fence = q25 - whisker * iqr
    hi_fence = q75 + whisker * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    outliers = np.sort(v[(v < lo_fence) | (v > hi_fence)])
    return {
        "median": float(med),
        "q25": float(q25),
        "q75": float(q75),
        "whisker_lo": float(inside.min()),
        "whisker_hi": float(inside.max()),
        "outliers": [float(x) for x in outliers],
        "mean": float(v.mean()),
        "std": float(v.std(ddof=1)),
        "n": int(v.size),
    }

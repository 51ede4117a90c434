"""Feature ranking, ranked forward-addition curves and backward elimination.

Every subset is scored over the same seeded trials (common random numbers),
so differences between subsets are not masked by split-to-split variance.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager, nullcontext
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import regress
from .trials import TrialConfig, run_trials


class SelectionError(RuntimeError):
    pass


@dataclass(frozen=True)
class FeatureRanking:
    feature_ids: tuple
    mean_weights: np.ndarray
    order: tuple
    trial_weights: np.ndarray = field(repr=False)
    trials: int = 0
    method: str = ""

    def to_dict(self):
        return {
            "method": self.method,
            "trials": self.trials,
            "order": list(self.order),
            "mean_weights": {f: float(w) for f, w in zip(self.feature_ids, self.mean_weights)},
        }


@dataclass(frozen=True)
class CurvePoint:
    size: int
    features: tuple
    mean_r2: float
    mean_relrmse: float


@dataclass
class SelectionCurve:
    kind: str
    method: str
    points: list
    trace: list = field(default_factory=list)

    def __post_init__(self):
        self.points = sorted(self.points, key=lambda p: p.size)
        sizes = [p.size for p in self.points]
        if len(set(sizes)) != len(sizes):
            raise SelectionError("curve sizes must be distinct")

    def point(self, size):
        for p in self.points:
            if p.size == size:
                return p
        raise KeyError(size)


@contextmanager
def worker_pool(n_jobs):
    if n_jobs and n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            yield ex
    else:
        with nullcontext():
            yield None


def _require_weighted(method):
    method = regress.normalize_method(method)
    if method not in regress.WEIGHTED_METHODS:
        raise SelectionError("linear methods are not assessed in terms of feature weights; "
                             f"use one of {regress.WEIGHTED_METHODS}")
    return method


def _config(method, config):
    base = config or TrialConfig(method=method)
    return replace(base, method=method)


def _run(data, trials, seed, config, executor, label):
    results = run_trials(data, trials, seed, config, executor=executor)
    for r in results:
        if not r.ok:
            raise SelectionError(f"trial {r.index} failed ({label}): {r.error}")
    return results


def evaluate_subset(data, features, method, trials, seed, config=None, executor=None):
    """Mean R² and mean RELRMSE of ``features`` over the seeded trials."""
    cfg = _config(regress.normalize_method(method), config)
    results = _run(data.columns(features), trials, seed, cfg, executor,
                   f"subset {list(features)}")
    r2 = float(np.mean([r.report.r2 for r in results]))
    rel = float(np.mean([r.report.relrmse for r in results]))
    return r2, rel


def rank_features(data, method="gpr", trials=100, seed=0, config=None, n_jobs=1, executor=None):
    """Average normalized feature weights over seeded trials and rank them.

    Ties in mean weight go to the feature listed first.
    """
    method = _require_weighted(method)
    cfg = _config(method, config)
    with (nullcontext(executor) if executor is not None else worker_pool(n_jobs)) as ex:
        results = _run(data, trials, seed, cfg, ex, "ranking")
    W = np.vstack([r.weights for r in results])
    mean = W.sum(axis=0) / W.shape[0]
    order = np.argsort(-mean, kind="stable")
    ids = tuple(data.feature_ids)
    return FeatureRanking(ids, mean, tuple(ids[i] for i in order), W, trials, method)


def _in_data_order(data, subset):
    keep = set(subset)
    return tuple(f for f in data.feature_ids if f in keep)


def forward_add_curve(data, ranking, method="gpr", trials=100, seed=0, config=None,
                      n_jobs=1, executor=None):
    """Score the top-k ranked features for k = 1..n.

    Each subset keeps the dataset's column order, so the k = n point is the
    full-feature evaluation with identical seeds.
    """
    method = regress.normalize_method(method)
    if set(ranking.order) != set(data.feature_ids):
        raise SelectionError("ranking does not cover the dataset's features")
    points = []
    with (nullcontext(executor) if executor is not None else worker_pool(n_jobs)) as ex:
        for k in range(1, len(ranking.order) + 1):
            subset = _in_data_order(data, ranking.order[:k])
            r2, rel = evaluate_subset(data, subset, method, trials, seed, config, ex)
            points.append(CurvePoint(k, subset, r2, rel))
    return SelectionCurve("forward", method, points)


def _better(a, b):
    """Removal candidate ordering: higher R², then lower RELRMSE, then later feature."""
    if a["mean_r2"] != b["mean_r2"]:
        return a["mean_r2"] > b["mean_r2"]
    if a["mean_relrmse"] != b["mean_relrmse"]:
        return a["mean_relrmse"] < b["mean_relrmse"]
    return a["position"] > b["position"]


def backward_eliminate(data, method="gpr", trials=1000, seed=0, config=None, n_jobs=1,
                       executor=None):
    """Greedy sequential backward elimination down to a single feature.

    Hyperparameters are re-fitted for every candidate subset.
    """
    method = regress.normalize_method(method)
    remaining = list(data.feature_ids)
    if len(remaining) < 2:
        raise SelectionError("backward elimination needs at least 2 features")
    position = {f: i for i, f in enumerate(data.feature_ids)}
    trace = []
    with (nullcontext(executor) if executor is not None else worker_pool(n_jobs)) as ex:
        r2, rel = evaluate_subset(data, remaining, method, trials, seed, config, ex)
        points = [CurvePoint(len(remaining), tuple(remaining), r2, rel)]
        while len(remaining) > 1:
            candidates = []
            for f in remaining:
                subset = tuple(g for g in remaining if g != f)
                r2, rel = evaluate_subset(data, subset, method, trials, seed, config, ex)
                candidates.append({"feature": f, "position": position[f],
                                   "mean_r2": r2, "mean_relrmse": rel})
            best = candidates[0]
            for c in candidates[1:]:
                if _better(c, best):
                    best = c
            remaining.remove(best["feature"])
            points.append(CurvePoint(len(remaining), tuple(remaining), best["mean_r2"],
                                     best["mean_relrmse"]))
            trace.append({
                "step": len(trace) + 1,
                "removed": best["feature"],
                "remaining": list(remaining),
                "mean_r2": best["mean_r2"],
                "mean_relrmse": best["mean_relrmse"],
                "candidates": [{k: c[k] for k in ("feature", "mean_r2", "mean_relrmse")}
                               for c in candidates],
            })
    return SelectionCurve("sbe", method, points, trace)


def select_best_subset(curve, tolerance=0.005):
    """Smallest subset whose mean R² is within ``tolerance`` of the curve maximum."""
    if not curve.points:
        raise SelectionError("empty curve")
    if tolerance < 0:
        raise SelectionError("tolerance must be non-negative")
    scores = np.array([p.mean_r2 for p in curve.points])
    finite = scores[np.isfinite(scores)]
    if finite.size == 0:
        raise SelectionError("no finite scores on the curve")
    top = float(finite.max())
    for p in curve.points:
        if np.isfinite(p.mean_r2) and p.mean_r2 >= top - tolerance:
            return p.features
    return curve.points[-1].features  # unreachable: the maximum itself qualifies


def removal_order(curve):
    return [step["removed"] for step in curve.trace]


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------

def write_heatmap(path, ranking):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", *ranking.feature_ids])
        for i, row in enumerate(ranking.trial_weights):
            w.writerow([i, *(repr(float(v)) for v in row)])


def write_curve(path, curve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "mean_R2", "mean_RELRMSE", "features"])
        for p in curve.points:
            w.writerow([p.size, repr(p.mean_r2), repr(p.mean_relrmse), ";".join(p.features)])


def write_sbe_trace(path, curve):
    doc = {"method": curve.method, "removal_order": removal_order(curve), "steps": curve.trace}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

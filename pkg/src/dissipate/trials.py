"""Seeded train/test trials: split, scale, transform, fit, predict, score.

Every trial derives its seed from the master seed and its index, so trials
can run in any order or in worker processes and still give identical
results. BLAS threads are pinned to one per trial for the same reason.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial

import numpy as np
from threadpoolctl import threadpool_limits

from . import regress
from .dataset import DesignMatrix, fit_scaler, scale_array, split_indices
from .metrics import MetricsReport, aggregate, evaluate
from .transform import TargetTransform

SEED_STRIDE = 2 ** 32
TRANSFORM_FITS = ("per-trial", "global")


def trial_seed(master_seed, index):
    """Per-trial seed; injective over ``index < 2**32`` for a fixed master."""
    if master_seed < 0 or index < 0:
        raise ValueError("seeds and trial indices must be non-negative")
    if index >= SEED_STRIDE:
        raise ValueError("trial index out of range")
    return int(master_seed) * SEED_STRIDE + int(index)


@dataclass(frozen=True)
class TrialConfig:
    method: str = "gpr"
    transform: str = "log"
    transform_fit: str = "per-trial"
    train_fraction: float = 0.8
    fit_options: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "method", regress.normalize_method(self.method))
        if self.transform not in ("none", "log", "boxcox"):
            raise ValueError(f"unknown transform {self.transform!r}")
        if self.transform_fit not in TRANSFORM_FITS:
            raise ValueError(f"transform_fit must be one of {TRANSFORM_FITS}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")


@dataclass
class TrialResult:
    index: int
    seed: int
    test_rows: np.ndarray
    predicted: np.ndarray | None = None
    report: MetricsReport | None = None
    weights: np.ndarray | None = None
    error: str | None = None
    model: object = None
    scaler: object = None
    transform: object = None

    @property
    def ok(self):
        return self.error is None


def global_transform(data, config):
    """Transform fitted once on all targets (only used with ``transform_fit='global'``)."""
    if config.transform_fit != "global":
        return None
    return TargetTransform.fit(config.transform, data.y)


def run_trial(data, index, master_seed, config, fixed_transform=None, keep_model=False):
    """One trial; failures are captured in ``TrialResult.error``."""
    seed = trial_seed(master_seed, index)
    tr, te = split_indices(data.X.shape[0], seed, config.train_fraction)
    out = TrialResult(index, seed, te)
    try:
        with threadpool_limits(1):
            Xtr, ytr = data.X[tr], data.y[tr]
            scaler = fit_scaler(DesignMatrix(Xtr, ytr, data.feature_ids))
            tf = fixed_transform or TargetTransform.fit(config.transform, ytr)
            train = DesignMatrix(scale_array(Xtr, scaler), tf.forward(ytr), data.feature_ids)
            model = regress.fit(config.method, train, seed=seed, **config.fit_options)
            pred = tf.inverse(model.predict(scale_array(data.X[te], scaler)))
            out.predicted = pred
            out.report = evaluate(pred, data.y[te], constant_r2=0.0)
            if config.method in regress.WEIGHTED_METHODS:
                out.weights = model.feature_weights().weights
            if keep_model:
                out.model, out.scaler, out.transform = model, scaler, tf
    except Exception as exc:  # recorded, counted against the failure budget
        out.error = f"{type(exc).__name__}: {exc}"
    return out


def _run_chunk(indices, data, master_seed, config, fixed):
    return [run_trial(data, i, master_seed, config, fixed) for i in indices]


def run_trials(data, trials, master_seed, config, n_jobs=1, executor=None):
    """Run trials ``0 .. trials-1``; results are ordered by index.

    ``n_jobs > 1`` (or a supplied ``executor``) distributes contiguous
    chunks of trial indices over worker processes.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    fixed = global_transform(data, config)
    if executor is None and n_jobs <= 1:
        return _run_chunk(range(trials), data, master_seed, config, fixed)
    jobs = n_jobs if executor is None else getattr(executor, "_max_workers", n_jobs)
    chunks = [c.tolist() for c in np.array_split(np.arange(trials), max(1, 4 * jobs)) if c.size]
    fn = partial(_run_chunk, data=data, master_seed=master_seed, config=config, fixed=fixed)
    if executor is not None:
        parts = list(executor.map(fn, chunks))
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as ex:
            parts = list(ex.map(fn, chunks))
    return [r for part in parts for r in part]


def resolve_jobs(n_jobs):
    """``0`` or negative means one worker per available CPU."""
    if n_jobs is None:
        return 1
    n_jobs = int(n_jobs)
    return n_jobs if n_jobs > 0 else max(1, os.cpu_count() or 1)


def summarize(results):
    """Aggregate metrics over successful trials plus failure bookkeeping."""
    good = [r for r in results if r.ok]
    failed = [{"index": r.index, "error": r.error} for r in results if not r.ok]
    summary = {"trials": len(results), "failed": failed,
               "failure_rate": len(failed) / len(results) if results else 0.0}
    if good:
        agg = aggregate([r.report for r in good])
        # aggregate() indexes into the list it was given; map back to trial ids
        ids = [r.index for r in good]
        for name, stats in agg.items():
            if isinstance(stats, dict):
                for key in ("min_trial", "max_trial"):
                    if key in stats:
                        stats[key] = ids[stats[key]]
        if "best_r2_trial" in agg:
            agg["best_r2_trial"] = ids[agg["best_r2_trial"]]
        summary["metrics"] = agg
    return summary


def mean_metric(results, name):
    vals = [getattr(r.report, name) for r in results if r.ok]
    return float(np.mean(vals)) if vals else float("nan")

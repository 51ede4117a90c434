"""End-to-end runs from CSV inputs to report artifacts.

Each ``cmd_*`` function takes a :class:`RunConfig`, writes its artifacts
into ``config.out`` and returns an exit status (0 success, 3 when too many
trials failed). Invalid input raises :class:`ConfigError` or one of the
module errors, which the CLI maps to status 2.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels, regress
from .dataset import (FAILURE_MODES, FEATURE_BY_ID, FEATURE_IDS, BoundsWarning, DatasetError,
                      ScalingParams, design_matrix, load_specimens, resolve_feature, scale_array)
from .hysteresis import HysteresisError, energy_report, read_curve_csv
from .metrics import MetricError, box_stats, evaluate
from .select import (backward_eliminate, forward_add_curve, rank_features, select_best_subset,
                     worker_pool, write_curve, write_heatmap, write_sbe_trace)
from .transform import TargetTransform
from .trials import TrialConfig, run_trial, run_trials, summarize

log = logging.getLogger(__name__)

MODEL_FORMAT = "dissipate-model"
MODEL_VERSION = 1
SELECTION_MODES = ("all", "ranked-forward", "sbe", "explicit")
EXIT_OK, EXIT_INVALID, EXIT_TRIALS = 0, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    db: str | None = None
    curves: str | None = None
    heights: str | None = None
    height: float | None = None
    model: str | None = None
    specimens: str | None = None
    predictions: str | None = None
    method: str = "gpr"
    transform: str = "log"
    transform_fit: str = "per-trial"
    trials: int = 1000
    rank_trials: int = 100
    seed: int = 0
    features: list | None = None
    selection: str = "all"
    tolerance: float = 0.005
    train_fraction: float = 0.8
    fit_options: dict = field(default_factory=dict)
    failure_threshold: float = 0.01
    n_jobs: int = 1
    out: str = "out"

    # fields that must not change any artifact byte
    RUNTIME_ONLY = ("out", "n_jobs")

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config key(s): {unknown}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(doc)

    def canonical(self):
        d = dataclasses.asdict(self)
        for k in self.RUNTIME_ONLY:
            d.pop(k)
        return d

    def digest(self):
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def trial_config(self, method=None):
        try:
            return TrialConfig(method=method or self.method, transform=self.transform,
                               transform_fit=self.transform_fit,
                               train_fraction=self.train_fraction,
                               fit_options=dict(self.fit_options))
        except (ValueError, regress.RegressionError) as exc:
            raise ConfigError(str(exc)) from None

    def feature_ids(self):
        if self.features is None:
            return FEATURE_IDS
        try:
            ids = tuple(resolve_feature(f) for f in self.features)
        except DatasetError as exc:
            raise ConfigError(str(exc)) from None
        if len(set(ids)) != len(ids) or not ids:
            raise ConfigError("feature list must be non-empty without duplicates")
        return ids

    def validate(self, *required):
        if int(self.trials) < 1 or int(self.rank_trials) < 1:
            raise ConfigError("trials must be >= 1")
        if int(self.seed) < 0:
            raise ConfigError("seed must be non-negative")
        if self.selection not in SELECTION_MODES:
            raise ConfigError(f"selection must be one of {SELECTION_MODES}")
        if self.selection == "explicit" and not self.features:
            raise ConfigError("explicit selection needs a feature list")
        if not 0 <= self.failure_threshold < 1:
            raise ConfigError("failure_threshold must be in [0, 1)")
        for name in required:
            value = getattr(self, name)
            if value is None:
                raise ConfigError(f"missing required input '{name}'")
            if not Path(value).exists():
                raise ConfigError(f"{name} path does not exist: {value}")
        self.trial_config()
        self.feature_ids()


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _dump(path, obj, sort_keys=True):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=sort_keys, allow_nan=True) + "\n")


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_manifest(out, config, files):
    _dump(out / "manifest.json", {
        "code_version": __version__,
        "config_sha256": config.digest(),
        "seed": int(config.seed),
        "kernel_backend": kernels.BACKEND,
        "files": {f: _sha256(out / f) for f in sorted(files)},
    })


def _outdir(config):
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_db(config):
    specimens = load_specimens(config.db)
    if len({s.id for s in specimens}) != len(specimens):
        raise DatasetError(f"{config.db}: duplicate specimen ids")
    return specimens


def model_document(model, scaler, transform, train_digest):
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "code_version": __version__,
        "method": model.method,
        "feature_ids": list(model.feature_ids),
        "scaler": scaler.to_dict(),
        "transform": transform.to_dict(),
        "train_digest": train_digest,
        "model": regress.model_to_dict(model),
    }


def load_model(path):
    """Read a model document; returns ``(model, scaler, transform, doc)``."""
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read model {path}: {exc}") from None
    if doc.get("format") != MODEL_FORMAT:
        raise ConfigError(f"{path}: not a {MODEL_FORMAT} document")
    if doc.get("version") != MODEL_VERSION:
        raise ConfigError(f"{path}: unsupported model version {doc.get('version')!r}")
    model = regress.model_from_dict(doc["model"])
    return model, ScalingParams.from_dict(doc["scaler"]), TargetTransform.from_dict(
        doc["transform"]), doc


# ---------------------------------------------------------------------------
# energy
# ---------------------------------------------------------------------------

def _read_heights(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if not {"id", "hw_mm"} <= set(reader.fieldnames or []):
            raise ConfigError(f"{path}: heights source needs 'id' and 'hw_mm' columns")
        out = {}
        for rowno, row in enumerate(reader, start=2):
            try:
                out[row["id"].strip()] = float(row["hw_mm"])
            except ValueError:
                raise ConfigError(f"{path}: row {rowno}: bad hw_mm {row['hw_mm']!r}") from None
    return out


def cmd_energy(config):
    """NCDE per curve file in ``config.curves`` (one ``<id>.csv`` per specimen).

    Wall heights come from ``config.heights`` (any CSV with ``id`` and
    ``hw_mm``, e.g. ``walls.csv``) or the single ``config.height``.
    Unreadable files are reported and the run continues; the status is 2 if
    any file failed.
    """
    config.validate("curves")
    curves = Path(config.curves)
    files = sorted(curves.glob("*.csv")) if curves.is_dir() else [curves]
    if not files:
        raise ConfigError(f"no curve files in {curves}")
    if config.heights is None and config.height is None:
        raise ConfigError("need a heights source or a single height")
    heights = _read_heights(config.heights) if config.heights else {}
    out = _outdir(config)
    cycles_dir = out / "cycles"
    cycles_dir.mkdir(exist_ok=True)
    rows, errors = [], []
    for path in files:
        sid = path.stem
        try:
            h = heights.get(sid, config.height)
            if h is None:
                raise ConfigError(f"no wall height for specimen {sid!r}")
            report = energy_report(read_curve_csv(path, float(h), sid))
        except (HysteresisError, ConfigError, OSError) as exc:
            errors.append({"file": path.name, "error": str(exc)})
            log.warning("skipping %s: %s", path.name, exc)
            continue
        _dump(cycles_dir / f"{sid}.json", report.to_dict())
        rows.append([sid, report.cycle_count, repr(report.total_energy),
                     repr(report.total_drift), repr(report.ncde), int(report.has_partial)])
    with open(out / "energy.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "cycle_count", "total_energy_kNmm", "total_drift_pct", "ncde",
                    "has_partial"])
        w.writerows(rows)
    _dump(out / "energy_errors.json", errors)
    return EXIT_INVALID if errors else EXIT_OK


# ---------------------------------------------------------------------------
# evaluate / select
# ---------------------------------------------------------------------------

def _selected_features(config, specimens, out, executor):
    mode = config.selection
    if mode == "all":
        return config.feature_ids()
    if mode == "explicit":
        return config.feature_ids()
    return _run_selection(config, specimens, out, executor)["features"]


def _run_selection(config, specimens, out, executor):
    method = regress.normalize_method(config.method)
    if method not in regress.WEIGHTED_METHODS:
        raise ConfigError("linear methods are not assessed in terms of feature weights; "
                          "choose nca or gpr for selection")
    data = design_matrix(specimens, config.feature_ids())
    cfg = config.trial_config()
    seed = int(config.seed)
    doc = {"mode": config.selection, "method": method, "tolerance": config.tolerance}
    if config.selection == "ranked-forward":
        ranking = rank_features(data, method, int(config.rank_trials), seed, cfg,
                                executor=executor)
        write_heatmap(out / "weights_heatmap.csv", ranking)
        _dump(out / "ranking.json", ranking.to_dict())
        curve = forward_add_curve(data, ranking, method, int(config.trials), seed, cfg,
                                  executor=executor)
    else:
        curve = backward_eliminate(data, method, int(config.trials), seed, cfg,
                                   executor=executor)
        write_sbe_trace(out / "sbe_trace.json", curve)
    write_curve(out / "curve.csv", curve)
    chosen = select_best_subset(curve, config.tolerance)
    doc["features"] = list(chosen)
    doc["mean_r2"] = next(p.mean_r2 for p in curve.points if p.features == chosen)
    _dump(out / "selected.json", doc)
    return doc


def cmd_select(config):
    """Rank/eliminate features and pick the smallest near-best subset."""
    config.validate("db")
    if config.selection == "all":
        config = dataclasses.replace(config, selection="sbe")
    if regress.normalize_method(config.method) not in regress.WEIGHTED_METHODS:
        raise ConfigError("linear methods are not assessed in terms of feature weights; "
                          "choose nca or gpr for selection")
    specimens = _load_db(config)
    out = _outdir(config)
    if config.selection == "explicit":
        doc = {"mode": "explicit", "method": config.method,
               "features": list(config.feature_ids())}
        _dump(out / "selected.json", doc)
        files = ["selected.json"]
    else:
        with worker_pool(config.n_jobs) as ex:
            _run_selection(config, specimens, out, ex)
        files = ["selected.json", "curve.csv"] + (
            ["weights_heatmap.csv", "ranking.json"] if config.selection == "ranked-forward"
            else ["sbe_trace.json"])
    _write_manifest(out, config, files)
    return EXIT_OK


def _write_scatter(path, specimens_by_row, actual, predicted):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "failure_mode", "actual_ncde", "predicted_ncde", "ratio"])
        for s, a, p in zip(specimens_by_row, actual, predicted):
            w.writerow([s.id, s.failure_mode or "", repr(float(a)), repr(float(p)),
                        repr(float(p / a))])


def _write_trials(path, results):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "seed", "mae", "rmse", "relrmse", "r2", "prediction_accuracy",
                    "error"])
        for r in results:
            if r.ok:
                m = r.report
                w.writerow([r.index, r.seed, repr(m.mae), repr(m.rmse), repr(m.relrmse),
                            repr(m.r2), repr(m.prediction_accuracy), ""])
            else:
                w.writerow([r.index, r.seed, "", "", "", "", "", r.error])


def cmd_evaluate(config):
    """Repeated seeded train/test evaluation with artifacts for the best trial."""
    config.validate("db")
    specimens = _load_db(config)
    out = _outdir(config)
    cfg = config.trial_config()
    seed = int(config.seed)
    files = []
    with worker_pool(config.n_jobs) as ex:
        features = _selected_features(config, specimens, out, ex)
        if config.selection in ("ranked-forward", "sbe"):
            files += ["selected.json", "curve.csv"] + (
                ["weights_heatmap.csv", "ranking.json"]
                if config.selection == "ranked-forward" else ["sbe_trace.json"])
        data = design_matrix(specimens, features)
        results = run_trials(data, int(config.trials), seed, cfg, executor=ex)
    summary = summarize(results)
    summary.update({
        "method": cfg.method,
        "transform": cfg.transform,
        "transform_fit": cfg.transform_fit,
        "seed": seed,
        "features": list(features),
        "n_specimens": len(specimens),
    })
    _write_trials(out / "trials.csv", results)
    files.append("trials.csv")
    if "metrics" in summary:
        best = summary["metrics"]["best_r2_trial"]
        rerun = run_trial(data, best, seed, cfg, keep_model=True)
        tr_rows = np.setdiff1d(np.arange(len(specimens)), rerun.test_rows)
        doc = model_document(rerun.model, rerun.scaler, rerun.transform,
                             data.rows(tr_rows).digest())
        _dump(out / "best_model.json", doc)
        actual = data.y[rerun.test_rows]
        _write_scatter(out / "scatter.csv", [specimens[i] for i in rerun.test_rows], actual,
                       rerun.predicted)
        ratios = rerun.predicted / actual
        try:
            stats = {"trial": best, **box_stats(ratios)}
        except MetricError as exc:
            stats = {"trial": best, "error": str(exc)}
        _dump(out / "box_stats.json", stats)
        summary["best_trial"] = {"index": best, "seed": rerun.seed,
                                 "metrics": dataclasses.asdict(rerun.report)}
        files += ["best_model.json", "scatter.csv", "box_stats.json"]
    _dump(out / "summary.json", summary)
    files.append("summary.json")
    _write_manifest(out, config, files)
    if summary["failure_rate"] > config.failure_threshold:
        log.error("%d of %d trials failed", len(summary["failed"]), summary["trials"])
        return EXIT_TRIALS
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict / stratify
# ---------------------------------------------------------------------------

def _column_for(fid):
    f = FEATURE_BY_ID.get(fid)
    return f.column if f else fid


def _read_feature_rows(path, feature_ids):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        if "id" not in cols:
            raise DatasetError(f"{path}: missing column 'id'")
        for fid in feature_ids:
            if _column_for(fid) not in cols:
                raise DatasetError(f"{path}: missing feature column {_column_for(fid)!r}")
        ids, X, actual, modes = [], [], [], []
        for rowno, row in enumerate(reader, start=2):
            ids.append(row["id"].strip())
            vals = []
            for fid in feature_ids:
                cell = (row[_column_for(fid)] or "").strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise DatasetError(f"{path}: row {rowno}: non-numeric "
                                       f"{_column_for(fid)}={cell!r}") from None
                if not math.isfinite(v):
                    raise DatasetError(f"{path}: row {rowno}: non-finite {_column_for(fid)}")
                vals.append(v)
            X.append(vals)
            a = (row.get("ncde") or "").strip()
            actual.append(float(a) if a else float("nan"))
            modes.append((row.get("failure_mode") or "").strip())
    if not ids:
        raise DatasetError(f"{path}: no rows")
    return ids, np.array(X, dtype=np.float64), np.array(actual), modes


def predict_rows(model, scaler, transform, X):
    """Back-transformed predictions and (GPR only) std on the model scale."""
    Z = scale_array(X, scaler)
    if isinstance(model, regress.GprModel):
        mean, std = regress.gpr_predict(model, Z)
        return transform.inverse(mean), std
    return transform.inverse(model.predict(Z)), None


def cmd_predict(config):
    """Predict NCDE for every row of ``config.specimens`` with ``config.model``."""
    config.validate("model", "specimens")
    model, scaler, tf, _ = load_model(config.model)
    ids, X, actual, modes = _read_feature_rows(config.specimens, scaler.feature_ids)
    Z = scale_array(X, scaler)
    for j, fid in enumerate(scaler.feature_ids):
        bad = np.flatnonzero(np.abs(Z[:, j]) > 1.0 + 1e-9)
        if bad.size:
            warnings.warn(f"{fid}: {bad.size} row(s) outside the training range "
                          f"(first: {ids[bad[0]]})", BoundsWarning)
    pred, std = predict_rows(model, scaler, tf, X)
    out = _outdir(config)
    with open(out / "predictions.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        head = ["id", "failure_mode", "predicted_ncde"]
        if std is not None:
            head.append("predictive_std_transformed")
        head += ["actual_ncde", "ratio"]
        w.writerow(head)
        for i, sid in enumerate(ids):
            row = [sid, modes[i], repr(float(pred[i]))]
            if std is not None:
                row.append(repr(float(std[i])))
            if np.isfinite(actual[i]):
                row += [repr(float(actual[i])), repr(float(pred[i] / actual[i]))]
            else:
                row += ["", ""]
            w.writerow(row)
    return EXIT_OK


def cmd_stratify(config):
    """Metrics per failure mode for a predictions/scatter CSV.

    Modes missing from the predictions file are looked up in ``config.db``
    when given. Rows without any mode form the ``unassigned`` group.
    """
    config.validate("predictions")
    lookup = {}
    if config.db:
        lookup = {s.id: s.failure_mode for s in _load_db(config)}
    groups = {}
    with open(config.predictions, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = set(reader.fieldnames or [])
        for need in ("id", "actual_ncde", "predicted_ncde"):
            if need not in cols:
                raise DatasetError(f"{config.predictions}: missing column {need!r}")
        for row in reader:
            if not (row["actual_ncde"] or "").strip():
                continue
            mode = (row.get("failure_mode") or "").strip() or lookup.get(row["id"].strip())
            key = mode if mode else "unassigned"
            groups.setdefault(key, ([], []))
            groups[key][0].append(float(row["actual_ncde"]))
            groups[key][1].append(float(row["predicted_ncde"]))
    order = [m for m in FAILURE_MODES if m in groups] + sorted(
        k for k in groups if k not in FAILURE_MODES)
    report = {}
    for key in order:
        actual, pred = groups[key]
        entry = {"n": len(actual)}
        try:
            entry["metrics"] = dataclasses.asdict(evaluate(pred, actual))
        except MetricError as exc:
            entry["error"] = str(exc)
        report[key] = entry
    out = _outdir(config)
    # group order is meaningful (shear to flexure), keep it
    _dump(out / "stratified.json", report, sort_keys=False)
    return EXIT_OK


COMMANDS = {
    "energy": cmd_energy,
    "evaluate": cmd_evaluate,
    "select": cmd_select,
    "predict": cmd_predict,
    "stratify": cmd_stratify,
}

"""Wall specimen schema, CSV ingestion, min-max scaling and seeded splits."""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np


class DatasetError(ValueError):
    pass


class BoundsWarning(UserWarning):
    """A feature value lies outside the documented database range."""


class Feature(NamedTuple):
    id: str
    column: str
    label: str
    unit: str
    lo: float
    hi: float


# Ranges are the minimum/maximum over the 312-wall reference database.
FEATURES = (
    Feature("l_w", "lw_mm", "wall length", "mm", 400.0, 3500.0),
    Feature("h_w", "hw_mm", "wall height", "mm", 500.0, 12000.0),
    Feature("t_w", "tw_mm", "wall thickness", "mm", 26.0, 300.0),
    Feature("f_c", "fc_MPa", "concrete compressive strength", "MPa", 12.35, 117.0),
    Feature("f_yt", "fyt_MPa", "transverse web yield strength", "MPa", 216.0, 1001.0),
    Feature("f_ysh", "fysh_MPa", "transverse boundary yield strength", "MPa", 0.0, 1262.0),
    Feature("f_yl", "fyl_MPa", "vertical web yield strength", "MPa", 216.0, 1001.0),
    Feature("f_ybl", "fybl_MPa", "vertical boundary yield strength", "MPa", 0.0, 1450.8),
    Feature("rho_t", "rho_t_pct", "transverse web reinforcement ratio", "%", 0.11, 2.42),
    Feature("rho_sh", "rho_sh_pct", "transverse boundary reinforcement ratio", "%", 0.0, 9.57),
    Feature("rho_l", "rho_l_pct", "vertical web reinforcement ratio", "%", 0.13, 3.29),
    Feature("rho_bl", "rho_bl_pct", "vertical boundary reinforcement ratio", "%", 0.0, 13.04),
    Feature("axial_load_ratio", "alr", "axial load ratio P/(Ag f'c)", "-", 0.0, 0.5),
    Feature("b_0", "b0_mm", "boundary element depth", "mm", 50.0, 1500.0),
    Feature("d_b", "db_mm", "boundary element length", "mm", 0.0, 590.8),
    Feature("s_over_db", "s_over_db", "hoop spacing / boundary length", "-", 0.0, 52.08),
    Feature("aspect_ratio", "ar", "aspect ratio", "-", 0.33, 7.38),
    Feature("shear_span_ratio", "shear_span_ratio", "shear span ratio M/(V lw)", "-", 0.33, 7.38),
)
FEATURE_IDS = tuple(f.id for f in FEATURES)
FEATURE_BY_ID = {f.id: f for f in FEATURES}
_FEATURE_BY_COLUMN = {f.column: f for f in FEATURES}

SHAPES = ("rectangular", "barbell", "flanged")
FAILURE_MODES = ("shear", "shear_flexure", "flexure")
HEADER = ("id", "shape", "failure_mode") + tuple(f.column for f in FEATURES) + ("ncde",)
# optional detailing columns that trigger apply_conventions on load
CONVENTION_COLUMNS = ("has_boundary", "has_stirrups", "s_mm")

_STRICTLY_POSITIVE = {"l_w", "h_w", "t_w", "f_c", "b_0"}


def resolve_feature(name):
    """Map a feature id or CSV column name to its feature id."""
    if name in FEATURE_BY_ID:
        return name
    if name in _FEATURE_BY_COLUMN:
        return _FEATURE_BY_COLUMN[name].id
    raise DatasetError(f"unknown feature {name!r}")


@dataclass(frozen=True)
class WallSpecimen:
    id: str
    section_shape: str
    failure_mode: str | None
    l_w: float
    h_w: float
    t_w: float
    f_c: float
    f_yt: float
    f_ysh: float
    f_yl: float
    f_ybl: float
    rho_t: float
    rho_sh: float
    rho_l: float
    rho_bl: float
    axial_load_ratio: float
    b_0: float
    d_b: float
    s_over_db: float
    aspect_ratio: float
    shear_span_ratio: float
    ncde: float
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        problems = validate(self)
        if problems:
            raise DatasetError(f"specimen {self.id!r}: " + "; ".join(problems))

    def features(self, ids=FEATURE_IDS):
        return np.array([getattr(self, i) for i in ids], dtype=np.float64)


def validate(spec):
    """Hard invariant violations of a specimen, as messages."""
    out = []
    if spec.section_shape not in SHAPES:
        out.append(f"shape {spec.section_shape!r} not in {SHAPES}")
    if spec.failure_mode is not None and spec.failure_mode not in FAILURE_MODES:
        out.append(f"failure_mode {spec.failure_mode!r} not in {FAILURE_MODES}")
    for fid in FEATURE_IDS:
        v = getattr(spec, fid)
        if not math.isfinite(v):
            out.append(f"{fid} is not finite")
        elif fid in _STRICTLY_POSITIVE and v <= 0:
            out.append(f"{fid} must be > 0")
        elif v < 0:
            out.append(f"{fid} must be >= 0")
    if not 0 <= spec.axial_load_ratio < 1:
        out.append("axial_load_ratio must lie in [0, 1)")
    if not (math.isfinite(spec.ncde) and spec.ncde > 0):
        out.append("ncde must be > 0")
    return out


def check_bounds(spec, slack=0.1):
    """Names of features outside the reference range widened by ``slack``."""
    out = []
    for f in FEATURES:
        pad = slack * (f.hi - f.lo)
        v = getattr(spec, f.id)
        if v < f.lo - pad or v > f.hi + pad:
            out.append(f.id)
    return out


def apply_conventions(spec, has_boundary=True, has_stirrups=True, stirrup_spacing=None):
    """Fill in the database conventions for missing detailing.

    Walls without boundary elements get ``b_0 = t_w`` and ``d_b = 0``.
    Walls without stirrups use ``s = h_w`` when forming ``s/d_b``. When
    ``d_b`` is zero the ratio is stored as 0.
    """
    changes = {}
    if not has_boundary:
        changes["b_0"] = spec.t_w
        changes["d_b"] = 0.0
    d_b = changes.get("d_b", spec.d_b)
    spacing = spec.h_w if not has_stirrups else stirrup_spacing
    if spacing is not None:
        changes["s_over_db"] = spacing / d_b if d_b > 0 else 0.0
    elif d_b == 0:
        changes["s_over_db"] = 0.0
    if not changes:
        return spec
    return dataclasses.replace(spec, **changes)


def _parse_bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "y"):
        return True
    if t in ("0", "false", "no", "n"):
        return False
    raise ValueError(text)


def load_specimens(path, slack=0.1):
    """Parse and validate a ``walls.csv`` database.

    Unknown columns are kept in ``WallSpecimen.metadata``. Out-of-range
    values raise :class:`BoundsWarning`, never an error.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in HEADER if c not in cols]
        if missing:
            raise DatasetError(f"{path}: missing required column(s) {missing}")
        extra = [c for c in cols if c not in HEADER and c not in CONVENTION_COLUMNS]
        out = []
        for rowno, row in enumerate(reader, start=2):
            out.append(_parse_row(row, rowno, extra, path, slack))
    return out


def _parse_row(row, rowno, extra, path, slack):
    where = f"{path}: row {rowno}"
    values = {}
    for f in FEATURES:
        cell = (row[f.column] or "").strip()
        try:
            values[f.id] = float(cell)
        except ValueError:
            raise DatasetError(f"{where}: non-numeric {f.column}={cell!r}") from None
    try:
        values["ncde"] = float(row["ncde"])
    except ValueError:
        raise DatasetError(f"{where}: non-numeric ncde={row['ncde']!r}") from None
    if not values["ncde"] > 0:
        raise DatasetError(f"{where}: ncde must be > 0, got {values['ncde']}")
    mode = (row["failure_mode"] or "").strip() or None
    try:
        spec = WallSpecimen(
            id=row["id"].strip(),
            section_shape=row["shape"].strip(),
            failure_mode=mode,
            metadata={k: row[k] for k in extra},
            **values,
        )
    except DatasetError as exc:
        raise DatasetError(f"{where}: {exc}") from None
    flags = {}
    try:
        if (row.get("has_boundary") or "").strip():
            flags["has_boundary"] = _parse_bool(row["has_boundary"])
        if (row.get("has_stirrups") or "").strip():
            flags["has_stirrups"] = _parse_bool(row["has_stirrups"])
        if (row.get("s_mm") or "").strip():
            flags["stirrup_spacing"] = float(row["s_mm"])
    except ValueError:
        raise DatasetError(f"{where}: bad detailing flag") from None
    if flags:
        spec = apply_conventions(spec, **flags)
    out_of_range = check_bounds(spec, slack)
    if out_of_range:
        warnings.warn(f"{where}: outside reference range: {out_of_range}", BoundsWarning)
    return spec


def write_specimens(path, specimens):
    extra = sorted({k for s in specimens for k in s.metadata})
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER + tuple(extra))
        for s in specimens:
            w.writerow(
                [s.id, s.section_shape, s.failure_mode or ""]
                + [repr(float(getattr(s, f.id))) for f in FEATURES]
                + [repr(float(s.ncde))]
                + [s.metadata.get(k, "") for k in extra]
            )


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    feature_ids: tuple
    row_ids: tuple = ()

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        y = np.asarray(self.y, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != len(self.feature_ids):
            raise DatasetError("X must be 2-D with one column per feature id")
        if y.shape != (X.shape[0],):
            raise DatasetError("y length must match the number of rows")
        if X.shape[0] < 1:
            raise DatasetError("a design matrix needs at least 1 row")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DatasetError("design matrix contains non-finite entries")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_ids", tuple(self.feature_ids))
        ids = tuple(self.row_ids) or tuple(str(i) for i in range(X.shape[0]))
        object.__setattr__(self, "row_ids", ids)

    @property
    def shape(self):
        return self.X.shape

    def rows(self, idx):
        idx = np.asarray(idx)
        return DesignMatrix(self.X[idx], self.y[idx], self.feature_ids,
                            tuple(self.row_ids[i] for i in idx))

    def columns(self, ids):
        cols = [self.feature_ids.index(i) for i in ids]
        return DesignMatrix(self.X[:, cols], self.y, tuple(ids), self.row_ids)

    def digest(self):
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update(np.ascontiguousarray(self.y).tobytes())
        h.update(",".join(self.feature_ids).encode())
        return h.hexdigest()


def design_matrix(specimens, feature_ids=FEATURE_IDS):
    feature_ids = tuple(resolve_feature(f) for f in feature_ids)
    X = np.array([s.features(feature_ids) for s in specimens], dtype=np.float64)
    y = np.array([s.ncde for s in specimens], dtype=np.float64)
    return DesignMatrix(X.reshape(len(specimens), len(feature_ids)), y, feature_ids,
                        tuple(s.id for s in specimens))


@dataclass(frozen=True)
class ScalingParams:
    feature_ids: tuple
    mins: np.ndarray
    maxs: np.ndarray

    def to_dict(self):
        return {"feature_ids": list(self.feature_ids),
                "mins": self.mins.tolist(), "maxs": self.maxs.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["feature_ids"]), np.array(d["mins"], float), np.array(d["maxs"], float))


def fit_scaler(train):
    """Per-feature (min, max) over the training rows."""
    if train.X.shape[0] < 2:
        raise DatasetError("scaler needs at least 2 training rows")
    mins = train.X.min(axis=0)
    maxs = train.X.max(axis=0)
    const = [fid for fid, lo, hi in zip(train.feature_ids, mins, maxs) if not hi > lo]
    if const:
        raise DatasetError(f"constant feature(s) in training set: {const}")
    return ScalingParams(train.feature_ids, mins, maxs)


def _check_ids(matrix, params):
    if tuple(matrix.feature_ids) != tuple(params.feature_ids):
        raise DatasetError(
            f"feature mismatch: matrix {matrix.feature_ids} vs scaler {params.feature_ids}"
        )


def scale_array(X, params):
    return 2.0 * (X - params.mins) / (params.maxs - params.mins) - 1.0


def scale(matrix, params):
    """Map training extrema to [-1, 1]; other values extrapolate linearly."""
    _check_ids(matrix, params)
    return DesignMatrix(scale_array(matrix.X, params), matrix.y, matrix.feature_ids,
                        matrix.row_ids)


def unscale(matrix, params):
    _check_ids(matrix, params)
    X = (matrix.X + 1.0) * 0.5 * (params.maxs - params.mins) + params.mins
    return DesignMatrix(X, matrix.y, matrix.feature_ids, matrix.row_ids)


def train_size(m, train_fraction=0.8):
    return int(math.ceil(m * train_fraction - 1e-9))


def split_indices(m, seed, train_fraction=0.8):
    """Seeded train/test partition of ``range(m)``.

    A PCG64 generator seeded with ``seed`` draws one permutation; the first
    ``ceil(train_fraction * m)`` entries form the training set. Both index
    arrays are returned sorted.
    """
    if m < 5:
        raise DatasetError(f"need at least 5 rows to split, got {m}")
    if not 0 < train_fraction < 1:
        raise DatasetError("train_fraction must be in (0, 1)")
    k = train_size(m, train_fraction)
    if k >= m:
        raise DatasetError("split leaves an empty test set")
    perm = np.random.default_rng(seed).permutation(m)
    return np.sort(perm[:k]), np.sort(perm[k:])


def split(items, seed, train_fraction=0.8):
    """Split a specimen list or a :class:`DesignMatrix` into (train, test)."""
    if isinstance(items, DesignMatrix):
        tr, te = split_indices(items.shape[0], seed, train_fraction)
        return items.rows(tr), items.rows(te)
    items = list(items)
    tr, te = split_indices(len(items), seed, train_fraction)
    return [items[i] for i in tr], [items[i] for i in te]

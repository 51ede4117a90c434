"""Seeded synthetic fixtures and brute-force oracles.

The wall generator samples every feature uniformly inside the reference
database range and builds a positive NCDE target from a known function of
the informative features with multiplicative log-normal noise. The
hysteresis generator emits geometric loops whose enclosed areas are known in
closed form. Neither is a physical model.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import FAILURE_MODES, FEATURE_BY_ID, FEATURES, SHAPES, WallSpecimen, resolve_feature
from .hysteresis import LoadDisplacementHistory

SELECTED_NINE = ("aspect_ratio", "l_w", "t_w", "f_c", "rho_l", "rho_bl",
              "axial_load_ratio", "b_0", "s_over_db")
TRUTHS = ("linear", "nonlinear-interaction", "single-feature")


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 0
    n: int = 312
    informative: tuple = SELECTED_NINE
    truth: str = "nonlinear-interaction"
    noise: float = 0.1

    def __post_init__(self):
        ids = tuple(resolve_feature(f) for f in self.informative)
        if not ids:
            raise ValueError("need at least one informative feature")
        if self.truth not in TRUTHS:
            raise ValueError(f"unknown ground truth {self.truth!r}")
        if self.noise < 0:
            raise ValueError("noise must be non-negative")
        object.__setattr__(self, "informative", ids)


@dataclass
class SynthWalls:
    specimens: list
    truth: np.ndarray
    spec: SynthSpec

    def ledger(self):
        return {
            "seed": self.spec.seed,
            "n": self.spec.n,
            "informative": list(self.spec.informative),
            "truth": self.spec.truth,
            "noise": self.spec.noise,
            "ground_truth": {s.id: float(t) for s, t in zip(self.specimens, self.truth)},
        }


def _unit(fid, x):
    f = FEATURE_BY_ID[fid]
    return 2.0 * (x - f.lo) / (f.hi - f.lo) - 1.0


_SHAPES = (
    lambda u: np.sin(1.8 * u),
    lambda u: 1.5 * u * u - 0.5,
    lambda u: np.cos(2.5 * u),
)


def log_truth(U, truth):
    """Log of the noise-free target for unit-scaled informative features."""
    k = U.shape[1]
    if truth == "single-feature":
        return 5.5 + _SHAPES[0](U[:, 0]) + 0.8 * _SHAPES[1](U[:, 0])
    if truth == "linear":
        return np.log(1000.0 + (400.0 / k) * (U @ np.resize([1.0, -1.0], k)))
    amp = 1.6 / math.sqrt(k)
    z = np.zeros(U.shape[0])
    for j in range(k):
        z += _SHAPES[j % 3](U[:, j])
    for j in range(0, k - 1, 2):
        z += 0.5 * U[:, j] * U[:, j + 1]
    return 5.5 + amp * z


def gen_walls(spec=SynthSpec()):
    """Generate ``spec.n`` specimens and their noise-free NCDE values."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    cols = {f.id: rng.uniform(f.lo, f.hi, n) for f in FEATURES}
    shapes = rng.choice(len(SHAPES), n)
    modes = rng.choice(len(FAILURE_MODES), n)
    U = np.column_stack([_unit(fid, cols[fid]) for fid in spec.informative])
    lt = log_truth(U, spec.truth)
    truth = np.exp(lt)
    sd = float(np.std(lt)) if n > 1 else 0.0
    eps = rng.normal(0.0, spec.noise * sd, n) if spec.noise > 0 else np.zeros(n)
    ncde = truth * np.exp(eps)
    specimens = [
        WallSpecimen(
            id=f"S{i + 1:04d}",
            section_shape=SHAPES[shapes[i]],
            failure_mode=FAILURE_MODES[modes[i]],
            ncde=float(ncde[i]),
            **{fid: float(cols[fid][i]) for fid in cols},
        )
        for i in range(n)
    ]
    return SynthWalls(specimens, truth, spec)


# ---------------------------------------------------------------------------
# hysteresis loops
# ---------------------------------------------------------------------------

HYSTERESIS_SHAPES = ("rectangle", "ellipse", "bilinear", "pinched")


def _loop_vertices(shape, a, b, base):
    """Closed polygon starting and ending at (0, b) on the upper branch."""
    if shape == "rectangle":
        return [(0, b), (a, b), (a, -b), (-a, -b), (-a, b), (0, b)]
    if shape == "bilinear":
        dy = 0.25 * base
        return [(0, b), (a, b), (a - 2 * dy, -b), (-a, -b), (-a + 2 * dy, b), (0, b)]
    if shape == "pinched":
        p, c = 0.3 * a, 0.2 * b
        return [(0, c), (p, c), (p, b), (a, b), (a, -b), (p, -b), (p, -c), (-p, -c),
                (-p, -b), (-a, -b), (-a, b), (-p, b), (-p, c), (0, c)]
    raise ValueError(f"unknown loop shape {shape!r}")


def loop_area(shape, a, b, base):
    if shape == "rectangle":
        return 4.0 * a * b
    if shape == "ellipse":
        return math.pi * a * b
    if shape == "bilinear":
        return 4.0 * b * (a - 0.25 * base)
    if shape == "pinched":
        return 4.0 * a * b - 4.0 * (0.3 * a) * (b - 0.2 * b)
    raise ValueError(f"unknown loop shape {shape!r}")


def _sample_polygon(verts, a, b, n):
    """Points along the polygon edges (vertices included), last point dropped."""
    v = np.asarray(verts, dtype=np.float64)
    seg = np.hypot(np.diff(v[:, 0]) / a, np.diff(v[:, 1]) / b)
    counts = np.maximum(1, np.round(n * seg / seg.sum()).astype(int))
    pts = []
    for k in range(len(v) - 1):
        t = np.arange(counts[k]) / counts[k]
        pts.append(v[k] + t[:, None] * (v[k + 1] - v[k]))
    return np.vstack(pts)


def gen_hysteresis(shape="ellipse", cycles=3, seed=0, amplitude=10.0, force=50.0,
                   points_per_cycle=400, wall_height=2000.0, growth=0.5):
    """Cyclic trace of ``cycles`` loops and its analytic energy ledger.

    Loop i has displacement amplitude ``amplitude * (1 + growth * i)``, scaled
    by a seeded factor in [0.95, 1.05], and force amplitude ``force``.
    """
    if shape not in HYSTERESIS_SHAPES:
        raise ValueError(f"unknown loop shape {shape!r}")
    if cycles < 1:
        raise ValueError("cycles must be >= 1")
    rng = np.random.default_rng(seed)
    pts = []
    ledger = []
    for i in range(cycles):
        a = amplitude * (1.0 + growth * i) * rng.uniform(0.95, 1.05)
        b = force
        if shape == "ellipse":
            t = 2.0 * np.pi * np.arange(points_per_cycle) / points_per_cycle
            pts.append(np.column_stack([a * np.sin(t), b * np.cos(t)]))
        else:
            pts.append(_sample_polygon(_loop_vertices(shape, a, b, amplitude), a, b,
                                       points_per_cycle))
        ledger.append({
            "amplitude_mm": a,
            "force_kN": b,
            "energy_kNmm": loop_area(shape, a, b, amplitude),
            "drift_sum_pct": 200.0 * a / wall_height,
        })
    first = pts[0][0]
    pts.append(first[None, :] if shape != "pinched" else np.array([[0.0, 0.2 * force]]))
    if shape == "ellipse":
        pts[-1] = np.array([[0.0, force]])
    xy = np.vstack(pts)
    hist = LoadDisplacementHistory(xy[:, 0], xy[:, 1], wall_height, f"{shape}-{seed}")
    total_e = sum(c["energy_kNmm"] for c in ledger)
    total_d = sum(c["drift_sum_pct"] for c in ledger)
    return hist, {
        "shape": shape,
        "seed": seed,
        "wall_height_mm": wall_height,
        "cycles": ledger,
        "total_energy_kNmm": total_e,
        "total_drift_pct": total_d,
        "ncde": total_e / total_d,
    }


def write_ledger(path, ledger):
    Path(path).write_text(json.dumps(ledger, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# oracles
# ---------------------------------------------------------------------------

def oracle_shoelace(points):
    """Absolute polygon area by the shoelace formula."""
    p = np.asarray(points, dtype=np.float64)
    x, y = p[:, 0], p[:, 1]
    return abs(0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y)))


def _lml_direct(X, y, ls, sf, sn):
    m = X.shape[0]
    K = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            K[i, j] = sf ** 2 * math.exp(-0.5 * float(np.sum(((X[i] - X[j]) / ls) ** 2)))
    Ky = K + sn ** 2 * np.eye(m)
    one = np.ones(m)
    beta = float(one @ np.linalg.solve(Ky, y)) / float(one @ np.linalg.solve(Ky, one))
    r = y - beta
    sign, logdet = np.linalg.slogdet(Ky)
    if sign <= 0:
        return -np.inf
    return -0.5 * float(r @ np.linalg.solve(Ky, r)) - 0.5 * logdet - 0.5 * m * math.log(2 * math.pi)


def oracle_grid_gpr(X, y, length_scales, signal_std, noise_std):
    """Exhaustive marginal-likelihood search over a hyperparameter grid.

    ``length_scales`` is a sequence of candidate vectors (one length per
    input dimension); ``signal_std`` and ``noise_std`` are candidate lists.
    Returns ``(best_lml, (length_scales, signal_std, noise_std))``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.float64)
    best = (-np.inf, None)
    for ls, sf, sn in itertools.product(length_scales, signal_std, noise_std):
        ls = np.atleast_1d(np.asarray(ls, dtype=np.float64))
        v = _lml_direct(X, y, ls, sf, sn)
        if v > best[0]:
            best = (v, (ls, sf, sn))
    return best

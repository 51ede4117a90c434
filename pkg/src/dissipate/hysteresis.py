"""Cycle segmentation and dissipated-energy measures for cyclic tests.

Units follow the test convention used throughout the package: displacement
in mm, force in kN, energy in kN*mm, drift ratio in percent of wall height.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import kernels

log = logging.getLogger(__name__)

NOISE_FRACTION = 0.01


class HysteresisError(ValueError):
    """Invalid trace or degenerate energy computation."""


class NoCompleteCycleError(HysteresisError):
    pass


@dataclass(frozen=True)
class LoadDisplacementHistory:
    """Ordered (displacement, force) samples of one cyclic test."""

    displacement: np.ndarray
    force: np.ndarray
    wall_height: float
    specimen_id: str = ""

    def __post_init__(self):
        d = np.ascontiguousarray(self.displacement, dtype=np.float64).ravel()
        f = np.ascontiguousarray(self.force, dtype=np.float64).ravel()
        if d.shape != f.shape:
            raise HysteresisError("displacement and force lengths differ")
        if d.size < 4:
            raise HysteresisError(f"history needs at least 4 points, got {d.size}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(f))):
            raise HysteresisError("history contains non-finite values")
        if not (math.isfinite(self.wall_height) and self.wall_height > 0):
            raise HysteresisError("wall_height must be strictly positive")
        d.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "displacement", d)
        object.__setattr__(self, "force", f)
        object.__setattr__(self, "wall_height", float(self.wall_height))

    def __len__(self):
        return self.displacement.size

    @classmethod
    def from_points(cls, points, wall_height, specimen_id=""):
        arr = np.asarray(points, dtype=np.float64)
        return cls(arr[:, 0], arr[:, 1], wall_height, specimen_id)

    def scaled(self, force=1.0, displacement=1.0):
        """Copy with forces, displacements and wall height rescaled."""
        return LoadDisplacementHistory(
            self.displacement * displacement,
            self.force * force,
            self.wall_height * displacement,
            self.specimen_id,
        )


@dataclass(frozen=True)
class Cycle:
    """Inclusive index span ``[start_index, end_index]`` of one loop."""

    start_index: int
    end_index: int
    peak_pos_index: int
    peak_neg_index: int
    peak_pos_disp: float
    peak_neg_disp: float
    peak_pos_force: float
    peak_neg_force: float
    partial: bool = False

    @classmethod
    def from_span(cls, history, start, end, partial=False):
        if not 0 <= start < end < len(history):
            raise HysteresisError(f"invalid cycle span [{start}, {end}]")
        d = history.displacement[start : end + 1]
        f = history.force[start : end + 1]
        ipos = int(np.argmax(d))
        ineg = int(np.argmin(d))
        return cls(
            start_index=int(start),
            end_index=int(end),
            peak_pos_index=start + ipos,
            peak_neg_index=start + ineg,
            peak_pos_disp=max(float(d[ipos]), 0.0),
            peak_neg_disp=min(float(d[ineg]), 0.0),
            peak_pos_force=float(f.max()),
            peak_neg_force=float(f.min()),
            partial=partial,
        )


@dataclass(frozen=True)
class CycleSummary:
    energy: float
    mean_force: float
    mean_disp: float
    drift_sum: float
    signed_energy: float = 0.0
    partial: bool = False


@dataclass
class Segmentation:
    cycles: list
    partials: list = field(default_factory=list)

    @property
    def all_spans(self):
        return sorted(self.cycles + self.partials, key=lambda c: c.start_index)


@dataclass
class EnergyReport:
    specimen_id: str
    cycles: list
    summaries: list
    total_energy: float
    total_drift: float
    ncde: float
    has_partial: bool

    @property
    def cycle_count(self):
        return sum(1 for s in self.summaries if not s.partial)

    def to_dict(self):
        return {
            "specimen_id": self.specimen_id,
            "cycle_count": self.cycle_count,
            "total_energy_kNmm": self.total_energy,
            "total_drift_pct": self.total_drift,
            "ncde": self.ncde,
            "has_partial": self.has_partial,
            "cycles": [
                {**asdict(c), **{"summary": asdict(s)}}
                for c, s in zip(self.cycles, self.summaries)
            ],
        }


def segment_cycles(history, noise_fraction=NOISE_FRACTION):
    """Split a history into full cycles bounded by upward zero crossings.

    Excursions smaller than ``noise_fraction * max|disp|`` do not register.
    Leading or trailing pieces that are not full cycles are returned in
    ``Segmentation.partials`` rather than dropped.
    """
    d = history.displacement
    amp = float(np.max(np.abs(d)))
    threshold = noise_fraction * amp
    bounds, first_sign = kernels.upward_crossings(d, threshold)
    bounds = [int(b) for b in bounds]
    last = len(history) - 1
    if first_sign == 1 and abs(d[0]) <= threshold and (not bounds or bounds[0] != 0):
        bounds.insert(0, 0)
    # a trace that returns to zero after its final negative excursion closes
    # its last cycle even without a further upward crossing
    if bounds and abs(d[-1]) <= threshold:
        tail = d[bounds[-1]:]
        if tail.max() > threshold and tail.min() < -threshold:
            if np.flatnonzero(tail < -threshold)[-1] > np.flatnonzero(tail > threshold)[-1]:
                bounds.append(last)
    if len(bounds) < 2:
        raise NoCompleteCycleError(
            f"no complete cycle in history {history.specimen_id!r}"
        )
    cycles = [Cycle.from_span(history, a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    partials = []
    if bounds[0] > 0:
        partials.append(Cycle.from_span(history, 0, bounds[0], partial=True))
    if bounds[-1] < last:
        tail = d[bounds[-1] :]
        if np.any(np.abs(tail) > threshold):
            partials.append(Cycle.from_span(history, bounds[-1], last, partial=True))
    return Segmentation(cycles, partials)


def signed_loop_area(disp, force):
    """Closed-path trapezoidal integral of force d(disp).

    Loops traversed clockwise in the (disp, force) plane, the usual
    dissipative orientation, come out positive.
    """
    d = np.ascontiguousarray(disp, dtype=np.float64)
    f = np.ascontiguousarray(force, dtype=np.float64)
    return float(kernels.loop_integral(d, f, True))


def cycle_energy(history, cycle=None, signed=False):
    """Area enclosed by the loop of ``cycle`` (whole history if ``None``)."""
    if cycle is None:
        start, end = 0, len(history) - 1
    else:
        start, end = cycle.start_index, cycle.end_index
    if end - start + 1 < 3:
        raise HysteresisError("a loop needs at least 3 points")
    area = signed_loop_area(
        history.displacement[start : end + 1], history.force[start : end + 1]
    )
    return area if signed else abs(area)


def summarize_cycle(history, cycle):
    sl = slice(cycle.start_index, cycle.end_index + 1)
    signed = signed_loop_area(history.displacement[sl], history.force[sl])
    if signed < 0:
        log.warning(
            "%s: loop [%d, %d] has negative signed area %.6g; check trace orientation",
            history.specimen_id, cycle.start_index, cycle.end_index, signed,
        )
    h = history.wall_height
    return CycleSummary(
        energy=abs(signed),
        mean_force=0.5 * (abs(cycle.peak_pos_force) + abs(cycle.peak_neg_force)),
        mean_disp=0.5 * (abs(cycle.peak_pos_disp) + abs(cycle.peak_neg_disp)),
        drift_sum=100.0 * (abs(cycle.peak_pos_disp) + abs(cycle.peak_neg_disp)) / h,
        signed_energy=signed,
        partial=cycle.partial,
    )


def nde_hidalgo(summary, energy=None):
    """Cycle energy normalized by ``4 * mean_force * mean_disp``."""
    e = summary.energy if energy is None else energy
    if summary.mean_force <= 0 or summary.mean_disp <= 0:
        raise HysteresisError("degenerate cycle: zero mean force or displacement")
    return e / (4.0 * summary.mean_force * summary.mean_disp)


def nde_kuang(history, v_i, delta_y, mu):
    """Work done up to top displacement ``mu * delta_y``, over ``v_i * delta_y``.

    The history is integrated from its first sample until the displacement
    first reaches the target; the last segment is cut by linear interpolation.
    """
    if v_i <= 0 or delta_y <= 0:
        raise HysteresisError("v_i and delta_y must be positive")
    if mu < 0:
        raise HysteresisError("mu must be non-negative")
    target = mu * delta_y
    d = history.displacement
    f = history.force
    hit = np.flatnonzero(d >= target)
    if hit.size == 0:
        raise HysteresisError(
            f"history never reaches mu*delta_y={target:g}; "
            f"max ductility attained is {d.max() / delta_y:.4g}"
        )
    k = int(hit[0])
    if k == 0:
        return 0.0
    work = float(kernels.loop_integral(d[: k].copy(), f[: k].copy(), False))
    d0, d1, f0, f1 = d[k - 1], d[k], f[k - 1], f[k]
    t = (target - d0) / (d1 - d0) if d1 != d0 else 1.0
    fx = f0 + t * (f1 - f0)
    work += 0.5 * (f0 + fx) * (target - d0)
    return work / (v_i * delta_y)


def ncde(summaries):
    """Total energy over total drift sum (kN*mm per percent drift)."""
    summaries = list(summaries)
    if not summaries:
        raise HysteresisError("ncde needs at least one cycle summary")
    drift = sum(s.drift_sum for s in summaries)
    if any(s.drift_sum < 0 for s in summaries):
        raise HysteresisError("negative drift sum")
    if drift <= 0:
        raise HysteresisError("zero cumulative drift")
    return sum(s.energy for s in summaries) / drift


def energy_report(history, noise_fraction=NOISE_FRACTION):
    """Segment, summarize every cycle and partial, and compute NCDE."""
    seg = segment_cycles(history, noise_fraction)
    spans = seg.all_spans
    summaries = [summarize_cycle(history, c) for c in spans]
    return EnergyReport(
        specimen_id=history.specimen_id,
        cycles=spans,
        summaries=summaries,
        total_energy=sum(s.energy for s in summaries),
        total_drift=sum(s.drift_sum for s in summaries),
        ncde=ncde(summaries),
        has_partial=bool(seg.partials),
    )


def compare_traces(a, b):
    """Relative NCDE discrepancy ``|NCDE(a) - NCDE(b)| / NCDE(b)``."""
    na = energy_report(a).ncde
    nb = energy_report(b).ncde
    return abs(na - nb) / nb


def read_curve_csv(path, wall_height, specimen_id=None):
    """Read a ``displacement_mm,force_kN`` curve file."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        for need in ("displacement_mm", "force_kN"):
            if need not in cols:
                raise HysteresisError(f"{path}: missing column {need!r}")
        d, f = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                d.append(float(row["displacement_mm"]))
                f.append(float(row["force_kN"]))
            except (TypeError, ValueError):
                raise HysteresisError(f"{path}:{lineno}: non-numeric value") from None
    return LoadDisplacementHistory(
        np.array(d), np.array(f), wall_height,
        specimen_id if specimen_id is not None else path.stem,
    )


def write_curve_csv(path, history):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["displacement_mm", "force_kN"])
        for d, f in zip(history.displacement, history.force):
            w.writerow([repr(float(d)), repr(float(f))])

import csv
import itertools
import json

import numpy as np
import pytest

from dissipate import select as sel
from dissipate.dataset import design_matrix
from dissipate.select import (
    CurvePoint,
    SelectionCurve,
    SelectionError,
    backward_eliminate,
    evaluate_subset,
    forward_add_curve,
    rank_features,
    removal_order,
    select_best_subset,
    write_curve,
    write_heatmap,
    write_sbe_trace,
)
from dissipate.synth import SynthSpec, gen_walls
from dissipate.trials import TrialConfig

FEATS = ("l_w", "aspect_ratio", "t_w", "rho_bl")


@pytest.fixture(scope="module")
def data():
    w = gen_walls(SynthSpec(seed=21, n=70, informative=("aspect_ratio", "rho_bl"), noise=0.05))
    return design_matrix(w.specimens, FEATS)


def curve(*r2):
    return SelectionCurve("sbe", "gpr", [CurvePoint(k + 1, tuple("abcdef"[: k + 1]), v, 0.1)
                                         for k, v in enumerate(r2)])


def test_best_subset_cases():
    assert select_best_subset(curve(0.5, 0.9, 0.905, 0.9)) == ("a", "b")
    assert select_best_subset(curve(0.5, 0.9, 0.91), tolerance=0.0) == ("a", "b", "c")
    assert select_best_subset(curve(0.7, 0.7, 0.7)) == ("a",)
    assert select_best_subset(curve(float("nan"), 0.8)) == ("a", "b")
    with pytest.raises(SelectionError):
        select_best_subset(curve(0.5), tolerance=-1)
    with pytest.raises(SelectionError):
        SelectionCurve("sbe", "gpr", [CurvePoint(1, ("a",), 0.1, 0.1)] * 2)


def test_linear_methods_rejected(data):
    for m in ("lr", "lasso"):
        with pytest.raises(SelectionError, match="feature weights"):
            rank_features(data, m, trials=2)


def test_ranking_ties_keep_data_order(data, monkeypatch):
    class Fake:
        ok, error = True, None
        weights = np.array([0.25, 0.25, 0.25, 0.25])
    monkeypatch.setattr(sel, "run_trials", lambda *a, **k: [Fake(), Fake()])
    r = rank_features(data, "nca", trials=2)
    assert r.order == FEATS


def test_ranking_and_forward_curve(data):
    cfg = TrialConfig(method="nca")
    r = rank_features(data, "nca", trials=4, seed=3, config=cfg)
    assert r.trial_weights.shape == (4, 4)
    np.testing.assert_allclose(r.mean_weights, r.trial_weights.mean(axis=0), rtol=1e-14)
    assert set(r.order[:2]) == {"aspect_ratio", "rho_bl"}
    c = forward_add_curve(data, r, "nca", trials=4, seed=3, config=cfg)
    assert [p.size for p in c.points] == [1, 2, 3, 4]
    for p in c.points:
        assert p.features == tuple(f for f in FEATS if f in p.features)
    full = evaluate_subset(data, FEATS, "nca", 4, 3, cfg)
    assert (c.points[-1].mean_r2, c.points[-1].mean_relrmse) == full


def greedy_oracle(features, score):
    """Independent greedy elimination using sorted() on a composite key."""
    remaining = list(features)
    order = []
    while len(remaining) > 1:
        cands = [(f, *score(tuple(g for g in remaining if g != f))) for f in remaining]
        pos = {f: i for i, f in enumerate(features)}
        best = sorted(cands, key=lambda c: (-c[1], c[2], -pos[c[0]]))[0]
        order.append(best[0])
        remaining.remove(best[0])
    return order


@pytest.mark.parametrize("seed", range(6))
def test_sbe_matches_greedy_oracle_with_ties(data, monkeypatch, seed):
    rng = np.random.default_rng(seed)
    # coarse scores force ties on R² and on RELRMSE
    table = {s: (float(rng.integers(0, 3)) / 2, float(rng.integers(0, 2)))
             for k in range(1, 5) for s in itertools.combinations(FEATS, k)}
    score = lambda s: table[tuple(f for f in FEATS if f in s)]
    monkeypatch.setattr(sel, "evaluate_subset", lambda d, f, *a, **k: score(f))
    c = backward_eliminate(data, "nca", trials=1)
    assert removal_order(c) == greedy_oracle(FEATS, score)
    assert [p.size for p in c.points] == [1, 2, 3, 4]


def test_sbe_real_run_and_artifacts(data, tmp_path):
    cfg = TrialConfig(method="nca")
    c = backward_eliminate(data, "nca", trials=3, seed=1, config=cfg)
    assert len(c.trace) == 3
    last = c.point(1).features
    assert last[0] in ("aspect_ratio", "rho_bl")
    for step in c.trace:
        best = max(step["candidates"], key=lambda x: x["mean_r2"])
        assert step["mean_r2"] == best["mean_r2"]
    write_curve(tmp_path / "c.csv", c)
    rows = list(csv.reader(open(tmp_path / "c.csv")))
    assert rows[0] == ["k", "mean_R2", "mean_RELRMSE", "features"] and len(rows) == 5
    write_sbe_trace(tmp_path / "t.json", c)
    doc = json.loads((tmp_path / "t.json").read_text())
    assert doc["removal_order"] == removal_order(c)


def test_heatmap_layout(data, tmp_path):
    r = rank_features(data, "nca", trials=3, seed=0)
    write_heatmap(tmp_path / "h.csv", r)
    rows = list(csv.reader(open(tmp_path / "h.csv")))
    assert rows[0] == ["trial", *FEATS] and len(rows) == 4
    assert sum(float(v) for v in rows[1][1:]) == pytest.approx(1.0)


def test_failed_trial_is_named(data):
    bad = TrialConfig(method="nca", fit_options={"regularization": -1.0})
    with pytest.raises(SelectionError, match="trial 0"):
        evaluate_subset(data, FEATS[:2], "nca", 2, 0, bad)


def test_sbe_needs_two_features(data):
    with pytest.raises(SelectionError):
        backward_eliminate(data.columns(FEATS[:1]), "nca", trials=1)

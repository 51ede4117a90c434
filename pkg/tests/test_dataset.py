import dataclasses
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dissipate.dataset import (
    FEATURE_IDS,
    FEATURES,
    HEADER,
    BoundsWarning,
    DatasetError,
    DesignMatrix,
    apply_conventions,
    design_matrix,
    fit_scaler,
    load_specimens,
    resolve_feature,
    scale,
    split,
    split_indices,
    train_size,
    unscale,
    write_specimens,
)
from dissipate.synth import SynthSpec, gen_walls


def base_spec(**kw):
    return dataclasses.replace(gen_walls(SynthSpec(seed=0, n=1)).specimens[0], **kw)


def write_rows(path, rows, extra_cols=()):
    lines = [",".join(HEADER + tuple(extra_cols))]
    for r in rows:
        lines.append(",".join(str(r[c]) for c in HEADER + tuple(extra_cols)))
    path.write_text("\n".join(lines) + "\n")


def row_of(spec, **over):
    r = {"id": spec.id, "shape": spec.section_shape, "failure_mode": spec.failure_mode,
         "ncde": spec.ncde}
    for f in FEATURES:
        r[f.column] = getattr(spec, f.id)
    r.update(over)
    return r


def test_schema_has_eighteen_features():
    assert len(FEATURE_IDS) == 18
    assert resolve_feature("lw_mm") == "l_w"
    with pytest.raises(DatasetError):
        resolve_feature("nope")


def test_load_three_rows(tmp_path):
    specs = gen_walls(SynthSpec(seed=1, n=3)).specimens
    p = tmp_path / "w.csv"
    write_specimens(p, specs)
    back = load_specimens(p)
    assert [s.id for s in back] == [s.id for s in specs]
    assert back == specs


def test_zero_ncde_rejected_with_row(tmp_path):
    s = base_spec()
    p = tmp_path / "w.csv"
    write_rows(p, [row_of(s), row_of(s, id="B", ncde=0)])
    with pytest.raises(DatasetError, match="row 3"):
        load_specimens(p)


def test_non_numeric_cell_names_column(tmp_path):
    p = tmp_path / "w.csv"
    write_rows(p, [row_of(base_spec(), fc_MPa="abc")])
    with pytest.raises(DatasetError, match="fc_MPa"):
        load_specimens(p)


def test_missing_column(tmp_path):
    p = tmp_path / "w.csv"
    p.write_text("id,shape\nA,rectangular\n")
    with pytest.raises(DatasetError, match="missing required column"):
        load_specimens(p)


def test_reference_maxima_accepted_silently(tmp_path):
    p = tmp_path / "w.csv"
    write_rows(p, [row_of(base_spec(), fc_MPa=117.0, lw_mm=3500)])
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        (spec,) = load_specimens(p)
    assert spec.f_c == 117.0 and spec.l_w == 3500


def test_out_of_range_warns_not_rejects(tmp_path):
    p = tmp_path / "w.csv"
    write_rows(p, [row_of(base_spec(), fc_MPa=400.0)])
    with pytest.warns(BoundsWarning, match="f_c"):
        (spec,) = load_specimens(p)
    assert spec.f_c == 400.0


def test_extra_columns_kept_as_metadata(tmp_path):
    p = tmp_path / "w.csv"
    write_rows(p, [{**row_of(base_spec()), "source": "lab"}], ("source",))
    (spec,) = load_specimens(p)
    assert spec.metadata == {"source": "lab"}


def test_invariants_enforced():
    with pytest.raises(DatasetError):
        base_spec(t_w=0.0)
    with pytest.raises(DatasetError):
        base_spec(axial_load_ratio=1.0)
    with pytest.raises(DatasetError):
        base_spec(section_shape="round")
    base_spec(d_b=0.0)


def test_conventions_no_boundary():
    s = apply_conventions(base_spec(t_w=120.0), has_boundary=False)
    assert s.b_0 == 120.0 and s.d_b == 0.0


def test_conventions_no_stirrups():
    s = apply_conventions(base_spec(h_w=2000.0, d_b=250.0), has_stirrups=False)
    assert s.s_over_db == pytest.approx(8.0)


def test_conventions_identity():
    s = base_spec()
    assert apply_conventions(s) is s


def test_convention_columns_applied_on_load(tmp_path):
    p = tmp_path / "w.csv"
    s = base_spec(t_w=150.0)
    write_rows(p, [{**row_of(s), "has_boundary": "no", "has_stirrups": "yes", "s_mm": ""}],
               ("has_boundary", "has_stirrups", "s_mm"))
    (got,) = load_specimens(p)
    assert got.b_0 == 150.0 and got.d_b == 0.0 and got.s_over_db == 0.0


# --- scaling ---------------------------------------------------------------

def _dm(cols):
    X = np.column_stack(cols).astype(float)
    return DesignMatrix(X, np.ones(X.shape[0]), tuple(f"x{i}" for i in range(X.shape[1])))


def test_scaler_fixture():
    dm = _dm([[0, 5, 10], [1, 2, 4]])
    sp = fit_scaler(dm)
    assert sp.mins.tolist() == [0, 1] and sp.maxs.tolist() == [10, 4]
    out = scale(dm, sp).X
    assert out[:, 0].tolist() == [-1.0, 0.0, 1.0]


def test_scaler_extrapolates_without_clipping():
    sp = fit_scaler(_dm([[0, 5, 10]]))
    assert scale(_dm([[20.0]]), sp).X[0, 0] == pytest.approx(3.0)


def test_constant_column_rejected():
    with pytest.raises(DatasetError, match="constant"):
        fit_scaler(_dm([[1, 1, 1]]))


@given(st.integers(0, 2**31))
def test_scale_round_trip(seed):
    rng = np.random.default_rng(seed)
    dm = _dm([rng.uniform(-50, 50, 8), rng.uniform(0, 1e4, 8)])
    sp = fit_scaler(dm)
    s = scale(dm, sp)
    assert s.X.min() >= -1 - 1e-12 and s.X.max() <= 1 + 1e-12
    np.testing.assert_allclose(unscale(s, sp).X, dm.X, rtol=1e-12, atol=1e-9)


# --- split -----------------------------------------------------------------

def test_split_sizes():
    assert train_size(312) == 250
    tr, te = split_indices(312, 7)
    assert tr.size == 250 and te.size == 62
    tr, te = split_indices(10, 7)
    assert tr.size == 8 and te.size == 2


def test_split_is_deterministic_and_partitions():
    a = split_indices(50, 3)
    b = split_indices(50, 3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert sorted(np.concatenate(a).tolist()) == list(range(50))
    assert not np.array_equal(split_indices(50, 4)[1], a[1])


def test_split_too_small():
    with pytest.raises(DatasetError):
        split_indices(4, 0)


def test_split_specimens_and_matrix_agree():
    specs = gen_walls(SynthSpec(seed=2, n=20)).specimens
    tr, te = split(specs, 9)
    mtr, mte = split(design_matrix(specs), 9)
    assert [s.id for s in te] == list(mte.row_ids)


def test_design_matrix_digest_stable():
    specs = gen_walls(SynthSpec(seed=2, n=20)).specimens
    assert design_matrix(specs).digest() == design_matrix(specs).digest()
    assert design_matrix(specs).digest() != design_matrix(specs[1:]).digest()

import csv
import io
import json
import math

import numpy as np
import pytest

from cellfree_fronthaul.experiment import (
    CSV_HEADER,
    ExperimentConfig,
    SweepRow,
    compute_phy,
    compute_se,
    default_d_ratios,
    emit_csv,
    run_distortion_sweep,
    run_sweep,
    write_artifacts,
)
from cellfree_fronthaul.flows import load_instance


def small_config(**kw):
    base = dict(
        L=6, K=6, Q=3, N=2, M=4, area_side=100.0, tau_p=4, c_max=3, n_realizations=5, n_mc_sigma=5,
        d_ratios=[0.1, 1.0, 4.0],
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_compute_se_examples():
    assert compute_se([50.0, 50.0], [0.0], 0.5, 20, 200) == pytest.approx((45.0, 0.0))
    assert compute_se([10.0], [10.0], 1.0 - 1e-12, 20, 200)[0] == pytest.approx(0.0, abs=1e-9)
    assert compute_se([10.0], [10.0], 0.5, 200, 200) == (0.0, 0.0)
    with pytest.raises(ValueError):
        compute_se([-1.0], [0.0], 0.5, 20, 200)


def test_default_grid():
    g = default_d_ratios()
    assert len(g) == 9
    assert g[0] == pytest.approx(0.04) and g[-1] == pytest.approx(4.0)
    assert np.allclose(np.diff(np.log(g)), np.log(100) / 8)


def test_config_validation_and_roundtrip(tmp_path):
    with pytest.raises(ValueError):
        ExperimentConfig(tau_p=300)
    with pytest.raises(ValueError):
        ExperimentConfig(alpha_dl=1.0)
    with pytest.raises(ValueError):
        ExperimentConfig(d_ratios=[0.0])
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"LL": 3})
    cfg = small_config()
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.load(p).to_dict() == cfg.to_dict()


def _row(**kw):
    base = dict(
        d_ratio=0.5, d=1e-10, se_ul=1.0, se_dl=2.0, se_tot=3.0, fh_ul=4.0, fh_dl=5.0, fh_tot=9.0,
        objective=4.0, duplex="full", n_pruned_links=2, runtime_s=0.0,
    )
    base.update(kw)
    return SweepRow(**base)


def test_csv_header_only(tmp_path):
    p = tmp_path / "a.csv"
    emit_csv([], p)
    assert p.read_bytes() == (",".join(CSV_HEADER) + "\n").encode()
    assert ",".join(CSV_HEADER) == "d_ratio,d,se_ul,se_dl,se_tot,fh_ul,fh_dl,fh_tot,objective,duplex,n_pruned_links,runtime_s"


def test_csv_roundtrip(tmp_path):
    p = tmp_path / "a.csv"
    row = _row(se_ul=123.456789123, d=1.3036113368814862e-11)
    emit_csv([row], p)
    text = p.read_text()
    assert "\r" not in text
    rec = list(csv.DictReader(io.StringIO(text)))[0]
    assert float(rec["se_ul"]) == pytest.approx(123.457, abs=1e-9)
    assert float(rec["d"]) == pytest.approx(1.30361e-11, rel=1e-12)
    assert rec["duplex"] == "full" and rec["n_pruned_links"] == "2"


def test_trivial_distortion_keeps_clusters():
    cfg = small_config(d_ratios=[1e-6])
    phy = compute_phy(cfg)
    pt = phy.points[0]
    assert pt.n_pruned == 0
    assert np.array_equal(pt.eff.mask, phy.assoc.mask)


def test_dl_rates_invariant_below_smallest_variance():
    cfg = small_config(d_ratios=[0.01, 0.3, 0.99])
    phy = compute_phy(cfg)
    for p in phy.points[1:]:
        assert np.array_equal(p.R_dl, phy.points[0].R_dl)


def test_sweep_is_deterministic(tmp_path):
    cfg = small_config(duplex="both")
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(run_distortion_sweep(cfg), a)
    emit_csv(run_distortion_sweep(cfg), b)
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.DictReader(a.open()))
    assert len(rows) == 2 * len(cfg.d_ratios)
    assert [r["duplex"] for r in rows[:2]] == ["full", "half"]
    for r in rows:
        assert all(float(r[c]) >= 0 for c in ("se_ul", "se_dl", "fh_ul", "fh_dl", "fh_tot"))


def test_artifacts_written(tmp_path):
    cfg = small_config(d_ratios=[0.5], duplex="full")
    res = run_sweep(cfg)
    write_artifacts(res, tmp_path, export_mps_files=True)
    inst = load_instance((tmp_path / "instances" / "point_00.json").read_text())
    assert inst.K == cfg.K
    assert (tmp_path / "mps" / "point_00_full.mps").read_text().startswith("NAME")


def test_rows_follow_grid_order_and_ul_load_decreases():
    cfg = small_config(d_ratios=[0.05, 0.5, 5.0], duplex="half")
    rows = run_distortion_sweep(cfg)
    assert [r.d_ratio for r in rows] == [0.05, 0.5, 5.0]
    obj = [r.objective for r in rows]
    assert all(not math.isnan(v) for v in obj)
    assert all(obj[i + 1] <= obj[i] + 1e-6 for i in range(len(obj) - 1))

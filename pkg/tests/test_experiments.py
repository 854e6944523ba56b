import json
import subprocess
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from onebitgen import ConfigurationError, ExperimentConfig, derive_seed
from onebitgen.experiments import (RateRow, build_network, dither_ablation, fit_slope, git_blob_hash,
                                   rate_sweep, run, run_landscape, run_wdc_check)
from onebitgen.svg import PALETTE, color_for


def _sweep_cfg(tmp_path, name="a", **kw):
    doc = {"experiment": "rate_sweep", "net": {"dims": [2, 20, 60], "seed": 1},
           "m_list": [64, 256], "trials": 3, "output_dir": str(tmp_path / name),
           "solver": {"max_iters": 300}}
    doc.update(kw)
    return ExperimentConfig.from_dict(doc)


@given(base=st.integers(0, 2 ** 64 - 1), tag=st.integers(0, 10 ** 6))
def test_derive_seed_range_and_determinism(base, tag):
    s = derive_seed(base, ["measure", tag])
    assert 0 <= s < 2 ** 64
    assert s == derive_seed(base, ["measure", tag])


def test_derive_seed_separates_streams():
    seeds = {derive_seed(0, ["measure", m, t]) for m in range(20) for t in range(20)}
    assert len(seeds) == 400
    assert derive_seed(0, ["a"]) != derive_seed(1, ["a"])
    # an int tag and its string spelling are different tags
    assert derive_seed(0, [1]) != derive_seed(0, ["1"])
    with pytest.raises(TypeError):
        derive_seed(0, [1.5])


def test_derive_seed_collision_scan():
    rng = np.random.default_rng(0)
    for base in rng.integers(0, 2 ** 63, size=10_000):
        assert derive_seed(int(base), ["measure", 256, 0]) != derive_seed(int(base), ["measure", 256, 1])


def test_git_blob_hash_matches_git(tmp_path):
    data = b"m,median\n1,2\n"
    path = tmp_path / "f.csv"
    path.write_bytes(data)
    try:
        out = subprocess.run(["git", "hash-object", str(path)], capture_output=True, text=True,
                             check=True).stdout.strip()
    except (OSError, subprocess.CalledProcessError):
        pytest.skip("git unavailable")
    assert git_blob_hash(data) == out


def test_config_validation():
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"experiment": "nope"})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"experiment": "rate_sweep", "m_list": []})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"experiment": "rate_sweep", "m_list": [8, 4]})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"experiment": "landscape", "colour": "red"})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"experiment": "landscape", "sensing": {"lamda": 3}})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"experiment": "landscape", "solver": {"stepsize": 3}})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"experiment": "landscape", "schema_version": 99})
    with pytest.raises(ConfigurationError):
        ExperimentConfig.from_dict({"sensing": {}})


def test_config_load(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"experiment": "wdc_check", "wdc": {"n_pairs": 3}}))
    cfg = ExperimentConfig.load(path)
    assert cfg.wdc["n_pairs"] == 3 and cfg.sensing["lambda"] == 10.0
    path.write_text("{not json")
    with pytest.raises(ConfigurationError):
        ExperimentConfig.load(path)


def test_build_network(tmp_path):
    net = build_network({"dims": [2, 3], "seed": 4})
    net.save(tmp_path / "n.json")
    assert build_network({"path": str(tmp_path / "n.json")}).dims == net.dims
    assert build_network({"group_sparse": {"k": 2, "d": 4}}).input_dim == 3
    with pytest.raises(ConfigurationError):
        build_network({"width": 3})


def test_fit_slope_recovers_power_law():
    rows = [RateRow(m, 3.0 * m ** -0.5, 0, 0, 0, 0) for m in (2 ** 8, 2 ** 10, 2 ** 12)]
    fit = fit_slope(rows)
    assert fit["slope"] == pytest.approx(-0.5) and fit["points_used"] == [256, 1024, 4096]
    rows.append(RateRow(2 ** 14, 1e-6, 0, 0, 0, 0))       # saturated point is dropped
    assert fit_slope(rows)["slope"] == pytest.approx(-0.5)
    assert fit_slope(rows[:1])["slope"] is None


def test_rate_sweep_outputs_and_determinism(tmp_path):
    rows = rate_sweep(_sweep_cfg(tmp_path, "a"))
    rate_sweep(_sweep_cfg(tmp_path, "b"), workers=3)
    a, b = tmp_path / "a", tmp_path / "b"
    assert {p.name for p in a.iterdir()} == {"rate_sweep.csv", "slope.json", "rate_curve.svg",
                                             "manifest.json"}
    for name in ("rate_sweep.csv", "slope.json", "rate_curve.svg"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    csv_lines = (a / "rate_sweep.csv").read_text().splitlines()
    assert csv_lines[0] == "m,median,q25,q75,mean_iters,failures"
    assert [r.m for r in rows] == [64, 256]
    assert all(r.q25 <= r.median_rel_error <= r.q75 for r in rows)
    manifest = json.loads((a / "manifest.json").read_text())
    assert manifest["schema_version"] == 1 and "created" not in manifest
    for name, digest in manifest["outputs"].items():
        assert git_blob_hash((a / name).read_bytes()) == digest
    assert len(manifest["seeds"]["trials"]) == 6
    assert len(manifest["net_hash"]) == 64
    ET.parse(a / "rate_curve.svg")


def test_rate_sweep_timestamp_only_in_manifest_and_svg(tmp_path):
    rate_sweep(_sweep_cfg(tmp_path, "t", timestamps=True, m_list=[64], trials=1))
    manifest = json.loads((tmp_path / "t" / "manifest.json").read_text())
    assert "created" in manifest
    assert "generated" in (tmp_path / "t" / "rate_curve.svg").read_text()


def test_rate_sweep_fixed_x0(tmp_path):
    rate_sweep(_sweep_cfg(tmp_path, "x", x0=[0.5, -1.0], m_list=[64], trials=1))
    assert json.loads((tmp_path / "x" / "slope.json").read_text())["x0"] == [0.5, -1.0]
    with pytest.raises(ConfigurationError):
        rate_sweep(_sweep_cfg(tmp_path, "y", x0=[0.5], m_list=[64], trials=1))


def test_wrong_experiment_dispatch(tmp_path):
    cfg = _sweep_cfg(tmp_path)
    for fn in (dither_ablation, run_landscape, run_wdc_check):
        with pytest.raises(ConfigurationError):
            fn(cfg)


def test_dither_ablation_small(tmp_path):
    cfg = ExperimentConfig.from_dict({"experiment": "dither_ablation", "trials": 3,
                                      "ablation": {"m": 4000, "separation_m": 8000},
                                      "output_dir": str(tmp_path / "abl")})
    rep = run(cfg)
    assert rep["no_dither"]["d_H_max"] == 0.0
    assert rep["no_dither"]["separation_successes"] == 0
    assert 0.005 < rep["dither"]["d_H_min"] <= rep["dither"]["d_H_max"] < 0.05
    saved = json.loads((tmp_path / "abl" / "ablation.json").read_text())
    assert saved["dither"]["d_H"] == rep["dither"]["d_H"]


def test_landscape_outputs(tmp_path):
    cfg = ExperimentConfig.from_dict({"experiment": "landscape", "net": {"dims": [2, 16, 40], "seed": 2},
                                      "grid": {"resolution": 9}, "output_dir": str(tmp_path / "ls")})
    rep = run(cfg)
    out = tmp_path / "ls"
    assert (out / "grid.csv").read_text() == rep.to_csv()
    root = ET.parse(out / "heatmap.svg").getroot()
    ns = "{http://www.w3.org/2000/svg}"
    assert len(root.findall(f"{ns}rect")) == 81
    assert len(root.findall(f"{ns}circle")) == 3
    saved = json.loads((out / "landscape.json").read_text())
    assert saved["mode"] == "surrogate" and saved["x0"] == [1.0, 1.0]


def test_landscape_empirical_mode(tmp_path):
    cfg = ExperimentConfig.from_dict({"experiment": "landscape", "net": {"dims": [2, 16, 40], "seed": 2},
                                      "grid": {"resolution": 5, "mode": "empirical", "m": 500}})
    rep = run(cfg)
    assert rep.mode == "empirical" and rep.m == 500


def test_wdc_check(tmp_path):
    cfg = ExperimentConfig.from_dict({"experiment": "wdc_check", "net": {"dims": [2, 50, 80], "seed": 0},
                                      "wdc": {"n_pairs": 10}, "output_dir": str(tmp_path / "w")})
    reps = run(cfg)
    assert [r.layer_index for r in reps] == [1, 2]
    doc = json.loads((tmp_path / "w" / "wdc.json").read_text())
    assert doc[0]["pair_count"] == 22


def test_palette_endpoints():
    assert color_for(0.0) == PALETTE[0]
    assert color_for(1.0) == PALETTE[-1]
    assert color_for(-3) == PALETTE[0] and color_for(0.5) == PALETTE[2]


def test_landscape_modes_share_coordinates_and_rerun_is_stable(tmp_path):
    base = {"experiment": "landscape", "net": {"dims": [2, 16, 40], "seed": 2}, "timestamps": True}
    runs = {}
    for name, grid in (("s1", {"resolution": 7}), ("s2", {"resolution": 7}),
                       ("e", {"resolution": 7, "mode": "empirical", "m": 300})):
        cfg = ExperimentConfig.from_dict({**base, "grid": grid, "output_dir": str(tmp_path / name)})
        run(cfg)
        runs[name] = tmp_path / name

    def coords(path):
        return [line.split(",")[:2] for line in (path / "grid.csv").read_text().splitlines()]

    assert coords(runs["s1"]) == coords(runs["e"])
    assert (runs["s1"] / "grid.csv").read_bytes() == (runs["s2"] / "grid.csv").read_bytes()

    def strip_comment(path):
        return [l for l in (path / "heatmap.svg").read_text().splitlines() if not l.startswith("<!--")]

    assert strip_comment(runs["s1"]) == strip_comment(runs["s2"])

import json
import math

import numpy as np
import pytest

from onebitgen import MeasurementSet, ReluNetwork
from onebitgen.cli import main


def test_rho(capsys):
    assert main(["rho", "--n", "2"]) == 0
    out = capsys.readouterr().out
    assert "rho_2 = 0.3183098861837907" in out
    assert main(["rho", "--n", "0"]) == 1


def test_gen_measure_recover(tmp_path, capsys):
    net_path = tmp_path / "net.json"
    ms_path = tmp_path / "ms.json"
    assert main(["gen-net", "--dims", "2,16,40", "--seed", "3", "-o", str(net_path)]) == 0
    net = ReluNetwork.load(net_path)
    assert list(net.dims) == [2, 16, 40]
    assert main(["measure", "--net", str(net_path), "--x0", "1,0.5", "--m", "200",
                 "--sensing.noise", "gaussian", "--sensing.noise_scale", "0.1", "--seed", "4",
                 "--labels-csv", str(tmp_path / "y.csv"), "-o", str(ms_path)]) == 0
    ms = MeasurementSet.load(ms_path)
    assert ms.m == 200 and ms.lam == 10.0 and ms.noise == "gaussian"
    assert (tmp_path / "y.csv").read_text().startswith("i,y\n")
    out_path = tmp_path / "res.json"
    assert main(["recover", "--net", str(net_path), "--measurements", str(ms_path), "--x0", "1,0.5",
                 "--solver.max_iters", "200", "-o", str(out_path)]) == 0
    res = json.loads(out_path.read_text())
    assert len(res["x_hat"]) == 2 and res["relative_error"] is not None


def test_gen_net_group_sparse(tmp_path):
    path = tmp_path / "gs.json"
    assert main(["gen-net", "--net.group_sparse.k", "2", "--net.group_sparse.d", "6",
                 "-o", str(path)]) == 0
    assert list(ReluNetwork.load(path).dims) == [3, 8, 12, 6]


def test_exit_codes(tmp_path, capsys):
    assert main(["landscape", "--config", str(tmp_path / "missing.json")]) == 3
    assert "missing.json" in capsys.readouterr().err
    assert main(["landscape", "--grid.resolution", "1", "--output_dir", str(tmp_path)]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["landscape", "--config", str(bad)]) == 1
    # non-finite correlation vector: solver reports a numerical failure
    net_path = tmp_path / "net.json"
    main(["gen-net", "--dims", "2,4", "--seed", "0", "-o", str(net_path)])
    doc = {"lambda": 1e308, "a": [[1e308, 1e308, 1e308, 1e308]] * 2, "xi": [0, 0], "tau": [0, 0],
           "y": [1, 1]}
    ms_path = tmp_path / "ms.json"
    ms_path.write_text(json.dumps(doc))
    with np.errstate(all="ignore"):
        assert main(["recover", "--net", str(net_path), "--measurements", str(ms_path),
                     "--solver.init", "1,1", "-o", str(tmp_path / "r.json")]) == 2


def test_usage_error_exit():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


def test_config_merge_inline_wins(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"experiment": "wdc_check", "wdc": {"n_pairs": 50},
                                    "net": {"dims": [2, 10, 20], "seed": 1}}))
    out = tmp_path / "w"
    assert main(["wdc-check", "--config", str(cfg_path), "--wdc.n_pairs", "2",
                 "--output_dir", str(out), "--no-timestamp"]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["wdc"]["n_pairs"] == 2
    assert manifest["config"]["net"]["dims"] == [2, 10, 20]
    assert "created" not in manifest


def test_timestamps_on_by_default(tmp_path):
    out = tmp_path / "w"
    assert main(["--threads", "2", "wdc-check", "--net.dims", "2,5", "--wdc.n_pairs", "2",
                 "--output_dir", str(out)]) == 0
    assert "created" in json.loads((out / "manifest.json").read_text())


def test_config_experiment_mismatch(tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"experiment": "landscape"}))
    assert main(["wdc-check", "--config", str(cfg_path)]) == 1


def test_help_lists_config_keys(capsys):
    with pytest.raises(SystemExit):
        main(["rate-sweep", "--help"])
    out = capsys.readouterr().out
    assert "[config key: sensing.lambda]" in out and "[config key: m_list]" in out

import os

import numpy as np
import pytest

from semlink.cli import main
from semlink.config import DEFAULT_EPSILONS, RunConfig, load_config
from semlink.errors import ConfigurationError


SMALL = """
# desk-scale config for CLI tests
n_items = 10
trials = 5
epochs = 60
snr_db = 0, 20
epsilons = 0, 0.01, 0.5
seed = 12
"""


def _write_cfg(tmp_path, body=SMALL, name="run.cfg"):
    path = tmp_path / name
    path.write_text(body)
    return str(path)


def test_config_defaults_and_parsing(tmp_path):
    cfg = load_config(_write_cfg(tmp_path))
    assert cfg.n_items == 10 and cfg.trials == 5 and cfg.seed == 12
    assert cfg.snr_db == (0.0, 20.0)
    assert cfg.epsilons == (0.0, 0.01, 0.5)
    assert cfg.l_fft == 64                       # untouched default
    assert RunConfig().epsilons == DEFAULT_EPSILONS


def test_config_unknown_key_rejected(tmp_path):
    path = _write_cfg(tmp_path, "n_items = 5\nbogus_key = 3\n")
    with pytest.raises(ConfigurationError):
        load_config(path)


def test_config_map_shape_and_bad_value(tmp_path):
    cfg = load_config(_write_cfg(tmp_path, "map_shape = 4x6\n"))
    assert cfg.map_shape == (4, 6)
    with pytest.raises(ConfigurationError):
        load_config(_write_cfg(tmp_path, "n_items = lots\n", name="bad.cfg"))


def test_config_validation_bounds(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(_write_cfg(tmp_path, "qam_order = 32\n"))
    with pytest.raises(ConfigurationError):
        load_config(_write_cfg(tmp_path, "cp_len = 2\nl_taps = 8\n"))


def test_synth_train_run_round_trip(tmp_path, capsys):
    cfg_path = _write_cfg(tmp_path)
    data_dir = str(tmp_path / "data")
    assert main(["synth", "--config", cfg_path, "--out", data_dir]) == 0
    files = sorted(os.listdir(data_dir))
    assert len(files) == 10 and files[0] == "item_00000.semf"

    head_path = str(tmp_path / "head.semh")
    assert main(["train", "--config", cfg_path, "--data", data_dir,
                 "--head-out", head_path]) == 0
    assert os.path.exists(head_path)

    assert main(["run", "--config", cfg_path, "--data", data_dir,
                 "--head", head_path, "--snr", "20",
                 "--out", str(tmp_path / "runout")]) == 0
    out = capsys.readouterr().out
    assert "ber_legit" in out and "perm" in out
    assert os.path.exists(tmp_path / "runout" / "trial.csv")


def test_search_space_command(capsys):
    assert main(["search-space"]) == 0
    out = capsys.readouterr().out
    assert "log2=160" in out and "multiplier=10" in out


def test_ber_sweep_csv_deterministic(tmp_path):
    cfg_path = _write_cfg(tmp_path)
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(["ber-sweep", "--config", cfg_path, "--out", out_a,
                 "--no-plot"]) == 0
    assert main(["ber-sweep", "--config", cfg_path, "--out", out_b,
                 "--no-plot"]) == 0
    for name in ("ber_sweep.csv", "constellation_snr0.csv",
                 "constellation_snr20.csv"):
        a = open(os.path.join(out_a, name), "rb").read()
        b = open(os.path.join(out_b, name), "rb").read()
        assert a == b, f"{name} differs between identical runs"
    header = open(os.path.join(out_a, "ber_sweep.csv")).readline().strip()
    assert header == ("snr_db,trials,total_bits,ber_legit_encrypted,"
                      "ber_legit_plaintext,ber_eve,mean_l_cha")


def test_latency_sweep_csv_deterministic(tmp_path):
    cfg_path = _write_cfg(tmp_path)
    out_a, out_b = str(tmp_path / "la"), str(tmp_path / "lb")
    for out in (out_a, out_b):
        assert main(["latency-sweep", "--config", cfg_path, "--out", out,
                     "--snr", "20", "--no-plot"]) == 0
    a = open(os.path.join(out_a, "latency_sweep.csv"), "rb").read()
    b = open(os.path.join(out_b, "latency_sweep.csv"), "rb").read()
    assert a == b
    lines = a.decode().strip().splitlines()
    assert lines[0] == "epsilon,mean_lambda,mean_symbols,latency_proxy,accuracy"
    assert len(lines) == 4                      # header + 3 epsilons


def test_constellation_dump_payload_only(tmp_path):
    cfg_path = _write_cfg(tmp_path)
    out = str(tmp_path / "c")
    assert main(["ber-sweep", "--config", cfg_path, "--out", out,
                 "--no-plot"]) == 0
    rows = open(os.path.join(out, "constellation_snr20.csv")).read().splitlines()
    assert rows[0] == "i,q,subcarrier,frame"
    # payload of one frame at epsilon=0.01 on the 10-item dataset
    assert len(rows) > 100
    vals = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    assert np.all(np.isfinite(vals))
    assert vals[:, 2].max() < 64 and vals[:, 2].min() >= 0


def test_cli_error_reporting(tmp_path, capsys):
    missing = str(tmp_path / "nope.cfg")
    assert main(["ber-sweep", "--config", missing, "--no-plot"]) == 2
    err = capsys.readouterr().err
    assert "error:" in err

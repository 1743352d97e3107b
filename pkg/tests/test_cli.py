import csv
import json

import pytest

from keyshare_ofdm.cli import PRESETS, main, parse_grid
from keyshare_ofdm.config import DEFAULT, ConfigError, dump_config


def test_parse_grid():
    assert parse_grid("0:5:40dB")[0] == pytest.approx(1.0)
    assert parse_grid("0:5:40dB")[-1] == pytest.approx(1e4)
    assert len(parse_grid("0:5:40dB")) == 9
    assert parse_grid("0.5:0.5:10") == pytest.approx([0.5 * i for i in range(1, 21)])
    assert parse_grid("2, 4,8") == [2.0, 4.0, 8.0]


@pytest.mark.parametrize("spec", ["", "1:2", "0:x:4", "5:1:1", "0:0:3", ","])
def test_parse_grid_errors(spec):
    with pytest.raises(ConfigError):
        parse_grid(spec)


def test_simulate_deterministic_csv(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["simulate", "--scheme", "fixed", "--slots", "600", "--seed", "7"]
    assert main(argv + ["--out", str(a)]) == 0
    assert main(argv + ["--out", str(b)]) == 0
    assert a.read_text() == b.read_text()
    assert "throughput=" in capsys.readouterr().out
    manifest = json.loads((tmp_path / "a.csv.manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["subcommand"] == "simulate"
    assert manifest["config"]["n_subchannels"] == 64
    assert manifest["outputs"] == [str(a)]
    assert "version" in manifest and "wall_clock_s" in manifest


def test_simulate_all_three_rows(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["simulate", "--slots", "200", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["scheme"] for r in rows] == ["fixed", "dynamic", "benchmark"]


def test_config_file_and_override(tmp_path):
    path = tmp_path / "c.cfg"
    path.write_text(dump_config(DEFAULT))
    out = tmp_path / "s.csv"
    assert main(["simulate", "--config", str(path), "--set", "n_eves=0",
                 "--scheme", "benchmark", "--slots", "200", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert float(rows[0]["throughput"]) == pytest.approx(1.5)


def test_missing_config_key_exit_2(tmp_path, capsys):
    path = tmp_path / "c.cfg"
    text = "\n".join(l for l in dump_config(DEFAULT).splitlines()
                     if not l.startswith("n_subchannels"))
    path.write_text(text)
    assert main(["simulate", "--config", str(path), "--slots", "10"]) == 2
    assert "n_subchannels" in capsys.readouterr().err


def test_invalid_override_exit_2():
    assert main(["simulate", "--set", "key_ratio=11", "--slots", "10"]) == 2
    assert main(["simulate", "--set", "nonsense", "--slots", "10"]) == 2


def test_unwritable_output_nonzero(tmp_path):
    out = tmp_path / "missing_dir" / "s.csv"
    assert main(["simulate", "--scheme", "benchmark", "--slots", "10",
                 "--out", str(out)]) == 3


def test_sweep_csv(tmp_path):
    out = tmp_path / "sw.csv"
    assert main(["sweep", "--param", "snr", "--grid", "20:10:30dB", "--slots", "200",
                 "--schemes", "benchmark,dynamic", "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4
    assert rows[0]["parameter"] == "snr"
    assert float(rows[-1]["value"]) == pytest.approx(1000.0)


def test_sweep_errors():
    assert main(["sweep", "--param", "snr", "--grid", "0:a:4", "--slots", "10"]) == 2
    assert main(["sweep", "--slots", "10"]) == 2


def test_presets_cover_all_figures():
    assert sorted(PRESETS) == sorted(f"figure{i}" for i in range(5, 11))
    assert PRESETS["figure9"]["param"] == "n_data"


def test_preset_sweep(tmp_path):
    out = tmp_path / "f8.csv"
    assert main(["sweep", "--preset", "figure8", "--slots", "100", "--no-tune",
                 "--schemes", "benchmark", "--out", str(out)]) == 0
    assert len(list(csv.DictReader(out.open()))) == 4


def test_optimize(tmp_path, capsys):
    out = tmp_path / "surf.csv"
    assert main(["optimize", "--samples", "300", "--seed", "1", "--out", str(out)]) == 0
    assert "K=1" in capsys.readouterr().out
    first = out.read_text()
    assert main(["optimize", "--samples", "300", "--seed", "1", "--out", str(out)]) == 0
    assert out.read_text() == first


def test_optimize_qmax_one(tmp_path):
    out = tmp_path / "surf.csv"
    assert main(["optimize", "--samples", "100", "--set", "q_max=1", "--out", str(out)]) == 0
    assert {r["k"] for r in csv.DictReader(out.open())} == {"1"}


def test_markov(capsys):
    assert main(["markov", "--lam", "0.6", "--k", "3"]) == 0
    out = capsys.readouterr().out
    diff = float(out.strip().splitlines()[-1].split("=")[1])
    assert diff < 1e-9
    assert main(["markov", "--lam", "0.0", "--k", "1"]) == 0
    assert main(["markov", "--lam", "0.5", "--k", "10", "--q-max", "10"]) == 0
    assert main(["markov", "--lam", "0.5", "--k", "11", "--q-max", "10"]) == 2
    assert main(["markov", "--lam", "1.5", "--k", "1"]) == 2


def test_sop(capsys):
    assert main(["sop", "--trials", "500"]) == 0
    out = capsys.readouterr().out
    assert "R_th" in out and "Monte Carlo" in out

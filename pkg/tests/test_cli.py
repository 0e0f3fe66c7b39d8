import csv
import hashlib
import subprocess
import sys

import pytest
from nhgeom.cli import config_hash, main, parse_config_text, resolve_config
from nhgeom.errors import ConfigError


def read_manifest(d):
    lines = (d / "manifest.txt").read_text().splitlines()
    assert lines[0].startswith("# config_sha256=")
    return lines[0].split("=", 1)[1], [l.split(",") for l in lines[1:]]


def check_manifest(d):
    h, rows = read_manifest(d)
    for name, sha, n in rows:
        data = (d / name).read_bytes()
        assert hashlib.sha256(data).hexdigest() == sha
        assert len(data.decode().splitlines()) - 1 == int(n)
    return h, rows


def test_parse_config_text():
    cfg = parse_config_text("# comment\nexperiment = tdpt\nepsilon = 0.01  # inline\n\n")
    assert cfg == {"experiment": "tdpt", "epsilon": "0.01"}
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign")


def test_resolve_config():
    cfg = resolve_config("adiabatic", {"T": "2pi", "dt": "1e-4"})
    assert cfg["T"] == pytest.approx(6.283185307179586)
    with pytest.raises(ConfigError):
        resolve_config("adiabatic", {"bogus": "1"})
    with pytest.raises(ConfigError):
        resolve_config("adiabatic", {"dt": "-1"})
    with pytest.raises(ConfigError):
        resolve_config("adiabatic", {"model": "hxy"})
    with pytest.raises(ConfigError):
        resolve_config("tdpt", {"experiment": "wannier"})
    assert config_hash("tdpt", resolve_config("tdpt", {})) == config_hash("tdpt", resolve_config("tdpt", {"epsilon": "0.02"}))


def test_tdpt_run_deterministic(tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert main(["run", "tdpt", "--out-dir", str(d), "--set", "T=5"]) == 0
        outs.append(check_manifest(d))
    assert outs[0] == outs[1]
    rows = list(csv.reader((tmp_path / "a" / "tdpt_occupation.csv").open()))
    assert rows[0] == ["t", "n1_num", "n1_per", "delta"]
    assert float(rows[-1][0]) == pytest.approx(5.0)


def test_config_file_and_overrides(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("experiment = qgt-scan\nmodel = hf2\nnum = 3\nstart = -1\nstop = 1\n")
    d = tmp_path / "out"
    assert main(["qgt-scan", "--config", str(cfg), "--out-dir", str(d), "--set", "flavor=RR"]) == 0
    _, rows = check_manifest(d)
    assert rows[0][0] == "qgt_scan_hf2_RR.csv" and rows[0][2] == "3"


def test_adiabatic_small(tmp_path):
    d = tmp_path / "adia"
    args = ["adiabatic", "--model", "hf1", "--out-dir", str(d), "--threads", "2"]
    args += ["--set", "points=256", "--set", "T=0.05", "--set", "save_every=100"]
    assert main(args) == 0
    _, rows = check_manifest(d)
    assert rows[0][0] == "adiabatic_hf1_moments.csv"
    data = list(csv.DictReader((d / rows[0][0]).open()))
    assert float(data[0]["mean_full"]) == pytest.approx(-2.0, abs=1e-6)
    assert float(data[-1]["rel_l2"]) < 0.01


def test_wannier_and_extract(tmp_path):
    assert main(["wannier", "--out-dir", str(tmp_path / "w"), "--set", "nk=16"]) == 0
    check_manifest(tmp_path / "w")
    assert main(["extract-metric", "--model", "hxy", "--out-dir", str(tmp_path / "e"), "--set", "grid=2", "--threads", "2"]) == 0
    _, rows = check_manifest(tmp_path / "e")
    assert rows[0][2] == "4"


def test_config_error_writes_nothing(tmp_path, capsys):
    d = tmp_path / "bad"
    assert main(["adiabatic", "--out-dir", str(d), "--set", "bogus=1"]) == 2
    assert not d.exists()
    assert main(["tdpt", "--out-dir", str(d), "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["wannier", "--out-dir", str(d), "--model", "hxy"]) == 2
    assert main(["tdpt", "--out-dir", str(d), "--set", "noequals"]) == 2
    assert main(["nonsense"]) == 2
    assert not d.exists()
    assert "config error" in capsys.readouterr().err


def test_numeric_failure_exit_code(tmp_path, capsys):
    d = tmp_path / "cfl"
    assert main(["adiabatic", "--out-dir", str(d), "--set", "dt=0.01", "--set", "points=64"]) == 3
    assert "CFLViolation" in capsys.readouterr().err
    assert not d.exists()


def test_inline_matrices(tmp_path):
    d = tmp_path / "inline"
    args = ["tdpt", "--out-dir", str(d), "--set", "h0=0,0;0,1-0.1i", "--set", "h1=0,1;1,0", "--set", "T=2"]
    assert main(args) == 0
    bad = ["tdpt", "--out-dir", str(d), "--set", "h0=0,0;0,1", "--set", "h1=0,1,0;1,0,0;0,0,0"]
    assert main(bad) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "nhgeom", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "extract-metric" in r.stdout

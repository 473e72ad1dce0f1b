import json
import subprocess
import sys

import pytest

from heatdrift.cli import main, parse_modes, UsageError


def test_parse_modes():
    assert parse_modes("1,3-5", 8) == [1, 3, 4, 5]
    with pytest.raises(UsageError):
        parse_modes("", 8)
    with pytest.raises(UsageError):
        parse_modes("9", 8)


def test_empty_modes_usage_error(tmp_path, capsys):
    assert main(["filter", "--modes", "", "--out", str(tmp_path)]) == 2


def test_bad_config_usage_error(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("rho = -1\n")
    assert main(["stationary", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_truncation_is_numerical_error(tmp_path):
    assert main(["contraction", "--k-max", "8", "--out", str(tmp_path)]) == 3


def test_figure1_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["figure1", "--out", str(d), "--per-decade", "10"]) == 0
    for k in (1, 2, 4, 8):
        for v in ("dynamic", "stationary"):
            name = f"{v}_k{k}.csv"
            assert (a / name).read_bytes() == (b / name).read_bytes()
    summary = json.loads((a / "figure1_summary.json").read_text())
    assert [r["k"] for r in summary] == [1, 2, 4, 8]


def test_filter_and_ensemble_deterministic(tmp_path):
    args = ["--modes", "1,2", "--t-end", "2", "--seed", "4"]
    for cmd in ("filter", "ensemble", "simulate"):
        a, b = tmp_path / f"{cmd}a", tmp_path / f"{cmd}b"
        assert main([cmd, "--out", str(a), *args]) == 0
        assert main([cmd, "--out", str(b), "--jobs", "2", *args]) == 0
        for f in a.glob("*.csv"):
            assert f.read_bytes() == (b / f.name).read_bytes()


def test_headers(tmp_path):
    assert main(["filter", "--modes", "1", "--t-end", "1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "filter_k1.csv").read_text().splitlines()[0] == "k,t,ubar,fbar,sigma_u,sigma_uf,sigma_f,k_u,k_f"
    assert (tmp_path / "dynamic_k1.csv").read_text().splitlines()[0].endswith("mu,m_u,m_f,p_u,p_uf,p_f,V")
    assert main(["ensemble", "--modes", "1", "--t-end", "0.1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "ensemble_k1.csv").read_text().splitlines()[0] == "k,t,N,mean_u,mean_f,var_u,cov_uf,var_f"


def test_contraction_and_rates(tmp_path, capsys):
    assert main(["contraction", "--out", str(tmp_path), "--per-decade", "10"]) == 0
    assert (tmp_path / "contraction.csv").read_text().splitlines()[0] == "t,phi_sq_total,K_used,tail_bound,slope_running"
    capsys.readouterr()
    assert main(["rates", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "-0.1667" in out


def test_rates_missing(tmp_path):
    assert main(["rates", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    r = subprocess.run(
        [sys.executable, "-m", "heatdrift", "reduced", "--modes", "8", "--t-end", "10", "--out", str(tmp_path)],
        capture_output=True,
    )
    assert r.returncode == 0
    assert (tmp_path / "reduced_k8.csv").exists()

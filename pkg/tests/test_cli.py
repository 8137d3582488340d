import json
import math

import numpy as np
import pytest

from msalab.cli import EXIT_CONFIG, EXIT_OK, main
from msalab.config import RunConfig
from msalab.hamiltonian import closed_form_dirichlet
from msalab.io import read_csv, write_csv
from msalab.pipeline import PROFILE_COLUMNS, emit_plot_data

SMALL = """
[schedule]
L0 = 4
k_max = 1
[experiment]
categories = I,II,III
trials = 4
grid_points = 11
E1_samples = 5
[lgri]
samples = 5
outer_L = 8
inner_L = 3
[decay]
L = 8
seeds = 2
count = 5
"""


@pytest.fixture
def small_ini(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL)
    return p


def test_spectrum_closed_form(tmp_path, capsys):
    ini = tmp_path / "zero.ini"
    ini.write_text("[disorder]\namplitude_max_M = 0\n[model]\nparticles = 1\n")
    code = main(["--config", str(ini), "--out", str(tmp_path), "spectrum", "--L", "1"])
    assert code == EXIT_OK
    printed = [float(x) for x in capsys.readouterr().out.split()]
    assert np.allclose(printed, closed_form_dirichlet(3), rtol=1e-15)
    assert (tmp_path / "spectrum.txt").exists()


def test_invalid_alpha_exit_code(tmp_path, capsys):
    ini = tmp_path / "bad.ini"
    ini.write_text("[msa]\nalpha = 2.5\n")
    assert main(["--config", str(ini), "spectrum"]) == EXIT_CONFIG
    err = capsys.readouterr().err
    assert "α ∈ (1,2)" in err and "msa.alpha" in err and str(ini) in err


def test_usage_errors_exit_one(capsys):
    assert main(["no-such-command"]) == EXIT_CONFIG
    assert main(["green"]) == EXIT_CONFIG          # --E is required


def test_flags_before_and_after_subcommand(tmp_path, small_ini):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["--config", str(small_ini), "--seed", "5", "--out", str(a), "spectrum"]) == 0
    assert main(["spectrum", "--config", str(small_ini), "--seed", "5", "--out", str(b)]) == 0
    assert (a / "spectrum.txt").read_bytes() == (b / "spectrum.txt").read_bytes()


def test_green_table(tmp_path, small_ini):
    assert main(["--config", str(small_ini), "--out", str(tmp_path), "green", "--E", "0.5"]) == 0
    lines = (tmp_path / "green.dat").read_text().splitlines()
    assert lines[0] == "# cell distance norm"
    assert len(lines) == 1 + 9 * 9


def test_classify_with_oracles(tmp_path, small_ini):
    code = main(["--config", str(small_ini), "--out", str(tmp_path), "--exhaustive-oracles",
                 "classify", "--L", "3", "--m", "0.3"])
    # L = 3 leaves no smaller tunneling sub-scale
    assert code == EXIT_OK
    recs = [json.loads(x) for x in (tmp_path / "classify.jsonl").read_text().splitlines()]
    assert len(recs) == 11 and recs[0]["tunneling"] is None
    for r in recs:
        o = r["witness"]["oracle"]
        assert o["resonant"] == r["resonant"] and o["singular"] == r["singular"]


def test_msa_run_and_plot_data(tmp_path, small_ini):
    out = tmp_path / "run"
    args = ["--config", str(small_ini), "--out", str(out)]
    assert main(args + ["msa-run"]) == EXIT_OK
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schedule"]["scales"] == [4, 8]
    assert summary["C_geom_source"] == "measured" and summary["C_geom"] > 0
    assert len(read_csv(out / "results.csv")) == 6
    assert main(args + ["eigen-decay"]) == EXIT_OK
    assert main(args + ["plot-data"]) == EXIT_OK
    for name in ("trend.dat", "decay_profile.dat", "lgri_hist.dat"):
        assert (out / name).read_text().startswith("# ")
    trend = (out / "trend.dat").read_text().splitlines()
    assert len(trend) == 7

    # re-running from scratch reproduces every table byte for byte
    again = tmp_path / "again"
    args2 = ["--config", str(small_ini), "--out", str(again)]
    for cmd in ("msa-run", "eigen-decay", "plot-data"):
        assert main(args2 + [cmd]) == EXIT_OK
    for name in ("results.csv", "trials.csv", "lgri_ratios.csv", "decay.csv",
                 "decay_profile.csv", "trend.dat", "decay_profile.dat", "lgri_hist.dat"):
        assert (out / name).read_bytes() == (again / name).read_bytes(), name


def test_plot_data_missing_artifacts(tmp_path):
    assert main(["--out", str(tmp_path), "plot-data"]) == EXIT_CONFIG


def test_empty_results_give_header_only(tmp_path):
    write_csv(tmp_path / "results.csv", ("category", "L_k", "p_hat_S", "ci_lo", "ci_hi",
                                         "target_Lk_pow"), [])
    emit_plot_data(tmp_path, which=("trend",))
    assert (tmp_path / "trend.dat").read_text() == \
        "# category L_k p_hat_S ci_lo ci_hi reference\n"


def test_profile_rows_above_floor(tmp_path):
    rows = [("0 0", 0, 1.0), ("0 1", 1, 0.1), ("0 2", 2, 1e-13), ("1 1", 1, 0.2), ("2 2", 2, 0.0)]
    write_csv(tmp_path / "decay_profile.csv", PROFILE_COLUMNS, rows)
    (tmp_path / "decay_summary.json").write_text(json.dumps(
        {"profile_fit": {"m_hat": 1.5, "intercept": 0.1}, "noise_floor": 1e-12}))
    emit_plot_data(tmp_path, which=("profile",))
    lines = (tmp_path / "decay_profile.dat").read_text().splitlines()[1:]
    assert [ln.split()[0] for ln in lines] == ["0,0", "0,1", "1,1"]
    cell, r, logn, fit = lines[1].split()
    assert float(logn) == pytest.approx(math.log(0.1))
    assert float(fit) == pytest.approx(0.1 - 1.5)


def test_check_subset(tmp_path, small_ini):
    code = main(["--config", str(small_ini), "--out", str(tmp_path), "check", "--only", "1,11"])
    assert code == EXIT_OK
    report = json.loads((tmp_path / "check_report.json").read_text())
    assert [r["criterion"] for r in report] == ["1", "11"]
    assert all(r["status"] == "PASS" for r in report)


def test_calibrate_cgeom(tmp_path, small_ini):
    code = main(["--config", str(small_ini), "--out", str(tmp_path), "calibrate-cgeom",
                 "--particles", "1"])
    assert code == EXIT_OK
    rep = json.loads((tmp_path / "cgeom.json").read_text())
    assert rep["particles"] == 1 and rep["holdout_violations"] == 0
    assert 0 < rep["C_geom"] <= rep["cap"]

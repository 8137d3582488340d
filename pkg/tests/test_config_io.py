import os

import pytest
from hypothesis import given, settings, strategies as st

from msalab.config import ConfigError, RunConfig, load_config, parse_config
from msalab.io import atomic_write_text, csv_text, fmt, read_csv, table_text, write_csv


def test_defaults_validate():
    cfg = RunConfig().validate()
    assert cfg.msa.alpha == 1.5 and cfg.msa.p == 3 and cfg.msa.q == 19


@settings(max_examples=60, deadline=None)
@given(alpha=st.floats(1.01, 1.99), m0=st.floats(0.01, 5.0), L0=st.integers(2, 30),
       trials=st.integers(0, 10**4), seed=st.integers(0, 2**64 - 1),
       E1=st.one_of(st.none(), st.floats(0.1, 50.0)), cats=st.sampled_from(["I", "I,II", "II,III"]),
       exhaustive=st.booleans(), out=st.text("abcxyz/_-", min_size=1, max_size=12))
def test_round_trip(alpha, m0, L0, trials, seed, E1, cats, exhaustive, out):
    cfg = RunConfig()
    cfg.msa.alpha, cfg.msa.mass_m0 = alpha, m0
    cfg.schedule.L0 = L0
    cfg.schedule.max_scale = max(cfg.schedule.max_scale, L0)
    cfg.experiment.trials, cfg.experiment.energy_E1 = trials, E1
    cfg.experiment.categories, cfg.experiment.exhaustive_subcubes = cats, exhaustive
    cfg.run.seed, cfg.run.out_dir = seed, out
    again = parse_config(cfg.to_ini())
    assert again == cfg
    assert parse_config(again.to_ini()).to_ini() == cfg.to_ini()


@pytest.mark.parametrize("text, key, phrase", [
    ("[msa]\nalpha = 2.5\n", "msa.alpha", "α ∈ (1,2)"),
    ("[msa]\nq = 15\n", "msa.q", "q > 3p + 9"),
    ("[msa]\np = 2\n", "msa.p", "p > 3d/2 + 1"),
    ("[msa]\nM_budget = 3\n", "msa.M_budget", "M = 2"),
    ("[model]\nparticles = 3\n", "model.particles", "1 or 2"),
    ("[disorder]\namplitude_max_M = -1\n", "disorder.amplitude_max_M", "M >= 0"),
    ("[model]\nmesh_mode = continuum\ngrid_spacing_h = 0.3\n", "model.mesh_mode", "1/h"),
    ("[lgri]\nouter_L = 6\n", "lgri.outer_L", "shrunk by 3"),
    ("[experiment]\nenergy_E1 = -1\n", "experiment.energy_E1", "E1* > E0*"),
    ("[bogus]\nx = 1\n", "bogus", "unknown section"),
    ("[msa]\nalpah = 1.5\n", "msa.alpah", "unknown key"),
    ("[schedule]\nL0 = eight\n", "schedule.L0", "cannot parse"),
])
def test_validation_messages(tmp_path, text, key, phrase):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    with pytest.raises(ConfigError) as err:
        load_config(path)
    assert err.value.key == key
    assert phrase in str(err.value) and str(path) in str(err.value)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_shipped_default_config_loads():
    here = os.path.dirname(__file__)
    cfg = load_config(os.path.join(here, "..", "configs", "default.ini"))
    assert cfg.schedule.L0 == 8 and cfg.experiment.trials == 200


def test_fmt_seventeen_digits():
    assert fmt(0.1) == "0.10000000000000001"
    assert float(fmt(1 / 3)) == 1 / 3
    assert fmt(3) == "3" and fmt(True) == "True" and fmt("I") == "I"


def test_atomic_write_leaves_no_temporaries(tmp_path):
    target = tmp_path / "sub" / "out.txt"
    atomic_write_text(target, "first\n")
    atomic_write_text(target, "second\n")
    assert target.read_text() == "second\n"
    assert sorted(p.name for p in target.parent.iterdir()) == ["out.txt"]


def test_failed_write_keeps_old_content(tmp_path):
    target = tmp_path / "out.txt"
    atomic_write_text(target, "intact\n")
    with pytest.raises(TypeError):
        atomic_write_text(target, None)
    assert target.read_text() == "intact\n"
    assert [p.name for p in tmp_path.iterdir()] == ["out.txt"]


def test_csv_and_table_text(tmp_path):
    rows = [("I", 0, 0.25), ("II", 1, 1 / 3)]
    write_csv(tmp_path / "r.csv", ("cat", "k", "p"), rows)
    back = read_csv(tmp_path / "r.csv")
    assert back[1]["cat"] == "II" and float(back[1]["p"]) == 1 / 3
    assert csv_text(("a",), []) == "a\n"
    assert table_text(("a", "b"), []) == "# a b\n"
    assert table_text(("a", "b"), [(1, 0.5)]) == "# a b\n1 0.5\n"

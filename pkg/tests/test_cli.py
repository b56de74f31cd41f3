import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lambdasr import cli, runner
from lambdasr.config import RunConfig, emit_config, parse_config
from lambdasr.errors import ConfigError, IntegrationError
from lambdasr.integrator import Tolerances
from lambdasr.meanfield import SeedPolicy
from lambdasr.model import Geometry, SystemParams
from lambdasr.observables import COLUMNS
from lambdasr.scenarios import SCENARIOS, scenario, scenario_text

SMALL = """\
[run]
mode = meanfield
[params]
n_atoms = 1000
gamma1 = 1.0
gamma2 = 0.05
mu1 = 0.5
mu2 = 0.5
omega_bar = 0.2
[time]
t_end = 20
unit = fast
n_points = 201
"""


def test_reference_scenario_parses():
    cfg = parse_config(scenario_text("fig2"))
    assert cfg.mode == "meanfield"
    p = cfg.params
    assert (p.n_atoms, p.rabi, p.mu2) == (10**7, 0.0, 1e-5)
    assert p.gamma2 / p.gamma1 == pytest.approx(1e-8)
    assert p.mu2 / p.mu1 == pytest.approx(1 / 16)
    assert scenario("fig3").params.omega_bar == pytest.approx(0.47, rel=1e-14)


def test_empty_file_lists_all_missing_keys():
    with pytest.raises(ConfigError) as exc:
        parse_config("")
    msg = str(exc.value)
    for key in ("[run] mode", "[params] n_atoms", "[params] gamma1", "[params] gamma2", "[time] t_end"):
        assert key in msg


def test_errors_name_section_key_and_line():
    text = SMALL.replace("omega_bar = 0.2", "omega_bar = -0.1\ncolour = blue").replace("n_points = 201", "n_points = many")
    with pytest.raises(ConfigError) as exc:
        parse_config(text + "[extras]\nx = 1\n")
    msg = str(exc.value)
    assert "[params] omega_bar (line 9): must be >= 0" in msg
    assert "[params] colour (line 10): unknown key" in msg
    assert "[time] n_points (line 14): expected an integer" in msg
    assert "unknown section [extras]" in msg


def test_mode_specific_requirements():
    with pytest.raises(ConfigError, match=r"\[sweep\] omega_bar"):
        parse_config(SMALL.replace("mode = meanfield", "mode = sweep"))
    with pytest.raises(ConfigError, match=r"\[compare\] run_a"):
        parse_config("[run]\nmode = compare\n")
    with pytest.raises(ConfigError, match="single-atom"):
        parse_config(SMALL.replace("mode = meanfield", "mode = single-atom"))
    with pytest.raises(ConfigError, match="either rabi or omega_bar"):
        parse_config(SMALL.replace("omega_bar = 0.2", "omega_bar = 0.2\nrabi = 3"))
    with pytest.raises(ConfigError, match="positions"):
        parse_config(SMALL + "[geometry]\npositions = 0,0,0; 1,0\n")


def test_env_and_flag_overrides():
    env = {"LAMBDASR__SOLVER__REL": "1e-7", "LAMBDASR__OUTPUT__DIR": "from_env", "PATH": "/bin"}
    cfg = parse_config(SMALL, env=env, overrides={("output", "dir"): "from_flag"})
    assert cfg.tol.rel == 1e-7 and cfg.out_dir == "from_flag"
    with pytest.raises(ConfigError, match="environment LAMBDASR__SOLVER__REL"):
        parse_config(SMALL, env={"LAMBDASR__SOLVER__REL": "tight"})
    with pytest.raises(ConfigError, match="malformed"):
        parse_config(SMALL, env={"LAMBDASR__REL": "1"})


def test_round_trip_of_every_scenario():
    for name in SCENARIOS:
        cfg = scenario(name)
        assert parse_config(emit_config(cfg)) == cfg


@settings(max_examples=60, deadline=None)
@given(
    n=st.integers(1, 4), g2=st.floats(0, 5), mu=st.floats(1e-3, 1), rabi=st.floats(0, 100),
    t_end=st.floats(1e-3, 1e4), rel=st.floats(1e-13, 1e-3), eps=st.floats(0, 10),
    pol=st.sampled_from(["none", "fluctuation"]), dicke=st.booleans(), svg=st.booleans(),
)
def test_emit_parse_identity(n, g2, mu, rabi, t_end, rel, eps, pol, dicke, svg):
    geom = None if dicke else Geometry([(0.3 * j, 0.1 * j * j, 0.0) for j in range(n)], 7.1, 0.3)
    cfg = RunConfig(mode="exact", params=SystemParams(n, 1.0, g2, mu, mu, rabi), dicke=dicke,
                    geometry=geom, t_end=t_end, n_points=17, spacing="log",
                    tol=Tolerances(rel, rel * 1e-3), seed=SeedPolicy(pol, eps), out_dir="x y", svg=svg)
    assert parse_config(emit_config(cfg)) == cfg


def run_small(tmp_path, name="run", extra=None):
    ov = {("output", "dir"): str(tmp_path / name)}
    ov.update(extra or {})
    return runner.run(parse_config(SMALL, overrides=ov))


def test_run_writes_artifacts(tmp_path):
    res = run_small(tmp_path)
    names = sorted(p.name for p in res.artifacts)
    assert names == ["intensities.svg", "manifest.json", "populations.svg", "trajectory.csv"]
    text = (res.out_dir / "trajectory.csv").read_text(encoding="utf-8")
    assert text.splitlines()[0] == ",".join(COLUMNS)
    assert text.endswith("\n") and len(text.splitlines()) == 202
    manifest = json.loads((res.out_dir / "manifest.json").read_text())
    for key in ("config", "scaled", "solver", "artifacts", "started", "finished", "engine_version"):
        assert key in manifest
    assert manifest["artifacts"]["trajectory.csv"] == runner._sha256(res.out_dir / "trajectory.csv")
    assert runner.manifest_config(res.out_dir) == parse_config(SMALL, overrides={("output", "dir"): str(res.out_dir)})


def test_run_is_deterministic(tmp_path):
    a = run_small(tmp_path, "a", {("output", "log_time"): "true"})
    b = run_small(tmp_path, "b", {("output", "log_time"): "true"})
    for name in ("trajectory.csv", "populations.svg", "intensities.svg"):
        assert (a.out_dir / name).read_bytes() == (b.out_dir / name).read_bytes()


def test_csv_round_trip(tmp_path):
    res = run_small(tmp_path, extra={("output", "svg"): "off"})
    back = runner.load_run(res.out_dir)
    for c in COLUMNS:
        assert np.array_equal(back[c], res.trajectory[c])
    assert back.metadata["params"]["n_atoms"] == 1000


def test_sweep(tmp_path):
    text = SMALL.replace("mode = meanfield", "mode = sweep") + "[sweep]\nomega_bar = 0, 0.1, 0.47, 1.0\nworkers = 2\n"
    cfg = parse_config(text, overrides={("output", "dir"): str(tmp_path / "sw"), ("output", "svg"): "off"})
    res = runner.run(cfg)
    subdirs = sorted(p.name for p in (tmp_path / "sw").iterdir() if p.is_dir())
    assert subdirs == ["point_000", "point_001", "point_002", "point_003"]
    rows = (tmp_path / "sw" / "summary.csv").read_text().splitlines()
    assert len(rows) == 5 and rows[0].startswith("point,omega_bar,i1_peak_time")
    # summary values are the pulse metrics of each stored run
    from lambdasr.analysis import pulse_metrics
    for i in range(4):
        m = pulse_metrics(runner.load_run(tmp_path / "sw" / f"point_{i:03d}"))
        assert float(rows[i + 1].split(",")[3]) == pytest.approx(m.i1_peak_value, rel=1e-15)
    assert res.status == 0


def test_compare_reports(tmp_path):
    a = run_small(tmp_path, "a", {("output", "svg"): "off"})
    rep = runner.compare(a.out_dir, a.out_dir, tolerance=0.0)
    assert rep.passed and all(v["max"] == 0 for v in rep.columns.values())
    b = run_small(tmp_path, "b", {("output", "svg"): "off", ("solver", "rel"): "1e-6", ("solver", "abs"): "1e-9"})
    c = run_small(tmp_path, "c", {("output", "svg"): "off", ("solver", "rel"): "1e-9", ("solver", "abs"): "1e-12"})
    rep = runner.compare(b.out_dir, c.out_dir, ["p1_over_N", "p2_over_N", "p3_over_N"], 1e-4)
    assert rep.passed
    far = run_small(tmp_path, "far", {("output", "svg"): "off", ("time", "t_end"): "5"})
    shifted = runner.load_run(far.out_dir)
    shifted.columns["t_scaled_fast"] = shifted["t_scaled_fast"] + 100
    with pytest.raises(ConfigError, match="overlap"):
        runner.compare(a.out_dir, shifted)


def test_single_atom_vs_exact(tmp_path):
    base = "[params]\ngamma1 = 0.4\ngamma2 = 0.1\n[time]\nt_end = 6\nunit = physical\nn_points = 301\n"
    sa = runner.run(parse_config("[run]\nmode = single-atom\n" + base,
                                 overrides={("output", "dir"): str(tmp_path / "sa"), ("output", "svg"): "off"}))
    ex = runner.run(parse_config("[run]\nmode = exact\n" + base.replace("[params]", "[params]\nn_atoms = 1"),
                                 overrides={("output", "dir"): str(tmp_path / "ex"), ("output", "svg"): "off"}))
    rep = runner.compare(sa.out_dir, ex.out_dir, tolerance=1e-8)
    assert rep.passed, rep.columns


def test_cli_exit_codes(tmp_path, capsys, monkeypatch):
    cfg = tmp_path / "c.ini"
    cfg.write_text(SMALL.replace("n_atoms = 1000", "n_atoms = 5").replace("mode = meanfield", "mode = exact"))
    assert cli.main(["exact", "--config", str(cfg), "--out", str(tmp_path / "e")]) == 3
    assert cli.main(["meanfield", "--config", str(tmp_path / "missing.ini")]) == 2
    assert cli.main(["meanfield"]) == 2
    assert "missing required keys" in capsys.readouterr().err
    cfg.write_text(SMALL)
    out = tmp_path / "m"
    assert cli.main(["meanfield", "--config", str(cfg), "--out", str(out), "--svg", "off",
                     "--tol-rel", "1e-9", "--tol-abs", "1e-12", "--seed-policy", "fluctuation"]) == 0
    m = runner.manifest_config(out)
    assert (m.tol.rel, m.tol.abs, m.seed.kind, m.svg) == (1e-9, 1e-12, "fluctuation", False)
    assert cli.main(["analyze", str(out), "--out", str(tmp_path / "an")]) == 0
    assert json.loads((tmp_path / "an" / "metrics.json").read_text())["i1_peak_count"] >= 1
    assert cli.main(["compare", str(out), str(out), "--out", str(tmp_path / "cmp")]) == 0
    out2 = tmp_path / "m2"
    assert cli.main(["meanfield", "--config", str(cfg), "--out", str(out2), "--svg", "off"]) == 0
    assert cli.main(["compare", str(out), str(out2), "--tolerance", "0", "--out", str(tmp_path / "cmp2")]) == 5

    def boom(_cfg):
        raise IntegrationError("step size underflow", 1.0, None)

    monkeypatch.setattr(runner, "run", boom)
    assert cli.main(["meanfield", "--config", str(cfg)]) == 4


def test_cli_dicke_flag_and_env(tmp_path, monkeypatch):
    cfg = tmp_path / "x.ini"
    cfg.write_text("[run]\nmode = exact\n[params]\nn_atoms = 2\ngamma1 = 1\ngamma2 = 0\n[time]\nt_end = 1\nn_points = 11\n")
    monkeypatch.setenv("LAMBDASR__OUTPUT__SVG", "off")
    assert cli.main(["exact", "--config", str(cfg), "--dicke", "--out", str(tmp_path / "d")]) == 0
    m = runner.manifest_config(tmp_path / "d")
    assert m.dicke and not m.svg


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(ConfigError, match="output directory"):
        runner.run(parse_config(SMALL, overrides={("output", "dir"): str(blocker / "sub")}))

import json
import stat

import numpy as np
import pytest

from nfisac import cli, designs
from nfisac.errors import NumericalLimit
from nfisac.scenario import ScenarioConfig, TargetSpec, read_matrix_csv, save_scenario, symmetric_bistatic

from .conftest import small_layout


@pytest.fixture
def scen(tmp_path):
    p = tmp_path / "s.json"
    save_scenario(small_layout(3, 3), p)
    return p


def _run(*argv):
    return cli.main([str(a) for a in argv])


def test_design_writes_solution_and_manifest(tmp_path, scen):
    out = tmp_path / "sol.json"
    assert _run("design", "--scenario", scen, "--objective", "illum", "--out", out) == 0
    d = json.loads(out.read_text())
    assert d["solver_status"] == "optimal" and "R_X" in d and "scenario" in d
    man = json.loads((tmp_path / "sol.json.manifest.json").read_text())
    assert man["status"] == "optimal" and man["outputs"] == [str(out)]
    assert {"version", "git_describe", "wall_time_s", "settings"} <= set(man)
    assert stat.S_IMODE(out.stat().st_mode) == 0o644


def test_design_output_is_deterministic(tmp_path, scen):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert _run("design", "--scenario", scen, "--objective", "crb", "--out", a) == 0
    assert _run("design", "--scenario", scen, "--objective", "crb", "--out", b) == 0
    assert a.read_bytes() == b.read_bytes()


def test_infeasible_exit_code(tmp_path):
    p = tmp_path / "hard.json"
    save_scenario(small_layout(3, 3, sinr_db=90.0), p)
    out = tmp_path / "x.json"
    assert _run("design", "--scenario", p, "--objective", "crb", "--out", out) == 2
    assert not out.exists()
    man = json.loads((tmp_path / "x.json.manifest.json").read_text())
    assert man["status"] == "infeasible" and man["diagnostics"]["max_sinr"]


def test_numerical_limit_exit_code(tmp_path, scen, monkeypatch):
    def stalled(*a, **k):
        raise NumericalLimit("stalled", result=None)

    monkeypatch.setattr(designs, "solve", stalled)
    assert _run("design", "--scenario", scen, "--objective", "illum", "--out", tmp_path / "o.json") == 3


def test_config_errors_exit_one(tmp_path, scen):
    assert _run("design", "--scenario", tmp_path / "missing.json", "--objective", "crb", "--out", tmp_path / "o.json") == 1
    with pytest.raises(SystemExit) as err:
        _run("design", "--objective", "crb")
    assert err.value.code == 1
    cfg = small_layout(3, 3)
    zero = ScenarioConfig(**{**cfg.__dict__, "targets": (TargetSpec(cfg.targets[0].position, 0.0), cfg.targets[1])})
    p = tmp_path / "zero.json"
    save_scenario(zero, p)
    assert _run("design", "--scenario", p, "--objective", "echo", "--out", tmp_path / "o.json") == 1
    assert _run("channel", "--scenario", scen, "--matrix", "Z", "--out", tmp_path / "z.csv") == 1


def test_channel_dump(tmp_path, scen):
    out = tmp_path / "v.csv"
    assert _run("channel", "--scenario", scen, "--matrix", "dV_z", "--out", out) == 0
    assert read_matrix_csv(out).shape == (9, 2)


def test_beampattern(tmp_path, scen):
    sol = tmp_path / "sol.json"
    _run("design", "--scenario", scen, "--objective", "illum", "--out", sol)
    out = tmp_path / "bp.csv"
    assert _run("beampattern", "--solution", sol, "--plane", "x=0", "--range-y=-0.5:0.5:5", "--range-z", "0.1:1.1:4", "--out", out) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "y_m,z_m,power_w" and len(lines) == 21
    assert _run("beampattern", "--solution", sol, "--plane", "y=0", "--range-y", "0:1:2", "--range-z", "0:1:2", "--out", out) == 1
    assert _run("beampattern", "--solution", sol, "--range-y", "0:1", "--range-z", "0:1:2", "--out", out) == 1


def test_tradeoff_curve_and_endpoints(tmp_path):
    p = tmp_path / "bi.json"
    cfg = symmetric_bistatic(4)
    save_scenario(cfg, tmp_path / "on_axis.json")
    assert _run("tradeoff", "--scenario", tmp_path / "on_axis.json", "--points", 3, "--out", tmp_path / "one.csv") == 0
    assert len((tmp_path / "one.csv").read_text().splitlines()) == 2
    cfg = symmetric_bistatic(4, offset=0.25 * cfg.rx.center[2])
    save_scenario(cfg, p)
    out = tmp_path / "curve.csv"
    assert _run("tradeoff", "--scenario", p, "--points", 3, "--out", out) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 4 and all(line.endswith(",optimal") for line in lines[1:])
    ep = json.loads((tmp_path / "curve.endpoints.json").read_text())
    assert ep["gamma_c"] >= ep["gamma_s"]
    dist = tmp_path / "dist.csv"
    D = cfg.rx.center[2]
    assert _run("tradeoff", "--scenario", p, f"--d-range={-D / 4}:{D / 4}:3", "--out", dist) == 0
    rows = np.loadtxt(dist, delimiter=",", skiprows=1)
    assert rows.shape == (3, 6)


def test_tradeoff_needs_gamma_range_for_multi_user(tmp_path, scen):
    assert _run("tradeoff", "--scenario", scen, "--out", tmp_path / "c.csv") == 1
    out = tmp_path / "c.csv"
    assert _run("tradeoff", "--scenario", scen, "--objective", "illum", "--points", 2, "--gamma-min-db", 0, "--gamma-max-db", 10, "--out", out) == 0


def test_validate(scen, capsys):
    assert _run("validate", "--scenario", scen, "--level", "full") == 0
    text = capsys.readouterr().out
    assert "all checks passed" in text and "fim-oracle" in text

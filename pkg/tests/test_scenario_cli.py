import json
import subprocess
import sys

import pytest

from osmium.cli import EXIT_CONFIG, EXIT_ILLPOSED, EXIT_OK, EXIT_SOLVER, bundled_scenario, list_bundled, main
from osmium.errors import ConfigError
from osmium.output import read_csv, read_vtk_sections
from osmium.scenario import load_scenario, resolve
from osmium.verify import CHECKS

from conftest import box_scenario

GIVEN = {"left": {"kind": "given", "value": -0.5}, "right": {"kind": "given", "value": 0.5}}


def _write(tmp_path, cfg, name="s.scn"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return path


def _run(*argv):
    return main([str(a) for a in argv])


def test_bundled_scenarios_resolve():
    names = list_bundled()
    for required in ("equilibrium", "missing_constraint", "mini_hull_steady", "mini_hull_transient"):
        assert required in names
    for name in names:
        load_scenario(bundled_scenario(name))


def test_echo_round_trip():
    scn = load_scenario(bundled_scenario("mini_hull_transient"))
    again = load_scenario(json.loads(scn.echo()))
    assert again.config == scn.config
    assert again.echo() == scn.echo()


@pytest.mark.parametrize("bad", [
    {"name": "x"},
    dict(box_scenario(), geometry={"kind": "hexagon"}),
    dict(box_scenario(), colour="blue"),
    [1, 2, 3],
])
def test_resolve_rejects(bad):
    with pytest.raises(ConfigError):
        resolve(bad)


@pytest.mark.parametrize("patch", [
    {"initial": {"x_nu": [0.5, 0.5]}},
    {"order": 3},
    {"material": {"eos": {"kind": "ideal_gas"}}},
    {"solver": {"tol": "small"}},
])
def test_build_errors_are_config_errors(patch):
    cfg = box_scenario()
    for k, v in patch.items():
        cfg[k] = {**cfg[k], **v} if isinstance(cfg.get(k), dict) else v
    with pytest.raises(ConfigError):
        load_scenario(cfg).build("steady")


def test_config_error_exit_code(tmp_path):
    bad = tmp_path / "bad.scn"
    bad.write_text("{not json")
    assert _run("steady", "--scenario", bad, "--out", tmp_path / "o1") == EXIT_CONFIG
    assert _run("steady", "--scenario", tmp_path / "absent.scn", "--out", tmp_path / "o2") == EXIT_CONFIG


def test_missing_constraint_exit_code(tmp_path, capsys):
    assert _run("steady", "--scenario", "missing_constraint", "--out", tmp_path) == EXIT_SOLVER
    assert "SingularLinearSystem" in capsys.readouterr().err
    assert (tmp_path / "scenario.json").exists()


def test_illposed_exit_code_and_override(tmp_path):
    hull_eos = {"kind": "density_polynomial", "coeffs": [1006.0, 2600.0], "salt": 1}
    cfg = box_scenario(current=GIVEN, eos=hull_eos, nx=2, time={"steps": 1})
    path = _write(tmp_path, cfg)
    assert _run("transient", "--scenario", path, "--out", tmp_path / "a") == EXIT_ILLPOSED
    assert (tmp_path / "a" / "scenario.json").exists()
    # with the override the run proceeds; the over-determined system is then singular
    assert _run("transient", "--scenario", path, "--out", tmp_path / "b", "--override-illposed") == EXIT_SOLVER
    report = json.loads((tmp_path / "b" / "report.json").read_text())
    assert "over-determine" in report["warning"]
    assert report["error"].startswith("SingularLinearSystem")


def test_steady_outputs_are_deterministic(tmp_path):
    path = _write(tmp_path, box_scenario(current=GIVEN, nx=3))
    for d in ("r1", "r2"):
        assert _run("steady", "--scenario", path, "--out", tmp_path / d) == EXIT_OK
    for f in ("convergence.csv", "report.json", "solution.vtk", "scenario.json"):
        assert (tmp_path / "r1" / f).read_bytes() == (tmp_path / "r2" / f).read_bytes()
    report = json.loads((tmp_path / "r1" / "report.json").read_text())
    assert set(report["scales"]) >= {"L_m", "c_ref_mol_per_m3", "D_ref_m2_per_s", "T_K", "time_s"}
    assert "case (i)" in report["constraint_analysis"]
    assert json.loads((tmp_path / "r1" / "scenario.json").read_text()) == load_scenario(path).config


def test_vtk_layout(tmp_path):
    path = _write(tmp_path, box_scenario(current=GIVEN, nx=3))
    assert _run("steady", "--scenario", path, "--out", tmp_path) == EXIT_OK
    vtk = tmp_path / "solution.vtk"
    head = vtk.read_text().splitlines()[:4]
    assert head[0] == "# vtk DataFile Version 2.0" and head[2] == "ASCII"
    assert head[3] == "DATASET UNSTRUCTURED_GRID"
    sec = read_vtk_sections(vtk)
    assert sec["CELLS"] == sec["CELL_TYPES"] == sec["CELL_DATA"] == 18
    assert sec["POINTS"] == sec["POINT_DATA"] == 16
    text = vtk.read_text()
    for name in ("VECTORS velocity", "SCALARS pressure", "SCALARS x_nu_0", "VECTORS current_flux"):
        assert name in text


def test_transient_snapshots_and_tables(tmp_path):
    cfg = box_scenario(current=GIVEN, nx=2, time={"steps": 3}, output={"snapshot_every": 2},
                       initial={"x_nu": [0.85, 0.075], "consistent": True})
    path = _write(tmp_path, cfg)
    assert _run("transient", "--scenario", path, "--out", tmp_path / "out") == EXIT_OK
    out = tmp_path / "out"
    assert sorted(p.name for p in out.glob("snapshot_*.vtk")) == [
        "snapshot_0000.vtk", "snapshot_0002.vtk", "snapshot_0003.vtk"]
    header, rows = read_csv(out / "transient.csv")
    assert header[:6] == ["step", "time_s", "newton_iterations", "residual", "E1", "E2"]
    assert len(rows) == 4
    report = json.loads((out / "report.json").read_text())
    assert max(report["relative_moles_drift"]) <= 1e-8
    assert "consistent_initialization_iterations" in report


def test_check_command(tmp_path):
    assert _run("check", "--out", tmp_path) == EXIT_OK
    header, rows = read_csv(tmp_path / "checks.csv")
    assert len(rows) == len(CHECKS)
    assert all(r[1] == "1" for r in rows)


def test_appendix_a_degenerate(tmp_path, capsys):
    assert _run("appendix-a", "--A", 2, "--B", 0, "--out", tmp_path) == EXIT_OK
    text = capsys.readouterr().out
    assert "degenerate" in text
    assert (tmp_path / "both_constraints.csv").exists()


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "osmium", "list"], capture_output=True, text=True, check=True)
    assert "equilibrium" in res.stdout.split()

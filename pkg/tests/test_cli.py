import numpy as np
import pytest
import yaml

from momaplan.cli import main, write_heatmap_pgm
from momaplan.feasibility import FeasibilityMap, FeasibilityParams
from momaplan.world import load_scene


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_scenarios_lists_the_benchmark(capsys):
    code, out, err = run_cli(capsys, "scenarios")
    assert code == 0
    assert "1: dinner_plate, dinner_fork, dinner_knife" in out
    assert "environments: easy, chair_top, chair_bottom, random" in out
    assert "systems: llm_grop, latp, tpra, grop" in out


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as excinfo:
        main(["--version"])
    assert excinfo.value.code == 0
    assert "momaplan" in capsys.readouterr().out


def test_plan_prints_goal_and_quantities(capsys):
    code, out, err = run_cli(
        capsys, "plan", "--task", "1", "--configurations", "2", "--seed", "7"
    )
    assert code == 0
    assert "centered_on_table(dinner_plate)" in out
    assert "[6 cm]" in out
    assert "selected plan" in out
    assert "feasibility F = " in out
    assert "cost        C = " in out
    assert "utility     U = " in out
    # One step line per task object.
    assert out.count("load from") == 3


def test_write_heatmap_pgm_bytes(tmp_path):
    values = np.array([[0.0, 0.5, 1.0]])
    fmap = FeasibilityMap("loc", (0.0, 0.0), values, FeasibilityParams())
    path = tmp_path / "map.pgm"
    write_heatmap_pgm(fmap, path)
    raw = path.read_bytes()
    assert raw.startswith(b"P5\n3 1\n255\n")
    assert raw[len(b"P5\n3 1\n255\n"):] == bytes([0, 128, 255])


def test_heatmap_writes_image_and_sidecar(tmp_path, capsys):
    prefix = tmp_path / "south"
    code, out, err = run_cli(
        capsys, "heatmap", "--task", "1", "--side", "south", "--out", str(prefix)
    )
    assert code == 0
    raw = (tmp_path / "south.pgm").read_bytes()
    assert raw.startswith(b"P5\n24 8\n255\n")
    assert len(raw) == len(b"P5\n24 8\n255\n") + 24 * 8
    sidecar = yaml.safe_load((tmp_path / "south.yaml").read_text())
    assert sidecar["location"] == "dining/south"
    assert sidecar["rows"] == 8 and sidecar["cols"] == 24
    assert sidecar["pgm"] == "south.pgm"
    assert 0.0 <= sidecar["expected_task_feasibility"] <= 1.0
    assert "expected fea_t" in out


def test_run_with_flags_to_stdout(capsys):
    code, out, err = run_cli(
        capsys,
        "run", "--task", "1", "--trials", "1", "--systems", "tpra",
        "--configurations", "2",
    )
    assert code == 0
    report = yaml.safe_load(out)
    assert report["config"]["systems"] == ["tpra"]
    assert len(report["trials"]) == 1


def test_run_writes_report_and_log(tmp_path, capsys):
    out_path = tmp_path / "report.yaml"
    log_path = tmp_path / "trials.jsonl"
    code, out, err = run_cli(
        capsys,
        "run", "--task", "1", "--trials", "2", "--systems", "tpra",
        "--out", str(out_path), "--log", str(log_path),
    )
    assert code == 0
    report = yaml.safe_load(out_path.read_text())
    assert len(report["trials"]) == 2
    assert len(log_path.read_text().splitlines()) == 2


def test_run_rejects_config_plus_flags(tmp_path, capsys):
    config = tmp_path / "exp.yaml"
    config.write_text("task: 1\ntrials: 1\n")
    code, out, err = run_cli(
        capsys, "run", "--config", str(config), "--trials", "5"
    )
    assert code == 2
    assert "--config cannot be combined" in err


def test_run_accepts_config_file(tmp_path, capsys):
    config = tmp_path / "exp.yaml"
    config.write_text(
        "task: 1\ntrials: 1\nsystems: [tpra]\n"
        "feasibility: {trials_per_cell: 2}\n"
    )
    code, out, err = run_cli(capsys, "run", "--config", str(config))
    assert code == 0
    report = yaml.safe_load(out)
    assert report["config"]["trials"] == 1
    assert report["config"]["feasibility"]["trials_per_cell"] == 2


def test_export_scene_then_validate(tmp_path, capsys):
    scene_path = tmp_path / "scene.yaml"
    code, out, err = run_cli(
        capsys, "export-scene", "--task", "2", "--environment", "chair_top",
        "--out", str(scene_path),
    )
    assert code == 0
    scene = load_scene(scene_path)
    assert len(scene.obstacles) == 1
    code, out, err = run_cli(capsys, "validate", str(scene_path))
    assert code == 0
    assert "scene ok: 3 tables, 1 obstacles, 3 objects" in out
    assert "dining: bands dining/north, dining/south, dining/east, dining/west" in out


def test_validate_rejects_garbage(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("format_version: 999\n")
    code, out, err = run_cli(capsys, "validate", str(bad))
    assert code == 2
    assert "invalid scene" in err
    code, out, err = run_cli(capsys, "validate", str(tmp_path / "absent.yaml"))
    assert code == 2


def test_bundled_demo_scene_validates(capsys):
    from importlib.resources import files

    path = files("momaplan").joinpath("fixtures/scenes/dining_3tables.scene")
    code, out, err = run_cli(capsys, "validate", str(path))
    assert code == 0
    assert "scene ok" in out

import filecmp
import json
from pathlib import Path

import pytest

from kvbeam.main import build_parser, main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

FAST_DESIGN = """
[simulation]
n = 45
T = 1
h = 0.01
record_every = 2
"""


@pytest.fixture
def fast_config(tmp_path):
    p = tmp_path / "fast.ini"
    p.write_text(FAST_DESIGN)
    return p


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


def test_design_then_simulate(tmp_path, fast_config):
    out = tmp_path / "run"
    assert main(["design", "--config", str(fast_config), "--out", str(out)]) == 0
    summary = json.loads((out / "design.json").read_text())
    assert summary["controller_dim"] == 46
    assert summary["internal_model_dim"] == 42
    assert summary["closed_loop_margin"] > 0
    assert (out / "controller" / "K1.txt").exists()

    assert main(["simulate", "--config", str(fast_config), "--out", str(out)]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert {"peak_error", "terminal_error", "decay_rate", "closed_loop_margin", "regulated"} <= set(metrics)
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,y1,y2,yref1,yref2,u1,u2,enorm"
    for name in ("eigenvalues.csv", "eigenvalues.gp", "deflection.dat", "deflection.gp", "trajectory_output.gp"):
        assert (out / name).exists()


def test_simulate_reports_corrupted_controller(tmp_path, fast_config):
    out = tmp_path / "run"
    assert main(["design", "--config", str(fast_config), "--out", str(out)]) == 0
    (out / "controller" / "AL.txt").write_text("4 4\n1 2 3 4\n")
    assert main(["simulate", "--config", str(fast_config), "--out", str(out)]) == 4


def test_simulate_without_controller(tmp_path, fast_config):
    assert main(["simulate", "--config", str(fast_config), "--out", str(tmp_path / "empty")]) == 4


def test_invalid_configuration_exit_code(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[beam]\nE = -10\n")
    assert main(["design", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["design", "--config", str(tmp_path / "missing.ini")]) == 4


def test_coincident_sensors_fail_design(tmp_path):
    cfg = tmp_path / "degenerate.ini"
    cfg.write_text("[beam]\nxi1 = 0.3\nxi2 = 0.3\n")
    assert main(["design", "--config", str(cfg), "--out", str(tmp_path)]) == 3


def test_matrices_dump(tmp_path):
    assert main(["matrices", "--n", "6", "--out", str(tmp_path)]) == 0
    head = (tmp_path / "matrices" / "A.txt").read_text().splitlines()[0]
    assert head == "12 12"
    assert (tmp_path / "matrices" / "F.txt").exists()


def test_verify_writes_report(tmp_path):
    assert main(["verify", "--out", str(tmp_path), "--seed", "3"]) == 0
    report = json.loads((tmp_path / "verify.json").read_text())
    assert report["passed"] is True


def test_identical_runs_write_identical_files(tmp_path, fast_config):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["design", "--config", str(fast_config), "--out", str(out)]) == 0
        assert main(["simulate", "--config", str(fast_config), "--out", str(out)]) == 0
    names = ["design.json", "metrics.json", "trajectory.csv", "eigenvalues.csv", "controller/controller.json"]
    names += [f"controller/{p.name}" for p in sorted((outs[0] / "controller").glob("*.txt"))]
    assert len(names) == 12
    for name in names:
        assert filecmp.cmp(outs[0] / name, outs[1] / name, shallow=False), name


def test_in_class_config_is_regulated(tmp_path):
    cfg = CONFIGS / "in_class.ini"
    assert main(["design", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["regulated"] is True
    assert metrics["terminal_error"] <= metrics["tolerance"]
    assert metrics["in_class_error"] == pytest.approx(metrics["terminal_error"], rel=1e-9, abs=1e-12)
    assert main(["verify", "--config", str(cfg), "--out", str(tmp_path), "--seed", "1"]) == 0


def test_triangle_tracks_its_truncation(tmp_path, fast_config):
    assert main(["design", "--config", str(fast_config), "--out", str(tmp_path)]) == 0
    assert main(["simulate", "--config", str(fast_config), "--out", str(tmp_path)]) == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["tolerance"] == pytest.approx(0.0404, abs=5e-4)
    assert metrics["in_class_error"] >= 0.0


def test_compare_writes_summary(tmp_path):
    cfg = tmp_path / "cmp.ini"
    cfg.write_text(
        "[reference]\ntype = trig\na0 = 0 0\nsin.1 = 1 0\ncos.2 = 0 0.5\n"
        "[simulation]\nn = 39\nT = 300\nh = 0.01\nmethod = foh\nrecord_every = 10\n"
    )
    assert main(["compare", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "compare.json").read_text())
    assert summary["regulator"]["controller_dim"] == 46
    assert summary["low_gain"]["internal_model_dim"] == 22
    assert summary["low_gain"]["eps"] == pytest.approx(0.076)
    assert summary["regulator"]["closed_loop_margin"] > summary["low_gain"]["closed_loop_margin"] > 0
    # both controllers converge to the same steady-state input
    assert summary["steady_state_u_rel_diff"] <= 1e-2
    assert summary["early_control_ratio"] > 0
    for name in ("regulator.csv", "low_gain.csv", "low_gain/K.txt", "controller/K1.txt"):
        assert (tmp_path / name).exists()

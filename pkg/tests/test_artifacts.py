import json

import numpy as np
import pytest

from kvbeam.api import artifacts
from kvbeam.engine import controller_synthesis as cs
from kvbeam.errors import ArtifactError, ConfigError
from kvbeam.state import SimulationResult


def test_matrix_text_is_lossless(tmp_path, rng):
    M = rng.standard_normal((4, 3))
    path = artifacts.write_matrix(tmp_path / "M.txt", M)
    assert path.read_text().splitlines()[0] == "4 3"
    np.testing.assert_array_equal(artifacts.read_matrix(path), M)
    assert artifacts.read_matrix(artifacts.write_matrix(tmp_path / "E.txt", np.zeros((2, 0)))).shape == (2, 0)


@pytest.mark.parametrize(
    "text, line",
    [
        ("", 1),
        ("two three\n1 2\n", 1),
        ("2 2\n1 2\n", 2),
        ("2 2\n1 2\n3\n", 3),
        ("2 2\n1 2\n3 x\n", 3),
    ],
)
def test_matrix_parse_errors_carry_location(text, line):
    with pytest.raises(ArtifactError) as err:
        artifacts.parse_matrix(text, source="K1.txt")
    assert err.value.path == "K1.txt"
    assert err.value.line == line
    assert str(err.value).startswith(f"K1.txt:{line}:")


def test_controller_round_trip(tmp_path, flagship_design):
    ctrl, _ = flagship_design
    artifacts.write_controller(tmp_path / "controller", ctrl)
    meta = json.loads((tmp_path / "controller" / "controller.json").read_text())
    assert meta == {"dim": 46, "kind": "regulator"}
    back = artifacts.read_controller(tmp_path / "controller")
    for name, M in ctrl.matrices().items():
        np.testing.assert_array_equal(getattr(back, name), M)


def test_low_gain_round_trip(tmp_path, design_plant, low_gain_model):
    lg = cs.build_low_gain(design_plant, low_gain_model, 0.076)
    artifacts.write_controller(tmp_path / "lg", lg)
    back = artifacts.read_controller(tmp_path / "lg")
    assert isinstance(back, cs.LowGainController)
    assert back.eps == 0.076
    np.testing.assert_array_equal(back.K, lg.K)


def test_corrupted_controller_is_reported(tmp_path, flagship_design):
    ctrl, _ = flagship_design
    d = artifacts.write_controller(tmp_path / "controller", ctrl)
    (d / "K1.txt").write_text("2 42\n1 2 3\n")
    with pytest.raises(ArtifactError):
        artifacts.read_controller(d)

    d2 = artifacts.write_controller(tmp_path / "c2", ctrl)
    artifacts.write_matrix(d2 / "Lr.txt", np.zeros((3, 2)))
    with pytest.raises(ArtifactError):
        artifacts.read_controller(d2)

    d3 = artifacts.write_controller(tmp_path / "c3", ctrl)
    (d3 / "controller.json").write_text('{"kind": "pid"}')
    with pytest.raises(ArtifactError):
        artifacts.read_controller(d3)


def test_trajectory_csv(tmp_path):
    t = np.linspace(0, 1, 3)
    e = np.array([[3.0, 4.0], [0.0, 0.0], [1.0, 0.0]])
    res = SimulationResult(times=t, y=e, y_ref=np.zeros((3, 2)), u=np.ones((3, 2)), e=e, err_norm=np.linalg.norm(e, axis=1))
    path = artifacts.write_trajectory(tmp_path / "trajectory.csv", res)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,y1,y2,yref1,yref2,u1,u2,enorm"
    assert lines[1] == "0,3,4,0,0,1,1,5"
    data = artifacts.read_trajectory(path)
    assert data.shape == (3, 8)
    np.testing.assert_allclose(data[:, 7], [5.0, 0.0, 1.0])


def test_trajectory_header_is_checked(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ArtifactError):
        artifacts.read_trajectory(p)


def test_json_is_sorted_and_finite_safe(tmp_path):
    p = artifacts.write_json(tmp_path / "s.json", {"b": np.float64(np.inf), "a": np.arange(2), "c": np.bool_(True)})
    text = p.read_text()
    assert text.index('"a"') < text.index('"b"')
    assert json.loads(text) == {"a": [0, 1], "b": "inf", "c": True}


def test_plot_scripts(tmp_path):
    p = artifacts.write_plot_script(tmp_path / "err.gp", "error", "trajectory.csv")
    assert "'trajectory.csv' using 1:8" in p.read_text()
    p = artifacts.write_plot_script(tmp_path / "eig.gp", "eigenvalues", "eigenvalues.csv", xmin=-12)
    assert "[-12:0.5]" in p.read_text()
    with pytest.raises(ConfigError):
        artifacts.write_plot_script(tmp_path / "x.gp", "bode", "x.csv")


def test_deflection_file(tmp_path):
    V = np.array([[0.0, 1.0], [2.0, 3.0]])
    p = artifacts.write_deflection(tmp_path / "deflection.dat", np.array([0.0, 0.5]), np.array([-1.0, 1.0]), V)
    rows = [ln.split() for ln in p.read_text().splitlines() if ln and not ln.startswith("#")]
    assert rows == [["0", "-1", "0"], ["0", "1", "1"], ["0.5", "-1", "2"], ["0.5", "1", "3"]]

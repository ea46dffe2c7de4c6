"""
On-disk artifacts.

Dense matrix text: first line "rows cols", then one row per line, entries in
%.17g. Trajectory CSV: t,y1,y2,yref1,yref2,u1,u2,enorm with 12 significant
digits. JSON summaries use sorted keys so identical runs produce identical
bytes. Figures are emitted as gnuplot scripts next to their data.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Dict, Iterable, Optional, Union

import numpy as np

from kvbeam.config import settings
from kvbeam.engine.controller_synthesis import LowGainController, RegulatorRealization
from kvbeam.errors import ArtifactError, ConfigError
from kvbeam.state import SimulationResult
from kvbeam.utils.logs import get_logger

log = get_logger("IO")

TRAJECTORY_HEADER = ["t", "y1", "y2", "yref1", "yref2", "u1", "u2", "enorm"]
REGULATOR_FILES = ("G1", "G2", "AL", "BL", "Lr", "K1", "K2r")
LOW_GAIN_FILES = ("G1", "G2", "K")


def _ensure_dir(path: Path) -> None:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ArtifactError(f"cannot create directory: {e.strerror}", path=str(path)) from e


def _write_text(path: Path, text: str) -> Path:
    _ensure_dir(path.parent)
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"cannot write: {e.strerror}", path=str(path)) from e
    log.debug("wrote %s", path)
    return path


# --------------------------
# Dense matrices
# --------------------------
def format_matrix(M: np.ndarray) -> str:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    rows, cols = M.shape
    lines = [f"{rows} {cols}"]
    lines.extend(" ".join("%.17g" % v for v in row) for row in M)
    return "\n".join(lines) + "\n"


def parse_matrix(text: str, source: str = "<matrix>") -> np.ndarray:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise ArtifactError("missing 'rows cols' header", path=source, line=1)
    head = lines[0].split()
    try:
        rows, cols = (int(v) for v in head)
    except ValueError:
        raise ArtifactError(f"header must be two integers, got {lines[0]!r}", path=source, line=1)
    if rows < 0 or cols < 0:
        raise ArtifactError(f"negative dimensions {rows}x{cols}", path=source, line=1)
    if cols == 0:
        return np.zeros((rows, 0))

    body = [(i + 2, ln) for i, ln in enumerate(lines[1:]) if ln.strip()]
    if len(body) != rows:
        raise ArtifactError(f"expected {rows} rows, found {len(body)}", path=source, line=len(lines))
    out = np.empty((rows, cols))
    for r, (lineno, ln) in enumerate(body):
        parts = ln.split()
        if len(parts) != cols:
            raise ArtifactError(f"expected {cols} entries, found {len(parts)}", path=source, line=lineno)
        try:
            out[r] = [float(p) for p in parts]
        except ValueError:
            raise ArtifactError(f"non-numeric entry in {ln.strip()!r}", path=source, line=lineno)
    return out


def write_matrix(path: Union[str, Path], M: np.ndarray) -> Path:
    p = Path(path)
    _write_text(p, format_matrix(M))
    return p


def read_matrix(path: Union[str, Path]) -> np.ndarray:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ArtifactError(f"cannot read matrix: {e.strerror}", path=str(p)) from e
    return parse_matrix(text, source=str(p))


def write_matrices(directory: Union[str, Path], mats: Dict[str, np.ndarray]) -> list[Path]:
    d = Path(directory)
    return [write_matrix(d / f"{name}.txt", M) for name, M in mats.items()]


# --------------------------
# Controllers
# --------------------------
def write_controller(directory: Union[str, Path], ctrl: Union[RegulatorRealization, LowGainController]) -> Path:
    d = Path(directory)
    write_matrices(d, ctrl.matrices())
    meta = {"kind": "low_gain" if isinstance(ctrl, LowGainController) else "regulator", "dim": ctrl.dim}
    if isinstance(ctrl, LowGainController):
        meta["eps"] = ctrl.eps
    write_json(d / "controller.json", meta)
    log.info("controller (%s, dim %d) written to %s", meta["kind"], ctrl.dim, d)
    return d


def read_controller(directory: Union[str, Path]) -> Union[RegulatorRealization, LowGainController]:
    d = Path(directory)
    meta_path = d / "controller.json"
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ArtifactError(f"cannot read controller metadata: {e.strerror}", path=str(meta_path)) from e
    except json.JSONDecodeError as e:
        raise ArtifactError(f"bad JSON: {e.msg}", path=str(meta_path), line=e.lineno) from e

    kind = meta.get("kind")
    if kind == "regulator":
        m = {name: read_matrix(d / f"{name}.txt") for name in REGULATOR_FILES}
        ctrl = RegulatorRealization(**m)
    elif kind == "low_gain":
        m = {name: read_matrix(d / f"{name}.txt") for name in LOW_GAIN_FILES}
        ctrl = LowGainController(eps=float(meta.get("eps", float("nan"))), **m)
    else:
        raise ArtifactError(f"unknown controller kind {kind!r}", path=str(meta_path))

    try:
        ss = ctrl.as_state_space()
    except ConfigError as e:
        raise ArtifactError(f"inconsistent controller matrices: {e}", path=str(d)) from e
    if ss.B.shape[1] != 2 or ss.C.shape[0] != 2:
        raise ArtifactError(f"controller must map 2 errors to 2 inputs, got {ss.C.shape[0]}x{ss.B.shape[1]}", path=str(d))
    if "dim" in meta and int(meta["dim"]) != ctrl.dim:
        raise ArtifactError(f"metadata says dim {meta['dim']}, matrices give {ctrl.dim}", path=str(meta_path))
    return ctrl


# --------------------------
# JSON / CSV
# --------------------------
def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        # bare Infinity/NaN are not JSON
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def write_json(path: Union[str, Path], obj) -> Path:
    p = Path(path)
    _write_text(p, json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n")
    return p


def _fmt(v: float, digits: int) -> str:
    return f"{v:.{digits}g}"


def write_rows(path: Union[str, Path], header: Iterable[str], rows: Iterable[Iterable[float]], digits: Optional[int] = None) -> Path:
    p = Path(path)
    digits = settings.CSV_DIGITS if digits is None else digits
    _ensure_dir(p.parent)
    try:
        with p.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(list(header))
            for row in rows:
                w.writerow([_fmt(float(v), digits) for v in row])
    except OSError as e:
        raise ArtifactError(f"cannot write: {e.strerror}", path=str(p)) from e
    log.debug("wrote %s", p)
    return p


def write_trajectory(path: Union[str, Path], res: SimulationResult) -> Path:
    data = np.column_stack([res.times, res.y, res.y_ref, res.u, res.err_norm])
    if data.shape[1] != len(TRAJECTORY_HEADER):
        raise ConfigError(f"trajectory has {data.shape[1]} columns, expected {len(TRAJECTORY_HEADER)}")
    return write_rows(path, TRAJECTORY_HEADER, data)


def read_trajectory(path: Union[str, Path]) -> np.ndarray:
    p = Path(path)
    try:
        with p.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise ArtifactError(f"cannot read: {e.strerror}", path=str(p)) from e
    if not rows or rows[0] != TRAJECTORY_HEADER:
        raise ArtifactError("unexpected trajectory header", path=str(p), line=1)
    try:
        return np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as e:
        raise ArtifactError(f"non-numeric trajectory entry: {e}", path=str(p)) from e


def write_eigenvalues(path: Union[str, Path], ev: np.ndarray) -> Path:
    return write_rows(path, ["re", "im"], np.column_stack([ev.real, ev.imag]))


def write_deflection(path: Union[str, Path], times: np.ndarray, xi: np.ndarray, V: np.ndarray) -> Path:
    """Long format (t, xi, v), blank-line separated per time for gnuplot splot."""
    p = Path(path)
    digits = settings.CSV_DIGITS
    lines = ["# t xi v"]
    for t, row in zip(times, V):
        lines.extend(f"{_fmt(t, digits)} {_fmt(x, digits)} {_fmt(v, digits)}" for x, v in zip(xi, row))
        lines.append("")
    _write_text(p, "\n".join(lines) + "\n")
    return p


# --------------------------
# gnuplot scripts
# --------------------------
_PLOTS = {
    "eigenvalues": (
        "set title 'Closed-loop eigenvalues'\nset xlabel 'Re'\nset ylabel 'Im'\n"
        "set datafile separator ','\nset xrange [{xmin}:0.5]\n"
        "plot '{data}' every ::1 using 1:2 with points pt 7 ps 0.6 notitle\n"
    ),
    "output": (
        "set title 'Output and reference'\nset xlabel 't'\nset datafile separator ','\nset key autotitle columnhead\n"
        "plot '{data}' using 1:2 with lines, '' using 1:3 with lines, "
        "'' using 1:4 with lines dt 2, '' using 1:5 with lines dt 2\n"
    ),
    "error": (
        "set title 'Tracking error norm'\nset xlabel 't'\nset ylabel '|e(t)|'\nset datafile separator ','\n"
        "plot '{data}' using 1:8 with lines notitle\n"
    ),
    "controls": (
        "set title 'Control inputs'\nset xlabel 't'\nset datafile separator ','\nset key autotitle columnhead\n"
        "plot '{data}' using 1:6 with lines lc rgb 'blue', '' using 1:7 with lines lc rgb 'red'\n"
    ),
    "deflection": (
        "set title 'Beam deflection'\nset xlabel 't'\nset ylabel 'xi'\nset zlabel 'v'\n"
        "set hidden3d\nsplot '{data}' using 1:2:3 with lines notitle\n"
    ),
}


def write_plot_script(path: Union[str, Path], kind: str, data: str, **extra) -> Path:
    if kind not in _PLOTS:
        raise ConfigError(f"unknown figure kind {kind!r}")
    text = _PLOTS[kind].format(data=data, **{"xmin": -20, **extra})
    return _write_text(Path(path), text)

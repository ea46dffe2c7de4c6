"""
Plant/controller interconnection and fixed-step simulation.

Stacked state (x, z), exogenous input s = (w_dist, y_ref):

    x' = A x + B Cc z + Bd w
    z' = Ac z + Bc (C x - y_ref)
    e  = C x - y_ref,   u = Cc z
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import linalg

from kvbeam.engine.matrix_equations import stability_margin
from kvbeam.errors import ConfigError, SimulationError
from kvbeam.state import ErrorMetrics, SimulationResult
from kvbeam.utils.logs import get_logger
from kvbeam.utils.stats import fit_decay_rate, last_period_mean

log = get_logger("SIM")

METHODS = ("trapezoid", "foh")


@dataclass(frozen=True)
class ClosedLoop:
    Acl: np.ndarray
    Ein: np.ndarray
    Cerr: np.ndarray
    Derr: np.ndarray
    Cy: np.ndarray
    Cu: np.ndarray
    n_plant: int
    n_ctrl: int
    n_dist: int

    @property
    def dim(self) -> int:
        return self.Acl.shape[0]


def assemble_closed_loop(plant, ctrl) -> ClosedLoop:
    """`ctrl` is any controller exposing as_state_space() -> (Ac, Bc, Cc) driven by e."""
    A, B, Bd, C = plant.A, plant.B, plant.Bd, plant.C
    cs = ctrl.as_state_space()
    Ac, Bc, Cc = cs.A, cs.B, cs.C
    ny, nu = C.shape[0], B.shape[1]
    if Bc.shape[1] != ny or Cc.shape[0] != nu:
        raise ConfigError(f"controller is {Cc.shape[0]}x{Bc.shape[1]} (out x in), plant needs {nu}x{ny}")

    m, nc, nd = A.shape[0], Ac.shape[0], Bd.shape[1]
    Acl = np.block([[A, B @ Cc], [Bc @ C, Ac]])
    Ein = np.block([[Bd, np.zeros((m, ny))], [np.zeros((nc, nd)), -Bc]])
    Cerr = np.hstack([C, np.zeros((ny, nc))])
    Derr = np.hstack([np.zeros((ny, nd)), -np.eye(ny)])
    Cu = np.hstack([np.zeros((nu, m)), Cc])
    log.debug("closed loop: plant %d + controller %d states, %d disturbance inputs", m, nc, nd)
    return ClosedLoop(Acl=Acl, Ein=Ein, Cerr=Cerr, Derr=Derr, Cy=Cerr.copy(), Cu=Cu, n_plant=m, n_ctrl=nc, n_dist=nd)


def closed_loop_margin(cl: ClosedLoop) -> float:
    return stability_margin(cl.Acl)


def closed_loop_eigenvalues(cl: ClosedLoop) -> np.ndarray:
    ev = linalg.eigvals(cl.Acl)
    return ev[np.lexsort((ev.imag, -ev.real))]


def _sample(signals: Callable, times: np.ndarray, width: int) -> np.ndarray:
    out = np.asarray(signals(times), dtype=float)
    if out.shape != (times.size, width):
        out = np.array([np.asarray(signals(t), dtype=float).reshape(width) for t in times])
    return out.reshape(times.size, width)


def _trapezoid_maps(A: np.ndarray, E: np.ndarray, h: float):
    m = A.shape[0]
    lhs = np.eye(m) - 0.5 * h * A
    lu = linalg.lu_factor(lhs, check_finite=True)
    pivots = np.abs(np.diag(lu[0]))
    if pivots.min() <= np.finfo(float).eps * pivots.max() * m:
        raise SimulationError(f"implicit step matrix I - (h/2)A is singular at h={h}")
    Phi = linalg.lu_solve(lu, np.eye(m) + 0.5 * h * A)
    Gam = linalg.lu_solve(lu, 0.5 * h * E)
    return Phi, Gam


def _foh_maps(A: np.ndarray, E: np.ndarray, h: float):
    m, k = A.shape[0], E.shape[1]
    big = np.zeros((m + 2 * k, m + 2 * k))
    big[:m, :m] = A
    big[:m, m : m + k] = E
    big[m : m + k, m + k :] = np.eye(k)
    F = linalg.expm(big * h)
    return F[:m, :m], F[:m, m : m + k], F[:m, m + k :] / h


def simulate(
    cl: ClosedLoop,
    signals: Callable,
    T: float,
    h: float,
    x0: Optional[np.ndarray] = None,
    method: str = "trapezoid",
    record_every: int = 1,
    keep_plant_state: bool = False,
) -> SimulationResult:
    """
    Integrate x' = Acl x + Ein s(t) on the uniform grid t_k = k h, k = 0..T/h.

    `signals` maps an array of times to an array (len(t), n_dist + 2).
    trapezoid: x+ = Phi x + Gam (s_k + s_{k+1}).
    foh: exact for inputs linear between grid points.
    """
    if h <= 0 or T < h:
        raise ConfigError(f"need h > 0 and T >= h (got T={T}, h={h})")
    if method not in METHODS:
        raise ConfigError(f"unknown integration method {method!r}; choose from {METHODS}")
    if record_every < 1:
        raise ConfigError(f"record_every must be >= 1, got {record_every}")

    steps = int(np.ceil(T / h - 1e-9))
    times = h * np.arange(steps + 1)
    width = cl.Ein.shape[1]
    S = _sample(signals, times, width)

    A, E = cl.Acl, cl.Ein
    if method == "trapezoid":
        Phi, Gam = _trapezoid_maps(A, E, h)
        drive = (S[:-1] + S[1:]) @ Gam.T
    else:
        Phi, G1, G2 = _foh_maps(A, E, h)
        drive = S[:-1] @ G1.T + (S[1:] - S[:-1]) @ G2.T

    x = np.zeros(cl.dim) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x.shape != (cl.dim,):
        raise ConfigError(f"initial state has shape {x.shape}, expected ({cl.dim},)")

    rec = np.arange(0, steps + 1, record_every)
    X = np.empty((rec.size, cl.dim))
    X[0] = x
    j = 1
    for k in range(steps):
        x = Phi @ x + drive[k]
        if j < rec.size and k + 1 == rec[j]:
            X[j] = x
            j += 1

    if not np.all(np.isfinite(X)):
        raise SimulationError("trajectory became non-finite; the closed loop is likely unstable")

    Sr = S[rec]
    e = X @ cl.Cerr.T + Sr @ cl.Derr.T
    result = SimulationResult(
        times=times[rec],
        y=X @ cl.Cy.T,
        y_ref=Sr[:, cl.n_dist :],
        u=X @ cl.Cu.T,
        e=e,
        err_norm=np.linalg.norm(e, axis=1),
        plant_state=X[:, : cl.n_plant].copy() if keep_plant_state else None,
    )
    log.info("%s: %d steps of h=%g to T=%g, final |e|=%.3e", method, steps, h, times[-1], result.err_norm[-1])
    return result


def error_metrics(res: SimulationResult, period: float = 2.0) -> ErrorMetrics:
    if res.samples == 0:
        raise ConfigError("empty simulation result")
    peak = float(np.max(res.err_norm))
    terminal = last_period_mean(res.times, res.err_norm, period)
    if peak == 0.0:
        return ErrorMetrics(peak_error=0.0, terminal_error=0.0, decay_rate=float("inf"), fit_windows=0)
    rate, used = fit_decay_rate(res.times, res.err_norm, period, floor=10.0 * terminal)
    return ErrorMetrics(peak_error=peak, terminal_error=terminal, decay_rate=rate, fit_windows=used)

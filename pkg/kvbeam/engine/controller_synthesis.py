"""
Internal-model error-feedback controllers for the Galerkin beam.

Observer-based design (reduced order):

    z1' = G1 z1 + G2 e
    z2' = (AL + BL K2r) z2 + BL K1 z1 - Lr e
    u   = K1 z1 + K2r z2

with (G1, G2) the internal model of the frequencies {0, w_1..w_q}, L and
K = (K1, K2) from two shifted Riccati equations, and (AL, [BL, Lr], K2r)
the balanced truncation of (A + LC, [B, L], K2). Synthesis uses Euclidean
coordinates, identity weights and D = 0.

Low-gain design: z' = G1 z + G2 e, u = K z with
K = -eps [P(0)^{-1}, Re P(iw_1)^{-1}, Im P(iw_1)^{-1}, ...].
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg, optimize

from kvbeam.config import settings
from kvbeam.engine.matrix_equations import (
    StateSpace,
    balanced_truncate,
    care_residual,
    hankel_singular_values,
    solve_care,
    stability_margin,
)
from kvbeam.errors import ConfigError, SolverError, SynthesisError
from kvbeam.utils.logs import get_logger

log = get_logger("SYNTH")
log_lg = get_logger("LOWGAIN")

N_OUT = 2


# --------------------------
# Internal model
# --------------------------
@dataclass(frozen=True)
class InternalModel:
    G1: np.ndarray
    G2: np.ndarray
    freqs: np.ndarray

    @property
    def q(self) -> int:
        return self.freqs.size - 1

    @property
    def dim(self) -> int:
        return self.G1.shape[0]


def _check_freqs(freqs: Sequence[float]) -> np.ndarray:
    w = np.asarray(freqs, dtype=float).ravel()
    if w.size == 0 or w[0] != 0.0:
        raise ConfigError(f"frequency list must start at 0, got {w.tolist()}")
    if np.any(w < 0) or np.any(np.diff(w) <= 0):
        raise ConfigError(f"frequencies must be nonnegative and strictly increasing, got {w.tolist()}")
    return w


def build_internal_model(freqs: Sequence[float], p: int = N_OUT) -> InternalModel:
    w = _check_freqs(freqs)
    q = w.size - 1
    Ip = np.eye(p)
    blocks = [np.zeros((p, p))]
    for wk in w[1:]:
        blocks.append(np.block([[np.zeros((p, p)), wk * Ip], [-wk * Ip, np.zeros((p, p))]]))
    G1 = linalg.block_diag(*blocks)
    G2 = np.vstack([Ip] + [np.vstack([Ip, np.zeros((p, p))]) for _ in range(q)])
    return InternalModel(G1=G1, G2=G2, freqs=w)


def pbh_sigma_min(G1: np.ndarray, G2: np.ndarray) -> float:
    """min over eigenvalues lam of G1 of sigma_min([lam I - G1, G2])."""
    m = G1.shape[0]
    worst = np.inf
    for lam in np.unique(np.round(linalg.eigvals(G1), 10)):
        H = np.hstack([lam * np.eye(m) - G1, G2.astype(complex)])
        worst = min(worst, linalg.svdvals(H)[-1])
    return float(worst)


def is_controllable(G1: np.ndarray, G2: np.ndarray, tol: float = 1e-8) -> bool:
    # Hautus test: the Krylov matrix is ill-scaled once w_q**(4q+1) gets large
    return pbh_sigma_min(G1, G2) > tol


# --------------------------
# Options and design records
# --------------------------
def _spd(name: str, R) -> np.ndarray:
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape != (N_OUT, N_OUT) or not np.allclose(R, R.T):
        raise ConfigError(f"{name} must be a symmetric {N_OUT}x{N_OUT} matrix")
    try:
        linalg.cholesky(R)
    except linalg.LinAlgError as e:
        raise ConfigError(f"{name} must be positive definite") from e
    return R


@dataclass(frozen=True)
class SynthesisOptions:
    alpha1: float = 2.0
    alpha2: float = 0.8
    R1: np.ndarray = field(default_factory=lambda: np.eye(N_OUT))
    R2: np.ndarray = field(default_factory=lambda: np.eye(N_OUT))
    # scalar multiples of the identity weights Q0, Q1, Q2
    q0: float = 1.0
    q1: float = 1.0
    q2: float = 1.0
    r: int = 4
    n: int = 39
    freqs: tuple = tuple(k * np.pi for k in range(11))
    zero_threshold: float = settings.ZERO_THRESHOLD

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ConfigError(f"alpha1, alpha2 must be nonnegative (got {self.alpha1}, {self.alpha2})")
        if min(self.q0, self.q1, self.q2) <= 0:
            raise ConfigError("weight scales q0, q1, q2 must be positive")
        if self.n < 5:
            raise ConfigError(f"design basis size must be >= 5, got {self.n}")
        # r = 0 keeps only the internal model
        if not 0 <= self.r <= 2 * self.n:
            raise ConfigError(f"reduction order r={self.r} must lie in [0, {2 * self.n}]")
        object.__setattr__(self, "R1", _spd("R1", self.R1))
        object.__setattr__(self, "R2", _spd("R2", self.R2))
        object.__setattr__(self, "freqs", tuple(_check_freqs(self.freqs).tolist()))


@dataclass(frozen=True)
class ObserverGain:
    L: np.ndarray
    Sigma: np.ndarray
    margin: float
    residual: float


@dataclass(frozen=True)
class StateFeedback:
    K1: np.ndarray
    K2: np.ndarray
    Pi: np.ndarray
    margin: float
    residual: float


@dataclass(frozen=True)
class ReducedObserver:
    AL: np.ndarray
    BL: np.ndarray
    Lr: np.ndarray
    K2r: np.ndarray
    hankel_sv: np.ndarray

    @property
    def r(self) -> int:
        return self.AL.shape[0]


@dataclass(frozen=True)
class RegulatorRealization:
    G1: np.ndarray
    G2: np.ndarray
    AL: np.ndarray
    BL: np.ndarray
    Lr: np.ndarray
    K1: np.ndarray
    K2r: np.ndarray

    @property
    def dim(self) -> int:
        return self.G1.shape[0] + self.AL.shape[0]

    def as_state_space(self) -> StateSpace:
        """(Ac, Bc, Cc) of the controller driven by e."""
        nz, r = self.G1.shape[0], self.AL.shape[0]
        Ac = np.block([[self.G1, np.zeros((nz, r))], [self.BL @ self.K1, self.AL + self.BL @ self.K2r]])
        Bc = np.vstack([self.G2, -self.Lr])
        Cc = np.hstack([self.K1, self.K2r])
        return StateSpace(A=Ac, B=Bc, C=Cc)

    def matrices(self) -> dict[str, np.ndarray]:
        return {"G1": self.G1, "G2": self.G2, "AL": self.AL, "BL": self.BL, "Lr": self.Lr, "K1": self.K1, "K2r": self.K2r}


@dataclass(frozen=True)
class LowGainController:
    G1: np.ndarray
    G2: np.ndarray
    K: np.ndarray
    eps: float

    @property
    def dim(self) -> int:
        return self.G1.shape[0]

    def as_state_space(self) -> StateSpace:
        return StateSpace(A=self.G1, B=self.G2, C=self.K)

    def matrices(self) -> dict[str, np.ndarray]:
        return {"G1": self.G1, "G2": self.G2, "K": self.K}


@dataclass(frozen=True)
class ZeroCheckReport:
    freqs: np.ndarray
    sigma_min: np.ndarray
    threshold: float

    @property
    def passed(self) -> bool:
        return bool(np.all(self.sigma_min > self.threshold))

    @property
    def failures(self) -> list[float]:
        return [float(w) for w, s in zip(self.freqs, self.sigma_min) if not s > self.threshold]


@dataclass
class SynthesisReport:
    observer_margin: float
    observer_residual: float
    regulator_margin: float
    regulator_residual: float
    hankel_sv: np.ndarray
    zero_check: ZeroCheckReport
    controller_dim: int
    internal_model_dim: int
    r: int


@dataclass(frozen=True)
class EpsilonTuning:
    eps_star: float
    margin: float
    open_loop_margin: float
    poorly_stabilizable: bool
    grid_eps: np.ndarray
    grid_margin: np.ndarray


# --------------------------
# Transfer function and zeros
# --------------------------
def transfer_function_value(plant, lam: complex) -> np.ndarray:
    """P(lam) = C (lam I - A)^{-1} B for anything carrying A, B, C."""
    return StateSpace(A=plant.A, B=plant.B, C=plant.C).evaluate(lam)


def check_transmission_zeros(plant, freqs: Sequence[float], threshold: Optional[float] = None) -> ZeroCheckReport:
    thr = settings.ZERO_THRESHOLD if threshold is None else float(threshold)
    w = np.asarray(freqs, dtype=float)
    smin = np.empty(w.size)
    for i, wk in enumerate(w):
        try:
            smin[i] = linalg.svdvals(transfer_function_value(plant, 1j * wk))[-1]
        except SolverError:
            log.warning("resolvent singular at i*%.6g; counted as a failed zero check", wk)
            smin[i] = 0.0
    report = ZeroCheckReport(freqs=w, sigma_min=smin, threshold=thr)
    log.info("transmission-zero check: min sigma_min=%.3e over %d frequencies (threshold %.0e)", smin.min(initial=np.inf), w.size, thr)
    return report


# --------------------------
# Steps 3 and 4
# --------------------------
def _require_margin(what: str, margin: float, alpha: float) -> None:
    if margin < alpha - settings.MARGIN_TOL:
        raise SynthesisError(f"{what} margin {margin:.6g} falls short of the shift {alpha:g}")


def design_observer_gain(plant, opts: SynthesisOptions) -> ObserverGain:
    A, C = plant.A, plant.C
    m = A.shape[0]
    As = A + opts.alpha1 * np.eye(m)
    Q = opts.q1**2 * np.eye(m)
    # filter equation as the dual control CARE
    Sigma = solve_care(As.T, C.T, Q, opts.R1)
    L = -Sigma @ C.T @ linalg.inv(opts.R1)
    margin = stability_margin(A + L @ C)
    residual = care_residual(As.T, C.T, Q, opts.R1, Sigma)
    log.info("observer: margin(A+LC)=%.6g (alpha1=%g) residual=%.2e", margin, opts.alpha1, residual)
    _require_margin("observer", margin, opts.alpha1)
    return ObserverGain(L=L, Sigma=Sigma, margin=margin, residual=residual)


def design_state_feedback(plant, im: InternalModel, opts: SynthesisOptions) -> StateFeedback:
    A, B, C = plant.A, plant.B, plant.C
    m, nz = A.shape[0], im.dim
    As = np.block([[im.G1, im.G2 @ C], [np.zeros((m, nz)), A]])
    Bs = np.vstack([np.zeros((nz, B.shape[1])), B])
    Q = linalg.block_diag(opts.q0**2 * np.eye(nz), opts.q2**2 * np.eye(m))
    shifted = As + opts.alpha2 * np.eye(nz + m)

    Pi = solve_care(shifted, Bs, Q, opts.R2)
    K = -linalg.solve(opts.R2, Bs.T @ Pi, assume_a="pos")
    margin = stability_margin(As + Bs @ K)
    residual = care_residual(shifted, Bs, Q, opts.R2, Pi)
    log.info("regulator: margin(As+BsK)=%.6g (alpha2=%g) residual=%.2e", margin, opts.alpha2, residual)
    _require_margin("regulator", margin, opts.alpha2)
    return StateFeedback(K1=K[:, :nz], K2=K[:, nz:], Pi=Pi, margin=margin, residual=residual)


def reduce_observer(plant, L: np.ndarray, K2: np.ndarray, r: int) -> ReducedObserver:
    A, B, C = plant.A, plant.B, plant.C
    full = StateSpace(A=A + L @ C, B=np.hstack([B, L]), C=K2)
    nu = B.shape[1]
    if r == 0:
        hsv = hankel_singular_values(full)
        return ReducedObserver(
            AL=np.zeros((0, 0)), BL=np.zeros((0, nu)), Lr=np.zeros((0, L.shape[1])),
            K2r=np.zeros((K2.shape[0], 0)), hankel_sv=hsv,
        )
    bt = balanced_truncate(full, r)
    red = bt.reduced
    return ReducedObserver(AL=red.A, BL=red.B[:, :nu], Lr=red.B[:, nu:], K2r=red.C, hankel_sv=bt.hankel_sv)


def assemble_regulator(im: InternalModel, reduced: ReducedObserver, K1: np.ndarray) -> RegulatorRealization:
    r = reduced.r
    if K1.shape[1] != im.dim:
        raise ConfigError(f"K1 has {K1.shape[1]} columns, internal model has dimension {im.dim}")
    if reduced.BL.shape[0] != r or reduced.Lr.shape[0] != r or reduced.K2r.shape[1] != r:
        raise ConfigError("reduced observer blocks have inconsistent orders")
    if K1.shape[0] != reduced.BL.shape[1] or reduced.K2r.shape[0] != K1.shape[0]:
        raise ConfigError("input dimensions of K1, BL and K2r disagree")
    return RegulatorRealization(
        G1=im.G1, G2=im.G2, AL=reduced.AL, BL=reduced.BL, Lr=reduced.Lr, K1=K1, K2r=reduced.K2r,
    )


def synthesize_regulator(plant, opts: SynthesisOptions) -> tuple[RegulatorRealization, SynthesisReport]:
    """Steps 1-4 on the design plant, stopping at the first failed requirement."""
    if getattr(plant, "n", opts.n) != opts.n:
        raise ConfigError(f"design plant has n={plant.n}, options ask for n={opts.n}")
    im = build_internal_model(opts.freqs)
    zc = check_transmission_zeros(plant, im.freqs, opts.zero_threshold)
    if not zc.passed:
        raise SynthesisError(f"plant has (near) transmission zeros at frequencies {zc.failures}")

    obs = design_observer_gain(plant, opts)
    fb = design_state_feedback(plant, im, opts)
    red = reduce_observer(plant, obs.L, fb.K2, opts.r)
    ctrl = assemble_regulator(im, red, fb.K1)

    log.info("controller dimension %d = %d (internal model) + %d (reduced observer)", ctrl.dim, im.dim, red.r)
    report = SynthesisReport(
        observer_margin=obs.margin,
        observer_residual=obs.residual,
        regulator_margin=fb.margin,
        regulator_residual=fb.residual,
        hankel_sv=red.hankel_sv,
        zero_check=zc,
        controller_dim=ctrl.dim,
        internal_model_dim=im.dim,
        r=red.r,
    )
    return ctrl, report


# --------------------------
# Low-gain controller
# --------------------------
def _low_gain_direction(plant, freqs: np.ndarray) -> np.ndarray:
    blocks = []
    for k, wk in enumerate(freqs):
        P = transfer_function_value(plant, 1j * wk)
        try:
            Pinv = linalg.inv(P)
        except linalg.LinAlgError as e:
            raise SynthesisError(f"P(i*{wk:.6g}) is singular") from e
        if linalg.svdvals(P)[-1] <= settings.ZERO_THRESHOLD:
            raise SynthesisError(f"P(i*{wk:.6g}) is numerically singular")
        if k == 0:
            blocks.append(Pinv.real)
        else:
            blocks.extend([Pinv.real, Pinv.imag])
    return -np.hstack(blocks)


def build_low_gain(plant, im: InternalModel, eps: float) -> LowGainController:
    if eps < 0:
        raise ConfigError(f"eps must be nonnegative, got {eps}")
    K = eps * _low_gain_direction(plant, im.freqs)
    return LowGainController(G1=im.G1, G2=im.G2, K=K, eps=float(eps))


def _low_gain_margin(A, B, C, G1, G2, K) -> float:
    Acl = np.block([[A, B @ K], [G2 @ C, G1]])
    return stability_margin(Acl)


def tune_epsilon(
    plant,
    im: InternalModel,
    eps_max: Optional[float] = None,
    grid: Optional[int] = None,
    workers: Optional[int] = None,
) -> EpsilonTuning:
    """Maximize the closed-loop stability margin over eps in (0, eps_max]."""
    eps_max = settings.EPS_MAX if eps_max is None else float(eps_max)
    grid = settings.EPS_GRID if grid is None else int(grid)
    workers = settings.WORKERS if workers is None else int(workers)
    if eps_max <= 0 or grid < 3:
        raise ConfigError(f"need eps_max > 0 and at least 3 grid points (got {eps_max}, {grid})")

    A, B, C = plant.A, plant.B, plant.C
    direction = _low_gain_direction(plant, im.freqs)

    def margin_at(eps: float) -> float:
        return _low_gain_margin(A, B, C, im.G1, im.G2, eps * direction)

    eps_grid = np.logspace(np.log10(eps_max) - 4.0, np.log10(eps_max), grid)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            margins = np.array(list(pool.map(margin_at, eps_grid)))
    else:
        margins = np.array([margin_at(e) for e in eps_grid])

    i = int(np.argmax(margins))
    eps_star, best = float(eps_grid[i]), float(margins[i])
    lo, hi = eps_grid[max(i - 1, 0)], eps_grid[min(i + 1, grid - 1)]
    if hi > lo:
        res = optimize.minimize_scalar(lambda e: -margin_at(e), bounds=(lo, hi), method="bounded", options={"xatol": 1e-6 * hi})
        if res.success and -res.fun > best:
            eps_star, best = float(res.x), float(-res.fun)

    open_loop = stability_margin(A)
    poor = best < settings.POOR_MARGIN_RATIO * open_loop
    log_lg.info("q=%d: eps*=%.5g margin=%.5g (open loop %.4g)", im.q, eps_star, best, open_loop)
    if best <= 0:
        log_lg.warning("no eps in (0, %g] stabilizes the loop (best margin %.3e)", eps_max, best)
    elif poor:
        log_lg.warning("poorly stabilizable: best margin %.3e is below %.0f%% of the open-loop margin", best, 100 * settings.POOR_MARGIN_RATIO)
    return EpsilonTuning(
        eps_star=eps_star,
        margin=best,
        open_loop_margin=open_loop,
        poorly_stabilizable=bool(poor),
        grid_eps=eps_grid,
        grid_margin=margins,
    )

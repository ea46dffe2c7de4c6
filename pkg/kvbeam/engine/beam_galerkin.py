"""
Spectral Galerkin model of the clamped Kelvin-Voigt beam

    v_tt + (E I v_xx + d_kv I v_xxt)_xx + d_v v_t = b1 u1 + b2 u2 + sum_k bd_k w_k,
    v = v_x = 0 at x = +-1,    y = (v(xi1), v(xi2)),

on the span of phi_0..phi_{n-1}. Second-order matrices:

    M_lk = <phi_k, phi_l>_w,    F_lk = <phi_k'', (w phi_l)''> = <phi_k'''', phi_l>_w

(closed forms below; F is upper triangular with even offsets and not
symmetric). First-order state x = (alpha, alpha_dot) of dimension 2n.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import chebyshev as cheb
from scipy import linalg

from kvbeam.config import settings
from kvbeam.engine.spectral_basis import (
    ChebGaussRule,
    basis_coefficients,
    cheb_differentiate,
    cheb_interpolate,
    phi_series,
    t_norms_sq,
    weighted_inner_product,
)
from kvbeam.errors import ConfigError, NumericalError
from kvbeam.utils.logs import get_logger

log = get_logger("GALERKIN")

Profile = Callable[[np.ndarray], np.ndarray]

# interpolation degree used to read Chebyshev coefficients off a profile
PROFILE_DEGREE = 64


@dataclass(frozen=True)
class BeamParameters:
    E: float
    I_mom: float
    d_kv: float
    d_v: float
    xi1: float
    xi2: float
    b1: Profile
    b2: Profile
    b_d: tuple = ()
    v0: Optional[Profile] = None
    v1: Optional[Profile] = None

    def __post_init__(self):
        if self.E <= 0 or self.I_mom <= 0:
            raise ConfigError(f"E and I must be positive (E={self.E}, I={self.I_mom})")
        # d_kv = 0 is accepted for undamped reference models; the verify suite flags it
        if self.d_kv < 0 or self.d_v < 0:
            raise ConfigError(f"damping must be nonnegative (d_kv={self.d_kv}, d_v={self.d_v})")
        for name in ("xi1", "xi2"):
            xi = getattr(self, name)
            if not -1.0 < xi < 1.0:
                raise ConfigError(f"{name}={xi} must lie in (-1, 1)")
        object.__setattr__(self, "b_d", tuple(self.b_d))

    @property
    def n_disturbances(self) -> int:
        return len(self.b_d)

    def profiles(self) -> dict[str, Profile]:
        out = {"b1": self.b1, "b2": self.b2}
        for k, f in enumerate(self.b_d, start=1):
            out[f"bd{k}"] = f
        return out


@dataclass(frozen=True)
class GalerkinModel:
    params: BeamParameters
    n: int
    M: np.ndarray
    F: np.ndarray
    B0: np.ndarray
    Bd0: np.ndarray
    C0: np.ndarray
    A: np.ndarray
    B: np.ndarray
    Bd: np.ndarray
    C: np.ndarray
    _chol: tuple = field(repr=False, compare=False, default=())

    @property
    def state_dim(self) -> int:
        return 2 * self.n

    def solve_mass(self, rhs: np.ndarray) -> np.ndarray:
        return linalg.cho_solve(self._chol, rhs)


@dataclass(frozen=True)
class NormGrams:
    G_V0: np.ndarray
    G_X: np.ndarray
    G_V: np.ndarray
    beta_hat: float

    @staticmethod
    def quad(G: np.ndarray, x: np.ndarray) -> float:
        x = np.asarray(x)
        return float(np.real(np.vdot(x, G @ x)))


def basis_matrix(n: int) -> np.ndarray:
    """(n+4) x n matrix whose column k holds the Chebyshev coefficients of phi_k."""
    S = np.zeros((n + 4, n))
    for k in range(n):
        S[k, k], S[k + 2, k], S[k + 4, k] = basis_coefficients(k)
    return S


def assemble_M(n: int) -> np.ndarray:
    if n < 1:
        raise ConfigError(f"basis size must be positive, got {n}")
    l = np.arange(n, dtype=float)
    M = np.diag(np.pi * ((l + 1) ** 2 + 4 * (l + 2) ** 2 + (l + 3) ** 2) / (2 * (l + 3) ** 2))
    M[0, 0] = 35 * np.pi / 18
    if n > 2:
        l2 = l[: n - 2]
        off2 = -np.pi * ((l2 + 2) * (l2 + 5) + (l2 + 1) * (l2 + 4)) / ((l2 + 3) * (l2 + 5))
        M += np.diag(off2, 2) + np.diag(off2, -2)
    if n > 4:
        l4 = l[: n - 4]
        off4 = np.pi * (l4 + 1) / (2 * (l4 + 3))
        M += np.diag(off4, 4) + np.diag(off4, -4)
    return M


def assemble_F(n: int) -> np.ndarray:
    if n < 1:
        raise ConfigError(f"basis size must be positive, got {n}")
    l, k = np.meshgrid(np.arange(n, dtype=float), np.arange(n, dtype=float), indexing="ij")
    upper = 8 * np.pi * (l + 1) * (l + 2) * (l * (l + 4) + 3 * (k + 2) ** 2) / (k + 3)
    offset = k - l
    F = np.where((offset > 0) & (offset % 2 == 0), upper, 0.0)
    d = np.arange(n, dtype=float)
    F[np.diag_indices(n)] = 8 * (d + 1) ** 2 * (d + 2) * (d + 4) * np.pi
    return F


def oracle_M(n: int) -> np.ndarray:
    """M from Chebyshev orthogonality sums, entry by entry."""
    phis = [phi_series(k) for k in range(n)]
    return np.array([[weighted_inner_product(phis[k], phis[l]) for k in range(n)] for l in range(n)])


def oracle_F(n: int) -> np.ndarray:
    """
    F_lk = int phi_k''''(x) phi_l(x) w(x) dx by Gauss-Chebyshev quadrature.

    Both integrations by parts of <phi_k'', (w phi_l)''> are boundary-free
    because w phi_l and (w phi_l)' vanish at +-1.
    """
    rule = ChebGaussRule.for_degree(n + 3)
    D4 = np.column_stack([cheb.chebval(rule.nodes, cheb_differentiate(phi_series(k), 4).coeffs) for k in range(n)])
    P = np.column_stack([cheb.chebval(rule.nodes, phi_series(l).coeffs) for l in range(n)])
    return P.T @ (rule.weights[:, None] * D4)


def profile_boundary_defect(profile: Profile, degree: int = PROFILE_DEGREE) -> float:
    """max |f(+-1)|, |f'(+-1)| read off the Chebyshev interpolant."""
    s = cheb_interpolate(profile, degree)
    ds = cheb.chebder(s.coeffs)
    ends = np.array([1.0, -1.0])
    return float(max(np.max(np.abs(cheb.chebval(ends, s.coeffs))), np.max(np.abs(cheb.chebval(ends, ds)))))


def assemble_input_vector(profile: Profile, n: int, name: str = "profile") -> np.ndarray:
    """<b, phi_l>_w for l < n from the Chebyshev coefficients q of b."""
    defect = profile_boundary_defect(profile)
    if defect > settings.BC_TOL:
        log.warning("%s violates the clamped boundary conditions (defect %.3e)", name, defect)

    q = np.zeros(n + 4)
    coeffs = cheb_interpolate(profile, max(n + 3, PROFILE_DEGREE)).coeffs
    q[: min(coeffs.size, n + 4)] = coeffs[: n + 4]
    weighted = t_norms_sq(n + 4) * q
    return basis_matrix(n).T @ weighted


def assemble_output_matrix(xi1: float, xi2: float, n: int) -> np.ndarray:
    pts = np.array([xi1, xi2], dtype=float)
    if np.any(np.abs(pts) > 1.0):
        raise ConfigError(f"measurement points must lie in [-1, 1], got {pts.tolist()}")
    return cheb.chebvander(pts, n + 3) @ basis_matrix(n)


def assemble_first_order(params: BeamParameters, n: int) -> GalerkinModel:
    if n < 5:
        raise ConfigError(f"first-order assembly needs n >= 5, got {n}")
    M = assemble_M(n)
    F = assemble_F(n)
    B0 = np.column_stack([assemble_input_vector(params.b1, n, "b1"), assemble_input_vector(params.b2, n, "b2")])
    if params.b_d:
        Bd0 = np.column_stack(
            [assemble_input_vector(f, n, f"bd{k}") for k, f in enumerate(params.b_d, start=1)]
        )
    else:
        Bd0 = np.zeros((n, 0))
    C0 = assemble_output_matrix(params.xi1, params.xi2, n)

    try:
        chol = linalg.cho_factor(M, lower=True)
    except linalg.LinAlgError as e:
        raise NumericalError(f"mass matrix is numerically singular at n={n}: {e}") from e

    MinvF = linalg.cho_solve(chol, F)
    EI = params.E * params.I_mom
    Id = np.eye(n)
    Z = np.zeros((n, n))
    A = np.block([[Z, Id], [-EI * MinvF, -params.d_kv * params.I_mom * MinvF - params.d_v * Id]])
    B = np.vstack([np.zeros((n, 2)), linalg.cho_solve(chol, B0)])
    Bd = np.vstack([np.zeros((n, Bd0.shape[1])), linalg.cho_solve(chol, Bd0)])
    C = np.hstack([C0, np.zeros((2, n))])
    if not np.all(np.isfinite(A)):
        raise NumericalError(f"non-finite entries in the first-order matrix at n={n}")

    log.info("assembled n=%d (state dim %d, %d disturbance inputs)", n, 2 * n, Bd0.shape[1])
    return GalerkinModel(
        params=params, n=n, M=M, F=F, B0=B0, Bd0=Bd0, C0=C0, A=A, B=B, Bd=Bd, C=C, _chol=chol,
    )


def _split(model: GalerkinModel, x) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(x, tuple):
        x1, x2 = (np.asarray(v) for v in x)
    else:
        x = np.asarray(x)
        x1, x2 = x[: model.n], x[model.n :]
    if x1.shape != (model.n,) or x2.shape != (model.n,):
        raise ConfigError(f"coordinate vectors must have length {model.n} per component")
    return x1, x2


def form_value(model: GalerkinModel, phi, psi, symmetric: bool = False):
    """
    a(phi, psi) = -<phi2, psi1>_V0 + E I psi2^T F phi1 + d_kv I psi2^T F phi2 + d_v psi2^T M phi2

    `symmetric=True` replaces F by its symmetric part in every pairing.
    psi enters conjugated.
    """
    p = model.params
    phi1, phi2 = _split(model, phi)
    psi1, psi2 = (np.conj(v) for v in _split(model, psi))
    F = 0.5 * (model.F + model.F.T) if symmetric else model.F
    G = p.E * p.I_mom * 0.5 * (model.F + model.F.T)
    val = (
        -psi1 @ G @ phi2
        + p.E * p.I_mom * (psi2 @ F @ phi1)
        + p.d_kv * p.I_mom * (psi2 @ F @ phi2)
        + p.d_v * (psi2 @ model.M @ phi2)
    )
    return complex(val) if np.iscomplexobj(val) else float(val)


def norm_grams(params: BeamParameters, n: int) -> NormGrams:
    if n < 5:
        raise ConfigError(f"norm Grams need n >= 5, got {n}")
    M = assemble_M(n)
    F = assemble_F(n)
    G = params.E * params.I_mom * 0.5 * (F + F.T)
    try:
        linalg.cholesky(G, lower=True)
    except linalg.LinAlgError as e:
        raise NumericalError(f"V0 Gram is not positive definite at n={n}") from e
    Z = np.zeros((n, n))
    beta_sq = linalg.eigh(M, G, eigvals_only=True)[-1]
    return NormGrams(
        G_V0=G,
        G_X=np.block([[G, Z], [Z, M]]),
        G_V=np.block([[G, Z], [Z, G]]),
        beta_hat=float(np.sqrt(beta_sq)),
    )


def project_profile(model: GalerkinModel, profile: Profile) -> np.ndarray:
    """Coordinates of the w-orthogonal projection of `profile` onto span(phi_k)."""
    return model.solve_mass(assemble_input_vector(profile, model.n))


def initial_state(model: GalerkinModel) -> np.ndarray:
    p = model.params
    x0 = np.zeros(model.state_dim)
    if p.v0 is not None:
        x0[: model.n] = project_profile(model, p.v0)
    if p.v1 is not None:
        x0[model.n :] = project_profile(model, p.v1)
    return x0


def deflection(model: GalerkinModel, alpha: np.ndarray, xi_grid: Sequence[float]) -> np.ndarray:
    """v(xi) on `xi_grid` for coordinate rows `alpha` (shape (..., n))."""
    Phi = cheb.chebvander(np.asarray(xi_grid, dtype=float), model.n + 3) @ basis_matrix(model.n)
    return np.asarray(alpha)[..., : model.n] @ Phi.T


def perturbed(params: BeamParameters, E_scale: float) -> BeamParameters:
    return replace(params, E=params.E * E_scale)

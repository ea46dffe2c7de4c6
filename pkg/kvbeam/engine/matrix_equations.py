"""
Dense matrix equations for controller synthesis: stability margins, CARE,
Lyapunov, balanced truncation. scipy.linalg does the heavy lifting
(Hamiltonian/QZ for the CARE, Bartels-Stewart for Lyapunov); everything
here adds residual bookkeeping and the Hurwitz acceptance rule.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg

from kvbeam.config import settings
from kvbeam.errors import ConfigError, SolverError
from kvbeam.utils.logs import get_logger

log_care = get_logger("RICCATI")
log_lyap = get_logger("LYAP")
log_bt = get_logger("BT")


@dataclass(frozen=True)
class StateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: Optional[np.ndarray] = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        C = np.asarray(self.C, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        if C.ndim == 1:
            C = C[None, :]
        D = np.zeros((C.shape[0], B.shape[1])) if self.D is None else np.atleast_2d(np.asarray(self.D, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ConfigError(f"state matrix must be square, got {A.shape}")
        if B.shape[0] != A.shape[0] or C.shape[1] != A.shape[0]:
            raise ConfigError(f"B {B.shape} / C {C.shape} do not match state dimension {A.shape[0]}")
        if D.shape != (C.shape[0], B.shape[1]):
            raise ConfigError(f"feedthrough shape {D.shape} does not match {(C.shape[0], B.shape[1])}")
        for name, val in (("A", A), ("B", B), ("C", C), ("D", D)):
            object.__setattr__(self, name, val)

    @property
    def order(self) -> int:
        return self.A.shape[0]

    def evaluate(self, s: complex) -> np.ndarray:
        """C (sI - A)^{-1} B + D."""
        m = self.order
        try:
            X = linalg.solve(s * np.eye(m) - self.A, self.B.astype(complex))
        except linalg.LinAlgError as e:
            raise SolverError(f"resolvent is singular at s={s}") from e
        return self.C @ X + self.D


@dataclass(frozen=True)
class BTResult:
    reduced: StateSpace
    hankel_sv: np.ndarray
    # (W_r^T, T_r^T), both r x m; reduced.A = W_r^T A T_r
    projections: tuple


def stability_margin(A: np.ndarray) -> float:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ConfigError(f"stability margin needs a square matrix, got shape {A.shape}")
    if A.size == 0:
        return float("inf")
    if not np.all(np.isfinite(A)):
        raise SolverError("matrix has non-finite entries")
    try:
        ev = linalg.eigvals(A)
    except linalg.LinAlgError as e:
        raise SolverError(f"eigenvalue computation failed: {e}") from e
    return float(-np.max(ev.real))


def is_hurwitz(A: np.ndarray) -> bool:
    return stability_margin(A) > settings.HURWITZ_TOL


def relative_residual(residual: np.ndarray, *terms: np.ndarray) -> float:
    """||residual||_F over the summed Frobenius norms of the equation's terms."""
    scale = sum(np.linalg.norm(t) for t in terms)
    r = np.linalg.norm(residual)
    return float(r / scale) if scale > 0 else float(r)


def lyapunov_residual(A: np.ndarray, W: np.ndarray, X: np.ndarray) -> float:
    AX = A @ X
    return relative_residual(AX + AX.T + W, AX, AX.T, W)


def care_residual(A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray, X: np.ndarray) -> float:
    AtX = A.T @ X
    XB = X @ B
    quad = XB @ linalg.solve(R, XB.T, assume_a="pos")
    return relative_residual(AtX + AtX.T - quad + Q, AtX, AtX.T, quad, Q)


def solve_lyapunov(A: np.ndarray, W: np.ndarray) -> np.ndarray:
    """X with A X + X A^T + W = 0 (Bartels-Stewart)."""
    A = np.asarray(A, dtype=float)
    W = np.asarray(W, dtype=float)
    if not is_hurwitz(A):
        raise SolverError(f"Lyapunov equation needs a Hurwitz matrix (margin {stability_margin(A):.3e})")
    if not np.allclose(W, W.T, rtol=1e-12, atol=1e-14 * max(1.0, np.abs(W).max(initial=0.0))):
        raise ConfigError("Lyapunov right-hand side must be symmetric")

    X = linalg.solve_continuous_lyapunov(A, -W)
    X = 0.5 * (X + X.T)
    res = lyapunov_residual(A, W, X)
    log_lyap.debug("order=%d residual=%.2e", A.shape[0], res)
    if res > settings.RESIDUAL_TOL:
        log_lyap.warning("relative residual %.2e above %.0e (order %d)", res, settings.RESIDUAL_TOL, A.shape[0])
    return X


def kron_lyapunov(A: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Vectorized solve of A X + X A^T = -W; only sensible for small orders."""
    m = A.shape[0]
    Id = np.eye(m)
    K = np.kron(Id, A) + np.kron(A, Id)
    x = np.linalg.solve(K, -W.reshape(-1, order="F"))
    return x.reshape((m, m), order="F")


def solve_care(A: np.ndarray, B: np.ndarray, Q: np.ndarray, R: np.ndarray) -> np.ndarray:
    """Stabilizing solution of A^T X + X A - X B R^{-1} B^T X + Q = 0."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    try:
        X = linalg.solve_continuous_are(A, B, Q, R)
    except (linalg.LinAlgError, ValueError) as e:
        raise SolverError(f"no stabilizing CARE solution: {e}") from e
    X = 0.5 * (X + X.T)

    closed = A - B @ linalg.solve(R, B.T @ X, assume_a="pos")
    margin = stability_margin(closed)
    if not is_hurwitz(closed):
        raise SolverError(f"CARE solution is not stabilizing (closed-loop margin {margin:.3e})")
    res = care_residual(A, B, Q, R, X)
    log_care.info("order=%d residual=%.2e closed-loop margin=%.4g", A.shape[0], res, margin)
    if res > settings.RESIDUAL_TOL:
        log_care.warning("relative residual %.2e above %.0e", res, settings.RESIDUAL_TOL)
    return X


def _gramian_factor(W: np.ndarray) -> np.ndarray:
    """L with W = L L^T; falls back to a clipped eigen square root when W is semidefinite within roundoff."""
    try:
        return linalg.cholesky(W, lower=True)
    except linalg.LinAlgError:
        lam, V = linalg.eigh(W)
        lam = np.clip(lam, 0.0, None)
        log_bt.debug("Gramian not numerically definite, using eigen factor (min eig clipped)")
        return V * np.sqrt(lam)


def hankel_singular_values(sys: StateSpace) -> np.ndarray:
    Lc = _gramian_factor(solve_lyapunov(sys.A, sys.B @ sys.B.T))
    Lo = _gramian_factor(solve_lyapunov(sys.A.T, sys.C.T @ sys.C))
    return linalg.svd(Lo.T @ Lc, compute_uv=False)


def balanced_truncate(sys: StateSpace, r: int) -> BTResult:
    """Square-root balanced truncation to order r."""
    m = sys.order
    if not 1 <= r <= m:
        raise ConfigError(f"reduction order must satisfy 1 <= r <= {m}, got {r}")

    Lc = _gramian_factor(solve_lyapunov(sys.A, sys.B @ sys.B.T))
    Lo = _gramian_factor(solve_lyapunov(sys.A.T, sys.C.T @ sys.C))
    U, s, Vh = linalg.svd(Lo.T @ Lc)

    if s[r - 1] <= 0.0:
        raise SolverError(f"Hankel singular value {r} is zero; the system has fewer than {r} balanced states")
    if r < m and np.isclose(s[r - 1], s[r], rtol=1e-10, atol=0.0):
        raise SolverError(f"Hankel singular values tie at the cut r={r} ({s[r - 1]:.6e})")

    scale = 1.0 / np.sqrt(s[:r])
    T = (Lc @ Vh[:r].T) * scale
    W = (Lo @ U[:, :r]) * scale
    reduced = StateSpace(A=W.T @ sys.A @ T, B=W.T @ sys.B, C=sys.C @ T, D=sys.D)

    tail = float(np.sum(s[r:]))
    log_bt.info("order %d -> %d, sigma_1=%.3e sigma_r=%.3e, error bound 2*tail=%.3e", m, r, s[0], s[r - 1], 2 * tail)
    log_bt.debug("Hankel singular values: %s", np.array2string(s[: min(m, 12)], precision=3))
    return BTResult(reduced=reduced, hankel_sv=s, projections=(W.T, T.T))

"""
Numerical self-checks behind `verify`: closed-form matrices against
quadrature, the form inequalities over random Galerkin elements, solver
residuals, internal-model structure and the transmission-zero test. Every
check returns a CheckResult; nothing here raises on a failed check.
"""
from __future__ import annotations

import numpy as np

from kvbeam.config import settings
from kvbeam.engine import beam_galerkin as bg
from kvbeam.engine import controller_synthesis as cs
from kvbeam.engine.matrix_equations import is_hurwitz, kron_lyapunov, lyapunov_residual, solve_lyapunov, stability_margin
from kvbeam.engine.spectral_basis import (
    ChebSeries,
    cheb_differentiate,
    cheb_eval,
    phi_series,
    quadrature_inner_product,
    weighted_inner_product,
)
from kvbeam.errors import KvBeamError
from kvbeam.state import CheckResult, VerifyReport
from kvbeam.utils.logs import get_logger

log = get_logger("VERIFY")


def _rel_diff(closed: np.ndarray, oracle: np.ndarray) -> float:
    """Elementwise relative error on the nonzero pattern; structural zeros relative to the largest entry."""
    nz = closed != 0
    rel = np.abs(closed[nz] - oracle[nz]) / np.abs(closed[nz])
    zeros = np.abs(oracle[~nz]) / np.abs(oracle).max()
    return float(max(rel.max(initial=0.0), zeros.max(initial=0.0)))


def check_mass_matrix(n: int, tol: float = 1e-10) -> CheckResult:
    d = _rel_diff(bg.assemble_M(n), bg.oracle_M(n))
    m00 = abs(bg.assemble_M(1)[0, 0] - 35 * np.pi / 18) / (35 * np.pi / 18)
    worst = max(d, m00)
    return CheckResult("mass_matrix_closed_form", worst <= tol, worst, tol, f"n={n}, M00 rel err {m00:.1e}")


def check_stiffness_matrix(n: int, tol: float = 1e-8) -> CheckResult:
    d = _rel_diff(bg.assemble_F(n), bg.oracle_F(n))
    return CheckResult("stiffness_matrix_closed_form", d <= tol, d, tol, f"n={n}")


def check_basis_boundary(kmax: int = 40, tol: float = 1e-10) -> CheckResult:
    worst = 0.0
    for k in range(kmax + 1):
        s = phi_series(k)
        ds = cheb_differentiate(s)
        worst = max(worst, abs(cheb_eval(s, 1.0)), abs(cheb_eval(s, -1.0)), abs(cheb_eval(ds, 1.0)), abs(cheb_eval(ds, -1.0)))
    return CheckResult("basis_boundary_values", worst <= tol, worst, tol, f"k <= {kmax}")


def check_inner_product_quadrature(rng: np.random.Generator, pairs: int = 20, max_degree: int = 40, tol: float = 1e-10) -> CheckResult:
    worst = 0.0
    for _ in range(pairs):
        f = ChebSeries(rng.standard_normal(int(rng.integers(1, max_degree + 2))))
        g = ChebSeries(rng.standard_normal(int(rng.integers(1, max_degree + 2))))
        exact = weighted_inner_product(f, g)
        quad = quadrature_inner_product(f, g)
        scale = max(abs(exact), np.linalg.norm(f.coeffs) * np.linalg.norm(g.coeffs))
        worst = max(worst, abs(exact - quad) / scale)
    return CheckResult("inner_product_quadrature", worst <= tol, worst, tol, f"{pairs} random pairs")


def check_profiles(params: bg.BeamParameters) -> CheckResult:
    defects = {name: bg.profile_boundary_defect(f) for name, f in params.profiles().items()}
    worst = max(defects.values())
    detail = ", ".join(f"{k}={v:.1e}" for k, v in defects.items())
    return CheckResult("profile_boundary_conditions", worst <= settings.BC_TOL, worst, settings.BC_TOL, detail)


def _random_elements(rng: np.random.Generator, n: int, count: int) -> np.ndarray:
    # decaying coefficients keep the V-norm from being swamped by the top modes
    decay = 1.0 / (1.0 + np.arange(n)) ** 2
    return rng.standard_normal((count, 2 * n)) * np.concatenate([decay, decay])


def check_coercivity(params: bg.BeamParameters, n: int, rng: np.random.Generator, samples: int = 1000, tol: float = 1e-8) -> list[CheckResult]:
    """
    Re a(phi, phi) = (d_kv/E)(|phi|_V^2 - |phi1|_V0^2) + d_v |phi2|_w^2 (symmetrized pairings),
    and the inequality with |phi|_X^2 in place of |phi1|_V0^2.
    """
    if params.d_kv == 0:
        log.warning("d_kv = 0: coercivity constants vanish, check skipped")
        return [CheckResult("coercivity_identity", False, skipped=True, detail="d_kv = 0")]
    model = bg.assemble_first_order(params, n)
    grams = bg.norm_grams(params, n)
    lam = params.d_kv / params.E
    worst_id, worst_ineq = 0.0, -np.inf
    for phi in _random_elements(rng, n, samples):
        a = bg.form_value(model, phi, phi, symmetric=True)
        v_sq = grams.quad(grams.G_V, phi)
        v0_sq = grams.quad(grams.G_V0, phi[:n])
        w_sq = grams.quad(model.M, phi[n:])
        x_sq = grams.quad(grams.G_X, phi)
        rhs = lam * (v_sq - v0_sq) + params.d_v * w_sq
        scale = abs(a) + lam * v_sq + params.d_v * w_sq
        worst_id = max(worst_id, abs(a - rhs) / scale)
        worst_ineq = max(worst_ineq, (lam * (v_sq - x_sq) + params.d_v * w_sq - a) / scale)
    return [
        CheckResult("coercivity_identity", worst_id <= tol, worst_id, tol, f"{samples} samples"),
        CheckResult("coercivity_inequality", worst_ineq <= tol, worst_ineq, tol, "max normalized violation"),
    ]


def check_boundedness(params: bg.BeamParameters, n: int, rng: np.random.Generator, samples: int = 1000) -> CheckResult:
    model = bg.assemble_first_order(params, n)
    grams = bg.norm_grams(params, n)
    q1 = 2.0 + params.d_kv / params.E + params.d_v * grams.beta_hat**2
    phis = _random_elements(rng, n, samples)
    psis = _random_elements(rng, n, samples)
    worst = 0.0
    for phi, psi in zip(phis, psis):
        a = bg.form_value(model, phi, psi, symmetric=True)
        bound = q1 * np.sqrt(grams.quad(grams.G_V, phi) * grams.quad(grams.G_V, psi))
        worst = max(worst, abs(a) / bound)
    return CheckResult("boundedness", worst <= 1.0 + 1e-12, worst, 1.0, f"q1={q1:.6g}, beta_hat={grams.beta_hat:.4g}")


def check_generator_identity(params: bg.BeamParameters, n: int, rng: np.random.Generator, samples: int = 50, tol: float = 1e-8) -> CheckResult:
    """psi^T G_X (A phi) = -a(phi, psi) with the raw stiffness matrix."""
    model = bg.assemble_first_order(params, n)
    grams = bg.norm_grams(params, n)
    worst = 0.0
    for phi, psi in zip(_random_elements(rng, n, samples), _random_elements(rng, n, samples)):
        lhs = psi @ grams.G_X @ (model.A @ phi)
        rhs = -bg.form_value(model, phi, psi)
        scale = np.abs(psi) @ np.abs(grams.G_X) @ np.abs(model.A @ phi) + 1e-300
        worst = max(worst, abs(lhs - rhs) / scale)
    return CheckResult("generator_form_identity", worst <= tol, worst, tol, f"{samples} pairs")


def check_lyapunov_oracle(rng: np.random.Generator, sizes=(4, 8, 12), tol: float = 1e-8) -> CheckResult:
    worst = 0.0
    for m in sizes:
        A = rng.standard_normal((m, m))
        # shift so the margin is exactly 1
        A -= (1.0 - stability_margin(A)) * np.eye(m)
        W = rng.standard_normal((m, m))
        W = W @ W.T
        X = solve_lyapunov(A, W)
        Xk = kron_lyapunov(A, W)
        worst = max(worst, np.linalg.norm(X - Xk) / np.linalg.norm(Xk), lyapunov_residual(A, W, X))
    return CheckResult("lyapunov_kronecker_oracle", worst <= tol, worst, tol, f"orders {list(sizes)}")


def check_synthesis_residuals(plant: bg.GalerkinModel, opts: cs.SynthesisOptions) -> list[CheckResult]:
    tol = settings.RESIDUAL_TOL
    try:
        im = cs.build_internal_model(opts.freqs)
        obs = cs.design_observer_gain(plant, opts)
        fb = cs.design_state_feedback(plant, im, opts)
    except KvBeamError as e:
        return [CheckResult("synthesis_riccati", False, detail=str(e))]
    return [
        CheckResult("observer_riccati_residual", obs.residual <= tol, obs.residual, tol, f"margin {obs.margin:.6g}"),
        CheckResult("regulator_riccati_residual", fb.residual <= tol, fb.residual, tol, f"margin {fb.margin:.6g}"),
    ]


def check_internal_model(freqs) -> CheckResult:
    im = cs.build_internal_model(freqs)
    smin = cs.pbh_sigma_min(im.G1, im.G2)
    ev = np.linalg.eigvals(im.G1)
    expected = np.concatenate([np.zeros(2)] + [np.array([1j * w, 1j * w, -1j * w, -1j * w]) for w in im.freqs[1:]])
    spec_err = float(np.max(np.abs(np.sort_complex(ev) - np.sort_complex(expected)))) if ev.size else 0.0
    ok = smin > 1e-8 and spec_err <= 1e-10 * max(1.0, im.freqs[-1])
    return CheckResult("internal_model", ok, smin, 1e-8, f"dim {im.dim}, spectrum error {spec_err:.1e}")


def check_zeros(plant, freqs, threshold: float) -> CheckResult:
    rep = cs.check_transmission_zeros(plant, freqs, threshold)
    return CheckResult(
        "transmission_zeros", rep.passed, float(rep.sigma_min.min()), threshold,
        "failures at " + str(rep.failures) if rep.failures else f"{rep.freqs.size} frequencies",
    )


def check_open_loop(plant: bg.GalerkinModel) -> CheckResult:
    margin = stability_margin(plant.A)
    return CheckResult("open_loop_hurwitz", is_hurwitz(plant.A), margin, settings.HURWITZ_TOL, f"n={plant.n}")


def run_verify(
    params: bg.BeamParameters,
    opts: cs.SynthesisOptions,
    seed: int = 0,
    samples: int = 1000,
    oracle_n: int = 40,
) -> VerifyReport:
    rng = np.random.default_rng(seed)
    report = VerifyReport()
    report.add(check_mass_matrix(oracle_n))
    report.add(check_stiffness_matrix(oracle_n))
    report.add(check_basis_boundary())
    report.add(check_inner_product_quadrature(rng))
    report.add(check_profiles(params))
    for c in check_coercivity(params, opts.n, rng, samples):
        report.add(c)
    report.add(check_boundedness(params, opts.n, rng, samples))
    report.add(check_generator_identity(params, opts.n, rng))
    report.add(check_lyapunov_oracle(rng))

    plant = bg.assemble_first_order(params, opts.n)
    report.add(check_open_loop(plant))
    report.add(check_internal_model(opts.freqs))
    report.add(check_zeros(plant, opts.freqs, opts.zero_threshold))
    for c in check_synthesis_residuals(plant, opts):
        report.add(c)

    for c in report.checks:
        status = "skip" if c.skipped else ("ok" if c.passed else "FAIL")
        log.info("%-30s %-4s value=%.3e tol=%.1e %s", c.name, status, c.value, c.tolerance, c.detail)
    return report

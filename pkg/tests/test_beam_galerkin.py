from dataclasses import replace

import numpy as np
import pytest

from kvbeam.engine import beam_galerkin as bg
from kvbeam.engine.matrix_equations import stability_margin
from kvbeam.engine.spectral_basis import ChebGaussRule, cheb_eval, phi_series
from kvbeam.errors import ConfigError


def assert_matches_oracle(closed, oracle, rtol):
    np.testing.assert_allclose(closed, oracle, rtol=rtol, atol=1e-12 * np.abs(oracle).max())


def test_mass_matrix_entries():
    M = bg.assemble_M(6)
    assert M[0, 0] == pytest.approx(35 * np.pi / 18, rel=1e-12)
    assert M[1, 1] == pytest.approx(7 * np.pi / 4, rel=1e-12)
    assert M[0, 1] == 0.0
    np.testing.assert_array_equal(M, M.T)


def test_stiffness_matrix_entries():
    F = bg.assemble_F(6)
    assert F[0, 0] == pytest.approx(64 * np.pi)
    assert F[0, 2] == pytest.approx(768 * np.pi / 5)
    assert F[2, 0] == 0.0
    assert F[0, 1] == 0.0


@pytest.mark.parametrize("n", [1, 5, 39])
def test_closed_forms_match_oracles(n):
    assert_matches_oracle(bg.assemble_M(n), bg.oracle_M(n), 1e-10)
    assert_matches_oracle(bg.assemble_F(n), bg.oracle_F(n), 1e-8)


def test_oracle_mass_corner():
    assert bg.oracle_M(1)[0, 0] == pytest.approx(35 * np.pi / 18, rel=1e-12)


def test_input_vector_examples(flagship_params):
    n = 12
    np.testing.assert_allclose(bg.assemble_input_vector(lambda x: 0.0 * x, n), np.zeros(n), atol=1e-15)

    phi0 = phi_series(0)
    np.testing.assert_allclose(bg.assemble_input_vector(lambda x: cheb_eval(phi0, x), n), bg.assemble_M(n)[:, 0], atol=1e-12)

    rule = ChebGaussRule.for_degree(n + 12)
    b1 = flagship_params.b1(rule.nodes)
    quad = [rule.integrate(b1 * cheb_eval(phi_series(l), rule.nodes)) for l in range(n)]
    np.testing.assert_allclose(bg.assemble_input_vector(flagship_params.b1, n), quad, atol=1e-10)


def test_output_matrix_columns():
    n = 10
    C0 = bg.assemble_output_matrix(0.0, 0.3, n)
    assert C0.shape == (2, n)
    assert C0[0, 0] == pytest.approx(8 / 3)
    expected = np.array([[cheb_eval(phi_series(k), x) for k in range(n)] for x in (0.0, 0.3)])
    np.testing.assert_allclose(C0, expected, atol=1e-12)
    np.testing.assert_allclose(bg.assemble_output_matrix(-1.0, 1.0, n), 0.0, atol=1e-10)
    with pytest.raises(ConfigError):
        bg.assemble_output_matrix(0.0, 1.2, n)


def test_first_order_structure(design_plant):
    m = design_plant
    assert m.state_dim == 78
    assert m.A.shape == (78, 78)
    assert m.B.shape == (78, 2)
    assert m.Bd.shape == (78, 1)
    assert m.C.shape == (2, 78)
    np.testing.assert_array_equal(m.A[:39, 39:], np.eye(39))
    np.testing.assert_array_equal(m.B[:39], 0.0)
    np.testing.assert_allclose(m.M @ m.B[39:], m.B0, rtol=1e-10, atol=1e-12)


def test_open_loop_margin(design_plant):
    assert 0.30 <= stability_margin(design_plant.A) <= 0.40


def test_undamped_beam_is_marginally_stable(flagship_params):
    undamped = replace(flagship_params, d_kv=0.0, d_v=0.0)
    ev = np.linalg.eigvals(bg.assemble_first_order(undamped, 8).A)
    # eigensolver roundoff scales with the spectral radius
    assert ev.real.min() >= -1e-8 * max(1.0, np.abs(ev).max())


def test_first_order_rejects_small_basis(flagship_params):
    with pytest.raises(ConfigError):
        bg.assemble_first_order(flagship_params, 4)


def test_parameter_validation(flagship_params):
    with pytest.raises(ConfigError):
        replace(flagship_params, E=0.0)
    with pytest.raises(ConfigError):
        replace(flagship_params, d_v=-0.1)
    with pytest.raises(ConfigError):
        replace(flagship_params, xi1=1.0)


def test_form_value_examples(design_plant):
    n, p = design_plant.n, design_plant.params
    e0 = np.zeros(n)
    e0[0] = 1.0
    zero = np.zeros(n)
    assert bg.form_value(design_plant, (e0, zero), (e0, zero)) == 0.0
    expected = p.d_kv * p.I_mom * design_plant.F[0, 0] + p.d_v * design_plant.M[0, 0]
    assert bg.form_value(design_plant, (zero, e0), (zero, e0)) == pytest.approx(expected)
    with pytest.raises(ConfigError):
        bg.form_value(design_plant, np.zeros(3), np.zeros(3))


def test_coercivity_identity(flagship_params, design_plant, rng):
    n = design_plant.n
    grams = bg.norm_grams(flagship_params, n)
    lam = flagship_params.d_kv / flagship_params.E
    decay = 1.0 / (1.0 + np.arange(n)) ** 2
    for _ in range(50):
        phi = rng.standard_normal(2 * n) * np.concatenate([decay, decay])
        a = bg.form_value(design_plant, phi, phi, symmetric=True)
        v = grams.quad(grams.G_V, phi)
        w = grams.quad(design_plant.M, phi[n:])
        rhs = lam * (v - grams.quad(grams.G_V0, phi[:n])) + flagship_params.d_v * w
        assert a == pytest.approx(rhs, rel=1e-8)
        # the X-norm dominates the V0 part, so the weaker bound follows
        assert a >= lam * (v - grams.quad(grams.G_X, phi)) + flagship_params.d_v * w - 1e-8 * abs(a)


def test_generator_matches_form(flagship_params, design_plant, rng):
    n = design_plant.n
    grams = bg.norm_grams(flagship_params, n)
    decay = 1.0 / (1.0 + np.arange(n)) ** 2
    phi = rng.standard_normal(2 * n) * np.concatenate([decay, decay])
    psi = rng.standard_normal(2 * n) * np.concatenate([decay, decay])
    Aphi = design_plant.A @ phi
    lhs = psi @ grams.G_X @ Aphi
    scale = np.abs(psi) @ np.abs(grams.G_X) @ np.abs(Aphi)
    assert abs(lhs + bg.form_value(design_plant, phi, psi)) <= 1e-8 * scale


def test_norm_grams(flagship_params):
    grams = bg.norm_grams(flagship_params, 39)
    e = np.zeros(78)
    e[39] = 1.0
    assert grams.quad(grams.G_X, e) == pytest.approx(35 * np.pi / 18)
    assert np.linalg.eigvalsh(grams.G_V0).min() > 0
    assert 0 < grams.beta_hat < np.inf
    assert np.linalg.eigvalsh(bg.norm_grams(flagship_params, 69).G_V0).min() > 0


def test_beta_hat_bounds_weighted_norm(flagship_params, rng):
    n = 20
    grams = bg.norm_grams(flagship_params, n)
    M = bg.assemble_M(n)
    for _ in range(20):
        f = rng.standard_normal(n)
        assert grams.quad(M, f) <= grams.beta_hat**2 * grams.quad(grams.G_V0, f) * (1 + 1e-10)


def test_profiles_satisfy_boundary_conditions(flagship_params):
    for f in flagship_params.profiles().values():
        assert bg.profile_boundary_defect(f) <= 1e-8
    assert bg.profile_boundary_defect(lambda x: 1.0 + 0.0 * x) == pytest.approx(1.0)


def test_projection_and_deflection_round_trip(design_plant):
    alpha = np.zeros(design_plant.n)
    alpha[:3] = [0.5, -0.2, 0.1]
    S = bg.basis_matrix(design_plant.n)
    profile = lambda x: np.polynomial.chebyshev.chebval(x, S @ alpha)
    np.testing.assert_allclose(bg.project_profile(design_plant, profile), alpha, atol=1e-10)
    xi = np.linspace(-1, 1, 9)
    np.testing.assert_allclose(bg.deflection(design_plant, alpha, xi), profile(xi), atol=1e-12)


def test_initial_state_defaults_to_zero(design_plant):
    np.testing.assert_array_equal(bg.initial_state(design_plant), np.zeros(78))


def test_perturbed_scales_stiffness(flagship_params):
    assert bg.perturbed(flagship_params, 1.05).E == pytest.approx(10.5)

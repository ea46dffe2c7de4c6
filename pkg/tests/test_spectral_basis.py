import numpy as np
import pytest
from numpy.polynomial import chebyshev as cheb

from kvbeam.engine.spectral_basis import (
    ChebGaussRule,
    ChebSeries,
    cheb_differentiate,
    cheb_eval,
    cheb_interpolate,
    phi_series,
    quadrature_inner_product,
    t_norms_sq,
    weighted_inner_product,
)
from kvbeam.errors import ConfigError


def T(k: int) -> ChebSeries:
    c = np.zeros(k + 1)
    c[k] = 1.0
    return ChebSeries(c)


def test_eval_simple_values():
    assert cheb_eval(T(2), 0.0) == pytest.approx(-1.0)
    for k in range(12):
        assert cheb_eval(T(k), 1.0) == pytest.approx(1.0)
    assert cheb_eval(phi_series(0), 0.0) == pytest.approx(8.0 / 3.0)


def test_eval_rejects_points_outside_interval():
    with pytest.raises(ConfigError):
        cheb_eval(T(3), 1.5)


def test_phi_coefficients():
    np.testing.assert_allclose(phi_series(0).coeffs, [1, 0, -4 / 3, 0, 1 / 3])
    np.testing.assert_allclose(phi_series(1).coeffs, [0, 1, 0, -3 / 2, 0, 1 / 2])
    with pytest.raises(ConfigError):
        phi_series(-1)


@pytest.mark.parametrize("k", range(41))
def test_phi_clamped_at_both_ends(k):
    s = phi_series(k)
    ds = cheb_differentiate(s)
    for x in (-1.0, 1.0):
        assert abs(cheb_eval(s, x)) <= 1e-12
        assert abs(cheb_eval(ds, x)) <= 1e-10


def test_differentiate_low_degree():
    np.testing.assert_allclose(cheb_differentiate(T(1)).coeffs, [1.0])
    np.testing.assert_allclose(cheb_differentiate(T(2)).coeffs, [0.0, 4.0])
    np.testing.assert_allclose(cheb_differentiate(T(2), order=3).coeffs, [0.0])


def test_fourth_derivative_against_finite_differences():
    s = phi_series(0)
    d4 = cheb_differentiate(s, 4)
    h = 1e-2
    xs = np.linspace(-0.9, 0.9, 20)
    f = lambda x: cheb.chebval(x, s.coeffs)
    fd = (f(xs - 2 * h) - 4 * f(xs - h) + 6 * f(xs) - 4 * f(xs + h) + f(xs + 2 * h)) / h**4
    # phi_0 is quartic, so the central stencil is exact up to roundoff
    np.testing.assert_allclose(fd, cheb_eval(d4, xs), rtol=1e-6)


def test_interpolate_constants_and_quadratics():
    np.testing.assert_allclose(cheb_interpolate(lambda x: 1.0, 4).coeffs, [1, 0, 0, 0, 0], atol=1e-14)
    np.testing.assert_allclose(cheb_interpolate(lambda x: x**2, 2).coeffs, [0.5, 0.0, 0.5], atol=1e-14)


def test_interpolate_reproduces_actuator_profile():
    b1 = lambda x: (x + 1) ** 2 * (1 - x) ** 6 / 3
    s = cheb_interpolate(b1, 12)
    xs = np.linspace(-1, 1, 101)
    np.testing.assert_allclose(cheb_eval(s, xs), b1(xs), atol=1e-12)


def test_interpolate_is_identity_on_polynomials(rng):
    c = rng.standard_normal(9)
    s = cheb_interpolate(lambda x: cheb.chebval(x, c), 8)
    np.testing.assert_allclose(s.coeffs, c, atol=1e-12)


def test_inner_product_orthogonality():
    assert weighted_inner_product(T(0), T(0)) == pytest.approx(np.pi)
    assert weighted_inner_product(T(1), T(2)) == 0.0
    assert weighted_inner_product(phi_series(0), phi_series(0)) == pytest.approx(35 * np.pi / 18)
    np.testing.assert_allclose(t_norms_sq(3), [np.pi, np.pi / 2, np.pi / 2])


def test_inner_product_matches_quadrature(rng):
    for _ in range(25):
        f = ChebSeries(rng.standard_normal(int(rng.integers(1, 42))))
        g = ChebSeries(rng.standard_normal(int(rng.integers(1, 42))))
        exact = weighted_inner_product(f, g)
        scale = np.linalg.norm(f.coeffs) * np.linalg.norm(g.coeffs)
        assert abs(quadrature_inner_product(f, g) - exact) <= 1e-10 * scale


def test_gauss_rule_node_count():
    rule = ChebGaussRule.for_degree(10)
    assert rule.nodes.size == 36
    assert rule.integrate(np.ones_like(rule.nodes)) == pytest.approx(np.pi)

"""
Chebyshev series on [-1, 1] and the clamped basis

    phi_k = T_k - 2(k+2)/(k+3) T_{k+2} + (k+1)/(k+3) T_{k+4}

whose members vanish together with their first derivative at both ends.
Everything here is a pure function of its arguments; evaluation,
differentiation and interpolation delegate to numpy.polynomial.chebyshev.

Inner products are taken against the weight w(x) = (1 - x^2)^(-1/2), for
which ||T_0||^2 = pi and ||T_k||^2 = pi/2 (k >= 1).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import chebyshev as cheb

from kvbeam.errors import ConfigError


@dataclass(frozen=True)
class ChebSeries:
    """sum_k coeffs[k] T_k(x), stored dense from index 0."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1 or c.size == 0:
            raise ConfigError("Chebyshev coefficients must be a non-empty 1-D array")
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, xi):
        return cheb_eval(self, xi)


@dataclass(frozen=True)
class ChebGaussRule:
    nodes: np.ndarray
    weights: np.ndarray

    @classmethod
    def with_points(cls, count: int) -> "ChebGaussRule":
        x, w = cheb.chebgauss(int(count))
        return cls(nodes=x, weights=w)

    @classmethod
    def for_degree(cls, max_degree: int) -> "ChebGaussRule":
        # 2*deg + 16 nodes: exact for products of two degree-`max_degree` series with room to spare
        return cls.with_points(2 * int(max_degree) + 16)

    def integrate(self, values: np.ndarray) -> float:
        """Weighted integral of f given f sampled at the nodes."""
        return float(np.dot(self.weights, values))


def t_norms_sq(count: int) -> np.ndarray:
    """||T_k||_w^2 for k = 0..count-1."""
    out = np.full(int(count), np.pi / 2)
    if count > 0:
        out[0] = np.pi
    return out


def basis_coefficients(k: int) -> tuple[float, float, float]:
    """The (T_k, T_{k+2}, T_{k+4}) weights of phi_k."""
    return 1.0, -2.0 * (k + 2) / (k + 3), (k + 1) / (k + 3)


def cheb_eval(series: ChebSeries, xi):
    x = np.asarray(xi, dtype=float)
    if np.any(np.abs(x) > 1.0):
        raise ConfigError(f"Chebyshev series evaluated outside [-1, 1]: {xi!r}")
    out = cheb.chebval(x, series.coeffs)
    return float(out) if np.ndim(out) == 0 else out


def phi_series(k: int) -> ChebSeries:
    if k < 0:
        raise ConfigError(f"basis index must be nonnegative, got {k}")
    c = np.zeros(k + 5)
    c[k], c[k + 2], c[k + 4] = basis_coefficients(k)
    return ChebSeries(c)


def cheb_differentiate(series: ChebSeries, order: int = 1) -> ChebSeries:
    if series.degree < order:
        return ChebSeries(np.zeros(1))
    return ChebSeries(cheb.chebder(series.coeffs, m=order))


def cheb_interpolate(f: Callable[[np.ndarray], np.ndarray], n: int) -> ChebSeries:
    """Degree-n interpolant through the n+1 Chebyshev points of the first kind."""
    if n < 0:
        raise ConfigError(f"interpolation degree must be nonnegative, got {n}")

    def _vec(x):
        # constant expressions come back as scalars
        return np.broadcast_to(np.asarray(f(x), dtype=float), np.shape(x))

    coeffs = cheb.chebinterpolate(_vec, int(n))
    if not np.all(np.isfinite(coeffs)):
        raise ConfigError("function is not finite at the Chebyshev points")
    return ChebSeries(coeffs)


def weighted_inner_product(f: ChebSeries, g: ChebSeries) -> float:
    m = min(f.coeffs.size, g.coeffs.size)
    return float(np.sum(f.coeffs[:m] * g.coeffs[:m] * t_norms_sq(m)))


def quadrature_inner_product(f: ChebSeries, g: ChebSeries, rule: ChebGaussRule | None = None) -> float:
    """<f, g>_w by Gauss-Chebyshev quadrature; an independent check on weighted_inner_product."""
    if rule is None:
        rule = ChebGaussRule.for_degree(max(f.degree, g.degree))
    return rule.integrate(cheb.chebval(rule.nodes, f.coeffs) * cheb.chebval(rule.nodes, g.coeffs))

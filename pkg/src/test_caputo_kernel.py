"""Test Caputo derivatives, the L1 scheme and the Lanczos gamma function."""

import sys
import os
sys.path.insert(0, os.path.dirname(__file__))

import math

import numpy as np
import pytest
from scipy.special import gamma as scipy_gamma

from caputo_kernel import (
    CaputoConfig,
    FractionalOrder,
    PowerTerm,
    caputo_left,
    caputo_power_rule,
    caputo_right,
    convergence_order_probe,
    coordinate_differential_factor,
    fractional_integral_trapezoid,
    free_motion_solution,
    l1_weights,
    power_rule_exact,
)
from errors import (
    DegenerateGrid,
    InsufficientResolutions,
    InvalidOrder,
    InvertedInterval,
    NonPositiveAbscissa,
)
from gamma_function import gamma_ratio, lanczos_gamma


def test_lanczos_matches_scipy():
    """Lanczos gamma agrees with scipy to near machine precision."""
    for x in [0.1, 0.25, 0.5, 1.0, 1.5, 2.5, 7.3, 20.0]:
        assert abs(lanczos_gamma(x) - scipy_gamma(x)) <= 1e-12 * scipy_gamma(x)
    assert lanczos_gamma(5.0) == pytest.approx(24.0, rel=1e-13)
    assert gamma_ratio(3.0, 2.5) == pytest.approx(2.0 / scipy_gamma(2.5), rel=1e-12)


def test_fractional_order_bounds():
    assert FractionalOrder(1.0).is_classical
    assert not FractionalOrder(0.5).is_classical
    for bad in [0.0, -0.5, 1.5]:
        with pytest.raises(InvalidOrder):
            FractionalOrder(bad)


def test_l1_weights():
    weights = l1_weights(0.5, 4)
    expected = [1.0, math.sqrt(2) - 1.0, math.sqrt(3) - math.sqrt(2), 2.0 - math.sqrt(3)]
    assert np.allclose(weights, expected, atol=1e-15)


def test_power_rule_quadrature_oracle():
    """L1 quadrature matches the gamma-ratio closed form at N = 2048."""
    cfg = CaputoConfig(grid_points=2048)
    for p in [1, 2, 3]:
        for alpha in [0.25, 0.5, 0.75]:
            for x in [0.5, 1.0, 2.0]:
                numeric = caputo_left(lambda t: t ** p, alpha, x, cfg)
                exact = power_rule_exact(p, alpha, x)
                assert abs(numeric - exact) <= 1e-3 * abs(exact), (p, alpha, x)


def test_observed_convergence_order():
    """Grid doubling shows order 2 - alpha on a smooth non-linear function."""
    for alpha in [0.25, 0.5, 0.75]:
        observed = convergence_order_probe(lambda t: t ** 2, alpha, 1.0, [128, 256, 512, 1024],
                                           exact=power_rule_exact(2, alpha, 1.0))
        assert abs(observed - (2.0 - alpha)) <= 0.15, (alpha, observed)


def test_linear_functions_are_exact():
    """L1 interpolates linearly, so x is differentiated exactly at any grid."""
    observed = convergence_order_probe(lambda t: 3.0 * t, 0.5, 1.0, [16, 32, 64],
                                       exact=power_rule_exact(1, 0.5, 1.0) * 3.0)
    assert observed == math.inf


def test_observed_order_without_exact_value():
    """Successive differences recover 2 - alpha with no reference value."""
    observed = convergence_order_probe(lambda t: t ** 2, 0.5, 1.0, [64, 128, 256, 512])
    assert abs(observed - 1.5) <= 0.15, observed
    observed = convergence_order_probe(lambda t: t ** 3, 0.25, 1.0, [64, 128, 256, 512])
    assert abs(observed - 1.75) <= 0.15, observed


def test_observed_order_uses_given_config():
    # At alpha = 1 the grid plays no part, so every error is the same stencil error.
    cfg = CaputoConfig(fd_step=0.1)
    observed = convergence_order_probe(lambda t: t ** 5, 1.0, 1.0, [16, 32, 64], exact=5.0, cfg=cfg)
    assert observed == pytest.approx(0.0, abs=1e-9)


def test_linearity_on_random_polynomials():
    rng = np.random.default_rng(11)
    cfg = CaputoConfig(grid_points=256)
    for _ in range(5):
        f_coef, g_coef = rng.normal(size=5), rng.normal(size=5)
        a, b = rng.normal(size=2)
        f = np.polynomial.Polynomial(f_coef)
        g = np.polynomial.Polynomial(g_coef)
        combined = caputo_left(lambda t: a * f(t) + b * g(t), 0.5, 1.2, cfg)
        separate = a * caputo_left(f, 0.5, 1.2, cfg) + b * caputo_left(g, 0.5, 1.2, cfg)
        assert combined == pytest.approx(separate, abs=1e-10)


def test_caputo_right_mirrors_power_rule():
    """(X2 - x)^2 one unit below X2 behaves like x^2 at x = 1."""
    cfg = CaputoConfig(grid_points=2048)
    upper = 1.5
    value = caputo_right(lambda t: (upper - t) ** 2, 0.5, upper - 1.0, upper, cfg)
    assert value == pytest.approx(2.0 / scipy_gamma(2.5), rel=1e-3)


def test_fractional_integral_is_exact_on_linear_samples():
    alpha, h = 0.5, 1.0 / 32
    tau = np.arange(33) * h
    ones = fractional_integral_trapezoid(np.ones((33, 1)), h, alpha)[:, 0]
    assert np.allclose(ones, tau ** alpha / scipy_gamma(1.0 + alpha), atol=1e-12)
    ramp = fractional_integral_trapezoid(tau, h, alpha)
    assert ramp[0] == 0.0
    assert np.allclose(ramp, tau ** (1.0 + alpha) / scipy_gamma(2.0 + alpha), atol=1e-12)


def test_constants_vanish_exactly():
    cfg = CaputoConfig(grid_points=64)
    for alpha in [0.25, 0.5, 1.0]:
        assert caputo_left(lambda t: 4.0 + 0.0 * t, alpha, 1.3, cfg) == 0.0
    assert caputo_power_rule(PowerTerm(5.0, 0.0), 0.5, 2.0) == 0.0


def test_classical_limit():
    cfg = CaputoConfig()
    assert caputo_left(np.sin, 1.0, 0.7, cfg) == pytest.approx(math.cos(0.7), abs=1e-10)
    assert caputo_power_rule(PowerTerm(2.0, 3.0), 1.0, 1.5) == pytest.approx(13.5, abs=1e-12)


def test_caputo_right():
    cfg = CaputoConfig(grid_points=64)
    # Linear functions are reproduced exactly by the mirrored L1 sum.
    value = caputo_right(lambda t: t, 0.5, 0.4, 1.0, cfg)
    assert value == pytest.approx(-(0.6 ** 0.5) / scipy_gamma(1.5), abs=1e-12)
    assert caputo_right(lambda t: t, 1.0, 0.4, 1.0, cfg) == pytest.approx(-1.0, abs=1e-10)
    with pytest.raises(InvertedInterval):
        caputo_right(lambda t: t, 0.5, 1.0, 0.5, cfg)


def test_coordinate_differential_factor():
    assert coordinate_differential_factor(1.0, 0.5) == pytest.approx(1.0 / scipy_gamma(1.5), rel=1e-12)
    assert coordinate_differential_factor(4.0, 0.5) == pytest.approx(2.0 / scipy_gamma(1.5), rel=1e-12)
    assert coordinate_differential_factor(3.0, 1.0) == 1.0


def test_free_motion_solution():
    tau = np.array([0.0, 0.25, 1.0])
    x = free_motion_solution(1.0, 2.0, 0.5, tau)
    assert x[0] == 1.0
    assert x[2] == pytest.approx(1.0 + 2.0 / scipy_gamma(1.5), rel=1e-12)


def test_errors():
    with pytest.raises(DegenerateGrid):
        caputo_left(np.exp, 0.5, 1.0, CaputoConfig(grid_points=4))
    with pytest.raises(NonPositiveAbscissa):
        caputo_left(np.exp, 0.5, 0.0, CaputoConfig())
    with pytest.raises(NonPositiveAbscissa):
        coordinate_differential_factor(-1.0, 0.5)
    with pytest.raises(InsufficientResolutions):
        convergence_order_probe(np.exp, 0.5, 1.0, [16, 32])
    with pytest.raises(InsufficientResolutions):
        convergence_order_probe(np.exp, 0.5, 1.0, [16, 32, 48])


def main():
    """Run Caputo kernel tests."""
    test_lanczos_matches_scipy()
    test_fractional_order_bounds()
    test_l1_weights()
    test_power_rule_quadrature_oracle()
    test_observed_convergence_order()
    test_linear_functions_are_exact()
    test_observed_order_without_exact_value()
    test_observed_order_uses_given_config()
    test_linearity_on_random_polynomials()
    test_caputo_right_mirrors_power_rule()
    test_fractional_integral_is_exact_on_linear_samples()
    test_constants_vanish_exactly()
    test_classical_limit()
    test_caputo_right()
    test_coordinate_differential_factor()
    test_free_motion_solution()
    test_errors()
    print("✓ Caputo kernel tests passed")


if __name__ == '__main__':
    main()

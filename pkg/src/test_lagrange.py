"""Test the canonical Lagrange pipeline: Hessian, spray, N-connection, d-connection."""

import sys
import os
sys.path.insert(0, os.path.dirname(__file__))

import math

import numpy as np
import pytest

from caputo_kernel import CaputoConfig, FractionalOrder
from dynamics import Trajectory
from errors import DegenerateGrid, DegenerateHessian, EmptySample, GridTooCoarse, NonPositiveAbscissa
from expr.point import Point
from geometry import metric_compatibility_residual
from lagrange import (
    LagrangeModel,
    canonical_d_connection,
    canonical_data,
    canonical_n_connection,
    euler_lagrange_residual,
    finsler_homogeneity_check,
    fractional_hessian,
    regularity_check,
    semi_spray,
)

EXPHARM = "exp(x1)*(y1^2 + y2^2)"
FREE = "y1^2 + y2^2"


def _random_points(count, seed=7):
    rng = np.random.default_rng(seed)
    return [Point(tuple(rng.uniform(0.2, 1.0, 2)), tuple(rng.uniform(0.3, 1.5, 2)))
            for _ in range(count)]


def test_classical_hessian():
    model = LagrangeModel.from_text(EXPHARM, 2)
    h = fractional_hessian(model, Point((0.4, 0.9), (1.0, 2.0)))
    assert np.allclose(h.g, math.exp(0.4) * np.eye(2), atol=1e-12)
    assert np.allclose(h.g @ h.g_inv, np.eye(2), atol=1e-12)

    sphere = LagrangeModel.from_text("y1^2 + sin(x1)^2*y2^2", 2)
    g = fractional_hessian(sphere, Point((1.0, 0.5), (0.7, 0.4))).g
    assert np.allclose(g, np.diag([1.0, math.sin(1.0) ** 2]), atol=1e-12)


def test_fractional_hessian_of_quadratic():
    """Two half-order steps on y^2 give 2y, so g = diag(y1, y2)."""
    model = LagrangeModel.from_text(FREE, 2, alpha=0.5, caputo=CaputoConfig(grid_points=64))
    h = fractional_hessian(model, Point((0.5, 0.5), (0.8, 1.7)))
    assert np.allclose(h.g, np.diag([0.8, 1.7]), atol=1e-12)


def test_hessian_needs_positive_coordinates():
    model = LagrangeModel.from_text(FREE, 2, alpha=0.5)
    with pytest.raises(NonPositiveAbscissa):
        fractional_hessian(model, Point((0.5, -0.5), (1.0, 1.0)))


def test_degenerate_hessian():
    model = LagrangeModel.from_text("y1^2", 2)
    p = Point((0.5, 0.5), (1.0, 1.0))
    with pytest.raises(DegenerateHessian):
        fractional_hessian(model, p)

    report = regularity_check(model, [p])
    assert not report.passed
    assert report.failing_points == [p]
    assert report.min_abs_det == 0.0


def test_regularity_check():
    model = LagrangeModel.from_text(EXPHARM, 2)
    report = regularity_check(model, _random_points(5))
    assert report.passed
    assert report.failing_points == []
    assert all(c == pytest.approx(1.0) for c in report.condition_numbers)
    with pytest.raises(EmptySample):
        regularity_check(model, [])


def test_finsler_homogeneity():
    sample = _random_points(4)
    assert finsler_homogeneity_check(LagrangeModel.from_text(FREE, 2), sample)
    assert finsler_homogeneity_check(LagrangeModel.from_text(EXPHARM, 2), sample)
    assert not finsler_homogeneity_check(LagrangeModel.from_text(FREE + " + y1^4", 2), sample)
    assert not finsler_homogeneity_check(LagrangeModel.from_text(FREE + " + x1", 2), sample)
    assert not finsler_homogeneity_check(LagrangeModel.from_text("-(y1^2 + y2^2)", 2), sample)


def test_spray_closed_form():
    """For exp(x1)(y1^2 + y2^2): G1 = (y1^2 - y2^2)/4 and G2 = y1 y2 / 2."""
    spray = semi_spray(LagrangeModel.from_text(EXPHARM, 2))
    for p in _random_points(10):
        y1, y2 = p.y
        assert np.allclose(spray(p), [0.25 * (y1 ** 2 - y2 ** 2), 0.5 * y1 * y2], atol=1e-6)


def test_n_connection_is_spray_jacobian():
    N = canonical_n_connection(LagrangeModel.from_text(EXPHARM, 2))
    for p in _random_points(5, seed=11):
        y1, y2 = p.y
        expected = 0.5 * np.array([[y1, -y2], [y2, y1]])
        assert np.allclose(N(p), expected, atol=1e-8)


def test_free_lagrangian_has_no_geometry():
    for alpha in (1.0, 0.5):
        model = LagrangeModel.from_text(FREE, 2, alpha=alpha, caputo=CaputoConfig(grid_points=32))
        spray = semi_spray(model)
        assert spray.is_zero
        p = Point((0.5, 0.5), (1.0, 0.5))
        assert not spray(p).any()
        assert not canonical_n_connection(model)(p).any()
    data = canonical_data(LagrangeModel.from_text(FREE, 2))
    assert np.allclose(data.dconnection(Point((0.5, 0.5), (1.0, 0.5))), 0.0, atol=1e-12)


def test_spray_is_two_homogeneous():
    """G(x, lambda y) = lambda^2 G(x, y) for Finsler models at alpha = 1."""
    sample = _random_points(6, seed=23)
    for source in [EXPHARM, "exp(x1)*sqrt(y1^4 + y2^4)"]:
        model = LagrangeModel.from_text(source, 2)
        assert finsler_homogeneity_check(model, sample), source
        spray = semi_spray(model)
        u = np.array([p.coords for p in sample])
        base = spray.evaluate(u)
        assert np.max(np.abs(base)) > 0.01
        for scale in (0.5, 2.5):
            scaled = u.copy()
            scaled[:, 2:] *= scale
            assert np.allclose(spray.evaluate(scaled), scale ** 2 * base, rtol=1e-8, atol=1e-12), source


def test_canonical_connection_closed_form():
    """For exp(x1)(y1^2 + y2^2): L^i_jk = (d_k1 d_ij + d_j1 d_ik - d_i1 d_jk) / 2 and C = 0."""
    D = canonical_d_connection(LagrangeModel.from_text(EXPHARM, 2))
    expected = np.zeros((2, 2, 2))
    expected[0, 0, 0] = 0.5
    expected[0, 1, 1] = -0.5
    expected[1, 0, 1] = 0.5
    expected[1, 1, 0] = 0.5
    for p in _random_points(10, seed=29):
        blocks = D.blocks(p)
        assert np.allclose(blocks['L^i_jk'], expected, atol=1e-6)
        assert np.allclose(blocks['L^a_bk'], expected, atol=1e-6)
        assert np.allclose(blocks['C^i_jc'], 0.0, atol=1e-6)
        assert np.allclose(blocks['C^a_bc'], 0.0, atol=1e-6)


def test_canonical_connection_is_metric_compatible():
    model = LagrangeModel.from_text(EXPHARM, 2)
    data = canonical_data(model)
    residual = metric_compatibility_residual(data.dconnection, data.metric, data.nconnection,
                                             _random_points(20), model.alpha, model.caputo)
    assert residual <= 1e-6


def test_fractional_connection_is_metric_compatible():
    cfg = CaputoConfig(grid_points=32)
    model = LagrangeModel.from_text(EXPHARM, 2, alpha=0.5, caputo=cfg)
    data = canonical_data(model)
    residual = metric_compatibility_residual(data.dconnection, data.metric, data.nconnection,
                                             _random_points(20, seed=19), model.alpha, cfg)
    assert residual <= 1e-3


def test_vertical_connection_symmetry():
    """At alpha = 1 the mixed block C^i_jc is symmetric in j and c and nonzero for y1^4."""
    model = LagrangeModel.from_text("exp(x1)*(y1^2 + y2^2) + y1^4", 2)
    D = canonical_d_connection(model)
    p = Point((0.4, 0.6), (0.8, 0.5))
    C = D.blocks(p)['C^i_jc']
    assert np.allclose(C, C.transpose(0, 2, 1), atol=1e-10)
    assert np.max(np.abs(C)) > 0.1
    assert np.allclose(D.blocks(p)['C^a_bc'], C)


def _trajectory(tau, x, y, alpha=1.0):
    return Trajectory(tau, x, y, FractionalOrder(alpha))


def test_euler_lagrange_free_line():
    model = LagrangeModel.from_text(FREE, 2)
    tau = np.linspace(0.0, 1.0, 64)
    v = np.array([1.0, 0.5])
    x = 0.5 + np.outer(tau, v)
    y = np.tile(v, (len(tau), 1))
    residual = euler_lagrange_residual(model, _trajectory(tau, x, y))
    assert residual.shape == (62, 2)
    assert np.max(np.abs(residual)) <= 1e-12

    fractional = LagrangeModel.from_text(FREE, 2, alpha=0.5)
    residual = euler_lagrange_residual(fractional, _trajectory(tau, x, y, 0.5))
    assert np.max(np.abs(residual)) <= 1e-12


def test_euler_lagrange_detects_non_solutions():
    model = LagrangeModel.from_text(FREE, 2)
    tau = np.linspace(0.0, 1.0, 64)
    wobble = 0.1 * np.sin(2.0 * math.pi * tau)
    x = np.column_stack([tau + wobble, 0.5 * tau])
    y = np.column_stack([1.0 + 0.2 * math.pi * np.cos(2.0 * math.pi * tau), np.full_like(tau, 0.5)])
    residual = euler_lagrange_residual(model, _trajectory(tau, x, y))
    assert np.max(np.abs(residual)) > 0.05


def test_fractional_euler_lagrange_detects_non_solutions():
    """Under the flat model at alpha = 1/2 any change in y shows up in the residual."""
    model = LagrangeModel.from_text(FREE, 2, alpha=0.5, caputo=CaputoConfig(grid_points=32))
    tau = np.linspace(0.0, 1.0, 64)
    x = np.column_stack([0.5 + tau, 0.5 + 0.5 * tau])
    y = np.column_stack([1.0 + 0.1 * np.sin(tau), np.full_like(tau, 0.5)])
    residual = euler_lagrange_residual(model, _trajectory(tau, x, y, 0.5))
    assert residual.shape == (62, 2)
    assert np.max(np.abs(residual)) > 0.05
    assert np.max(np.abs(residual[:, 1])) <= 1e-12


def test_euler_lagrange_grid_errors():
    model = LagrangeModel.from_text(FREE, 2)
    short = np.linspace(0.0, 1.0, 10)
    with pytest.raises(GridTooCoarse):
        euler_lagrange_residual(model, _trajectory(short, np.zeros((10, 2)), np.zeros((10, 2))))

    uneven = np.linspace(0.0, 1.0, 20) ** 2
    with pytest.raises(DegenerateGrid):
        euler_lagrange_residual(model, _trajectory(uneven, np.zeros((20, 2)), np.zeros((20, 2))))


def main():
    """Run Lagrange pipeline tests."""
    test_classical_hessian()
    test_fractional_hessian_of_quadratic()
    test_hessian_needs_positive_coordinates()
    test_degenerate_hessian()
    test_regularity_check()
    test_finsler_homogeneity()
    test_spray_closed_form()
    test_n_connection_is_spray_jacobian()
    test_free_lagrangian_has_no_geometry()
    test_spray_is_two_homogeneous()
    test_canonical_connection_closed_form()
    test_canonical_connection_is_metric_compatible()
    test_fractional_connection_is_metric_compatible()
    test_vertical_connection_symmetry()
    test_euler_lagrange_free_line()
    test_euler_lagrange_detects_non_solutions()
    test_fractional_euler_lagrange_detects_non_solutions()
    test_euler_lagrange_grid_errors()
    print("✓ Lagrange tests passed")


if __name__ == '__main__':
    main()

"""Test component fields and their numeric and symbolic partials."""

import sys
import os
sys.path.insert(0, os.path.dirname(__file__))

import math

import numpy as np
import pytest
from scipy.special import gamma as scipy_gamma

from caputo_kernel import CaputoConfig
from errors import NonPositiveAbscissa
from expr.point import Point
from fields import (
    ComponentSlice,
    ConstantField,
    DerivativeField,
    ExpressionField,
    NumericField,
    PullbackField,
)


def test_expression_field_values():
    field = ExpressionField.parse([["x1*y1", "2"], ["exp(x2)", "y2^2"]], 2, 2)
    assert field.shape == (2, 2)
    value = field(Point((1.5, 0.0), (2.0, 3.0)))
    assert np.allclose(value, [[3.0, 2.0], [1.0, 9.0]])

    batch = field.evaluate(np.array([[1.0, 0.0, 1.0, 1.0], [2.0, 0.0, 3.0, 0.5]]))
    assert batch.shape == (2, 2, 2)
    assert batch[1, 0, 0] == 6.0


def test_returned_values_are_copies():
    field = ExpressionField.parse(["x1", "y1"], 1, 1)
    p = Point((2.0,), (3.0,))
    first = field(p)
    first[0] = 100.0
    assert field(p)[0] == 2.0


def test_numeric_classical_partial():
    field = NumericField(lambda u: np.sin(u[:, 0]) * u[:, 1], 1, 1)
    cfg = CaputoConfig(fd_step=1e-3)
    p = Point((0.7,), (2.0,))
    assert field.partial(p, 0, 1.0, cfg) == pytest.approx(2.0 * math.cos(0.7), abs=1e-10)
    assert field.partial(p, 1, 1.0, cfg) == pytest.approx(math.sin(0.7), abs=1e-10)


def test_numeric_fractional_partial_power_rule():
    field = NumericField(lambda u: u[:, 0] ** 2, 1, 1)
    cfg = CaputoConfig(grid_points=256)
    value = field.partial(Point((1.0,), (1.0,)), 0, 0.5, cfg)
    assert value == pytest.approx(2.0 / scipy_gamma(2.5), rel=1e-2)


def test_symbolic_and_numeric_partials_agree():
    """Both routes approximate the same Caputo partial on a non-polynomial field."""
    cfg = CaputoConfig(grid_points=256)
    symbolic = ExpressionField.parse(["exp(x1)*y1^2"], 1, 1)
    numeric = NumericField(lambda u: (np.exp(u[:, 0]) * u[:, 1] ** 2)[:, None], 1, 1, (1,))
    p = Point((0.8,), (1.5,))
    for index in (0, 1):
        a = symbolic.partial(p, index, 0.5, cfg)
        b = numeric.partial(p, index, 0.5, cfg)
        assert a == pytest.approx(b, rel=5e-3), index


def test_gradient_shape():
    field = ExpressionField.parse([["x1", "x2"], ["y1", "y2"]], 2, 2)
    g = field.gradient(Point((1.0, 1.0), (1.0, 1.0)), 1.0, CaputoConfig())
    assert g.shape == (4, 2, 2)
    assert g[0, 0, 0] == 1.0
    assert g[3, 1, 1] == 1.0
    assert g[2, 0, 1] == 0.0


def test_derivative_field_matches_partial():
    cfg = CaputoConfig(grid_points=64)
    parent = ExpressionField.parse(["x1^3 + y1"], 1, 1)
    derivative = DerivativeField(parent, 0, 0.5, cfg)
    p = Point((1.2,), (0.4,))
    assert np.allclose(derivative(p), parent.partial(p, 0, 0.5, cfg))


def test_component_slice():
    parent = ExpressionField.parse([["x1", "y1"], ["x1*y1", "2"]], 1, 1)
    block = ComponentSlice(parent, (slice(1, 2), slice(0, 2)))
    assert block.shape == (1, 2)
    p = Point((2.0,), (3.0,))
    assert np.allclose(block(p), [[6.0, 2.0]])
    assert np.allclose(block.partial(p, 1, 1.0, CaputoConfig()), [[2.0, 0.0]])


def test_constant_field():
    field = ConstantField(np.eye(2), 2, 2)
    p = Point((1.0, 2.0), (3.0, 4.0))
    assert np.array_equal(field(p), np.eye(2))
    assert not field.partial(p, 2, 0.5, CaputoConfig()).any()


def test_pullback_field():
    parent = ExpressionField.parse(["x1^2 + y1"], 1, 1)
    pulled = PullbackField(parent, 2.0 * np.eye(2), lambda values: 3.0 * values)
    assert pulled(Point((1.0,), (0.5,)))[0] == pytest.approx(3.0 * (4.0 + 1.0))


def test_is_zero():
    assert ExpressionField.zeros((2, 3), 2, 2).is_zero()
    assert not ExpressionField.parse(["0", "x1"], 1, 1).is_zero()


def test_fractional_partial_needs_positive_coordinate():
    field = NumericField(lambda u: u[:, 0], 1, 1)
    with pytest.raises(NonPositiveAbscissa):
        field.partial(Point((-0.5,), (1.0,)), 0, 0.5, CaputoConfig())


def main():
    """Run field tests."""
    test_expression_field_values()
    test_returned_values_are_copies()
    test_numeric_classical_partial()
    test_numeric_fractional_partial_power_rule()
    test_symbolic_and_numeric_partials_agree()
    test_gradient_shape()
    test_derivative_field_matches_partial()
    test_component_slice()
    test_constant_field()
    test_pullback_field()
    test_is_zero()
    test_fractional_partial_needs_positive_coordinate()
    print("✓ Field tests passed")


if __name__ == '__main__':
    main()

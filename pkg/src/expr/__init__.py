"""Scalar field expressions: parsing, evaluation, integer and Caputo partials."""

from .nodes import (
    Add,
    Call,
    CaputoLine,
    Const,
    Div,
    Expression,
    Mul,
    Neg,
    Pow,
    Sub,
    Symbol,
    to_source,
)
from .point import Point
from .parser import parse, symbol
from .calculus import (
    DerivativeContext,
    caputo_partial,
    caputo_partial_expression,
    depends_on,
    evaluate,
    evaluate_array,
    free_coordinates,
    integer_partial,
    is_polynomial,
    polynomial_terms,
    power_terms_at,
)

__all__ = [
    'Add', 'Call', 'CaputoLine', 'Const', 'Div', 'Expression', 'Mul', 'Neg',
    'Pow', 'Sub', 'Symbol', 'to_source', 'Point', 'parse', 'symbol', 'DerivativeContext',
    'caputo_partial', 'caputo_partial_expression', 'depends_on', 'evaluate',
    'evaluate_array', 'free_coordinates', 'integer_partial', 'is_polynomial',
    'polynomial_terms', 'power_terms_at',
]

"""Evaluable component fields over the coordinates u = (x, y)."""

from .base import (
    ComponentSlice,
    ConstantField,
    DerivativeField,
    Field,
    NumericField,
    PullbackField,
)
from .expression_field import ExpressionField

__all__ = [
    'ComponentSlice',
    'ConstantField',
    'DerivativeField',
    'ExpressionField',
    'Field',
    'NumericField',
    'PullbackField',
]

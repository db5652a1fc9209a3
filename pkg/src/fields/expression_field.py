"""Fields whose components are parsed expressions."""

from typing import Dict, Hashable, Sequence, Tuple

import numpy as np

from caputo_kernel import CaputoConfig, OrderLike, as_order
from expr import DerivativeContext, Expression, caputo_partial_expression, evaluate_array, parse
from expr.nodes import Const
from fields.base import Field


class ExpressionField(Field):
    """
    Array of expressions evaluated component-wise.

    Partials are symbolic: exact derivatives at alpha = 1, the power rule
    or deferred line quadrature below. Derived component arrays are cached
    per (coordinate, order, grid) on the instance.
    """

    def __init__(self, components, n: int, m: int):
        """
        Initialize from an (object) array of Expression nodes.

        Args:
            components: Nested sequence or ndarray of Expression, any shape
            n: Base dimension
            m: Fiber dimension
        """
        array = np.empty(np.shape(components), dtype=object)
        for index in np.ndindex(array.shape):
            array[index] = _item(components, index)
        super().__init__(n, m, array.shape)
        self.components = array
        self._derived: Dict[Hashable, "ExpressionField"] = {}

    @classmethod
    def parse(cls, sources, n: int, m: int) -> "ExpressionField":
        """Parse a nested sequence of expression strings."""
        sources = np.asarray(sources, dtype=object)
        parsed = np.empty(sources.shape, dtype=object)
        for index in np.ndindex(sources.shape):
            parsed[index] = parse(str(sources[index]), n, m)
        return cls(parsed, n, m)

    @classmethod
    def zeros(cls, shape: Tuple[int, ...], n: int, m: int) -> "ExpressionField":
        array = np.empty(shape, dtype=object)
        for index in np.ndindex(shape):
            array[index] = Const(0.0)
        return cls(array, n, m)

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        out = np.empty((u.shape[0],) + self.shape)
        for index in np.ndindex(self.shape):
            e = self.components[index]
            if isinstance(e, Const):
                out[(slice(None),) + index] = e.value
            else:
                out[(slice(None),) + index] = evaluate_array(e, u)
        return out

    def derived(self, index: int, order: OrderLike, cfg: CaputoConfig) -> "ExpressionField":
        """The symbolic partial along coordinate `index` as a new ExpressionField."""
        order = as_order(order)
        key = (index, order.alpha, cfg.grid_points)
        field = self._derived.get(key)
        if field is None:
            context = DerivativeContext()
            array = np.empty(self.shape, dtype=object)
            for component in np.ndindex(self.shape):
                array[component] = caputo_partial_expression(
                    self.components[component], index, order, cfg, context)
            field = ExpressionField(array, self.n, self.m)
            self._derived[key] = field
        return field

    def partial_batch(self, u, index, order, cfg):
        return self.derived(index, order, cfg).evaluate(u)

    def is_zero(self) -> bool:
        return all(isinstance(e, Const) and e.value == 0.0 for e in self.components.flat)


def _item(components, index: Sequence[int]) -> Expression:
    if isinstance(components, np.ndarray):
        return components[tuple(index)]
    item = components
    for i in index:
        item = item[i]
    return item

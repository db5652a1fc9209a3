"""Base field interface for component functions on u = (x, y).

A Field evaluates to an array of fixed shape at every point and knows
how to take its Caputo partial along any coordinate. Concrete fields
decide how: ExpressionField differentiates symbolically, everything
else falls back to the numeric rules implemented here.
"""

from abc import ABC, abstractmethod
from typing import Dict, Hashable, Tuple

import numpy as np
from scipy.interpolate import CubicSpline

from caputo_kernel import CaputoConfig, OrderLike, as_order, l1_derivative
from errors import NonPositiveAbscissa
from expr.point import Point

_MEMO_LIMIT = 4096


class Field(ABC):
    """Abstract component field with values of shape `shape`."""

    def __init__(self, n: int, m: int, shape: Tuple[int, ...] = ()):
        """
        Initialize field metadata.

        Args:
            n: Base dimension
            m: Fiber dimension
            shape: Component shape of each value
        """
        self.n = n
        self.m = m
        self.shape = tuple(shape)
        self._memo: Dict[Hashable, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.n + self.m

    @abstractmethod
    def evaluate(self, u: np.ndarray) -> np.ndarray:
        """
        Evaluate on a batch of points.

        Args:
            u: Coordinates with shape (K, n + m)

        Returns:
            Values with shape (K, *shape)
        """
        pass

    def __call__(self, p: Point) -> np.ndarray:
        key = ('value', p.x, p.y)
        value = self._memo.get(key)
        if value is None:
            value = self._remember(key, self.evaluate(p.coords[None, :])[0])
        return value.copy()

    def partial(self, p: Point, index: int, order: OrderLike, cfg: CaputoConfig) -> np.ndarray:
        """Caputo partial along coordinate `index` (0-based into u) at p."""
        order = as_order(order)
        key = ('partial', p.x, p.y, index, order.alpha, cfg.grid_points, cfg.fd_step)
        value = self._memo.get(key)
        if value is None:
            value = self._remember(key, self.partial_batch(p.coords[None, :], index, order, cfg)[0])
        return value.copy()

    def gradient(self, p: Point, order: OrderLike, cfg: CaputoConfig) -> np.ndarray:
        """All coordinate partials stacked on a leading axis: shape (n + m, *shape)."""
        return np.stack([self.partial(p, index, order, cfg) for index in range(self.dim)])

    def partial_batch(self, u: np.ndarray, index: int, order: OrderLike,
                      cfg: CaputoConfig) -> np.ndarray:
        """
        Numeric Caputo partial on a batch of points.

        At alpha = 1 a five-point central difference with step cfg.fd_step.
        For alpha < 1 the field is sampled on 2N interior nodes of each
        segment [0, u_index], a cubic spline is fitted and the L1 sum is
        taken on N intervals of the interpolant.
        """
        order = as_order(order)
        u = np.atleast_2d(np.asarray(u, dtype=float))
        k = u.shape[0]

        if order.is_classical:
            h = cfg.fd_step
            offsets = np.array([-2.0, -1.0, 1.0, 2.0]) * h
            stencil = np.repeat(u[:, None, :], 4, axis=1)
            stencil[:, :, index] += offsets[None, :]
            values = self.evaluate(stencil.reshape(-1, self.dim)).reshape((k, 4) + self.shape)
            return (values[:, 0] - 8.0 * values[:, 1] + 8.0 * values[:, 2] - values[:, 3]) / (12.0 * h)

        cfg.validate()
        ends = u[:, index]
        if np.any(ends <= 0.0):
            raise NonPositiveAbscissa(
                f"fractional partial along u{index + 1} needs a positive coordinate"
            )
        intervals = cfg.grid_points
        nodes = np.arange(1, 2 * intervals + 1) / (2.0 * intervals)
        lines = np.repeat(u[:, None, :], len(nodes), axis=1)
        lines[:, :, index] = ends[:, None] * nodes[None, :]
        samples = self.evaluate(lines.reshape(-1, self.dim)).reshape((k, len(nodes)) + self.shape)

        fractions = np.linspace(0.0, 1.0, intervals + 1)
        grid = CubicSpline(nodes, samples, axis=1, extrapolate=True)(fractions)
        step = (ends / intervals).reshape((k,) + (1,) * len(self.shape))
        return l1_derivative(grid, step, order.alpha, axis=1)

    def _remember(self, key: Hashable, value: np.ndarray) -> np.ndarray:
        if len(self._memo) >= _MEMO_LIMIT:
            self._memo.clear()
        stored = np.array(value, dtype=float)
        self._memo[key] = stored
        return stored


class NumericField(Field):
    """Field backed by a vectorised Python callable."""

    def __init__(self, func, n: int, m: int, shape: Tuple[int, ...] = ()):
        """
        Args:
            func: Callable mapping u with shape (K, n + m) to values (K, *shape)
            n: Base dimension
            m: Fiber dimension
            shape: Component shape
        """
        super().__init__(n, m, shape)
        self.func = func

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        values = np.asarray(self.func(u), dtype=float)
        return values.reshape((u.shape[0],) + self.shape)


class DerivativeField(Field):
    """The Caputo partial of a parent field along one coordinate, as a field."""

    def __init__(self, parent: Field, index: int, order: OrderLike, cfg: CaputoConfig):
        super().__init__(parent.n, parent.m, parent.shape)
        self.parent = parent
        self.index = index
        self.order = as_order(order)
        self.cfg = cfg

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        return self.parent.partial_batch(u, self.index, self.order, self.cfg)


class ComponentSlice(Field):
    """A rectangular block of a parent field, e.g. one h/v block of Gamma."""

    def __init__(self, parent: Field, key: Tuple[slice, ...]):
        probe = np.empty(parent.shape)[key]
        super().__init__(parent.n, parent.m, probe.shape)
        self.parent = parent
        self.key = key

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        return self.parent.evaluate(u)[(slice(None),) + tuple(self.key)]

    def partial_batch(self, u, index, order, cfg):
        return self.parent.partial_batch(u, index, order, cfg)[(slice(None),) + tuple(self.key)]


class ConstantField(Field):
    """Field with the same value everywhere; all partials vanish."""

    def __init__(self, value, n: int, m: int):
        value = np.asarray(value, dtype=float)
        super().__init__(n, m, value.shape)
        self.value = value

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(u)
        return np.broadcast_to(self.value, (u.shape[0],) + self.shape).copy()

    def partial_batch(self, u, index, order, cfg):
        u = np.atleast_2d(u)
        return np.zeros((u.shape[0],) + self.shape)


class PullbackField(Field):
    """
    A field re-expressed in linearly transformed coordinates.

    Evaluates `mapping(parent(P @ u'))` where P maps the new coordinates
    u' to the old ones and `mapping` acts on the batch of parent values.
    """

    def __init__(self, parent: Field, coordinate_matrix: np.ndarray, mapping, shape=None):
        super().__init__(parent.n, parent.m, parent.shape if shape is None else shape)
        self.parent = parent
        self.coordinate_matrix = np.asarray(coordinate_matrix, dtype=float)
        self.mapping = mapping

    def evaluate(self, u: np.ndarray) -> np.ndarray:
        u = np.atleast_2d(np.asarray(u, dtype=float))
        return self.mapping(self.parent.evaluate(u @ self.coordinate_matrix.T))

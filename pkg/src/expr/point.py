"""Sample points u = (x, y) on the fractional tangent bundle."""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from caputo_kernel import OrderLike, as_order
from errors import InputError, NonPositiveAbscissa


@dataclass(frozen=True)
class Point:
    """Base coordinates x (h-part) and fiber coordinates y (v-part)."""
    x: Tuple[float, ...]
    y: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, 'x', tuple(float(v) for v in self.x))
        object.__setattr__(self, 'y', tuple(float(v) for v in self.y))
        if not self.x:
            raise InputError("a point needs at least one base coordinate")

    @classmethod
    def from_coords(cls, coords: Sequence[float], n: int) -> "Point":
        coords = [float(c) for c in coords]
        return cls(tuple(coords[:n]), tuple(coords[n:]))

    @property
    def n(self) -> int:
        return len(self.x)

    @property
    def m(self) -> int:
        return len(self.y)

    @property
    def dim(self) -> int:
        return self.n + self.m

    @property
    def coords(self) -> np.ndarray:
        return np.array(self.x + self.y, dtype=float)

    def require_admissible(self, order: OrderLike):
        """Fractional evaluations need every coordinate strictly positive."""
        if as_order(order).is_classical:
            return
        if any(c <= 0.0 for c in self.x + self.y):
            raise NonPositiveAbscissa(
                f"point {self} has a non-positive coordinate; required for alpha < 1"
            )

    def __str__(self):
        xs = ", ".join(f"{v:g}" for v in self.x)
        ys = ", ".join(f"{v:g}" for v in self.y)
        return f"(x=({xs}), y=({ys}))"

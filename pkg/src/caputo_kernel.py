"""One-dimensional Caputo fractional calculus.

Left and right Caputo derivatives with lower terminal 0, the analytic
power rule, the L1 product-integration scheme and the coordinate
differential factor. Order alpha = 1 is the classical limit and is
handled without quadrature.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from errors import (
    DegenerateGrid,
    InputError,
    InsufficientResolutions,
    InvalidOrder,
    InvertedInterval,
    NonPositiveAbscissa,
)
from gamma_function import gamma_ratio, lanczos_gamma

MIN_GRID_POINTS = 8


@dataclass(frozen=True)
class FractionalOrder:
    """Caputo order alpha in (0, 1]."""
    alpha: float

    def __post_init__(self):
        if not (0.0 < float(self.alpha) <= 1.0):
            raise InvalidOrder(f"fractional order must lie in (0, 1], got {self.alpha}")

    @property
    def is_classical(self) -> bool:
        return self.alpha == 1.0

    def __str__(self):
        return f"α={self.alpha:g}"


OrderLike = Union[FractionalOrder, float, int]


def as_order(order: OrderLike) -> FractionalOrder:
    if isinstance(order, FractionalOrder):
        return order
    return FractionalOrder(float(order))


class Scheme(Enum):
    L1 = "L1"


@dataclass(frozen=True)
class CaputoConfig:
    """Quadrature settings shared by every fractional evaluation."""
    grid_points: int = 256
    lower_terminal: float = 0.0
    scheme: Scheme = Scheme.L1
    fd_step: float = 1e-3  # five-point stencil step used at alpha = 1

    def __post_init__(self):
        if self.lower_terminal != 0.0:
            raise InputError("the lower terminal is fixed to 0")

    def validate(self):
        if self.grid_points < MIN_GRID_POINTS:
            raise DegenerateGrid(
                f"grid_points must be at least {MIN_GRID_POINTS}, got {self.grid_points}"
            )

    @classmethod
    def from_settings(cls, config: Dict) -> "CaputoConfig":
        """
        Build a config from the `caputo` section of settings.yaml.

        Args:
            config: Mapping with optional grid_points and fd_step keys

        Returns:
            CaputoConfig with defaults for missing keys
        """
        return cls(
            grid_points=int(config.get('grid_points', 256)),
            fd_step=float(config.get('fd_step', 1e-3)),
        )


@dataclass(frozen=True)
class PowerTerm:
    """The monomial coefficient * x**exponent."""
    coefficient: float
    exponent: float

    def __post_init__(self):
        if self.exponent < 0:
            raise InputError(f"power term exponent must be non-negative, got {self.exponent}")


def l1_weights(alpha: float, intervals: int) -> np.ndarray:
    """b_j = (j+1)^(1-alpha) - j^(1-alpha) for j = 0..intervals-1."""
    j = np.arange(intervals + 1, dtype=float)
    powers = j ** (1.0 - alpha)
    return np.diff(powers)


def l1_derivative(values: np.ndarray, step, alpha: float, axis: int = 0) -> np.ndarray:
    """
    L1 approximation of the Caputo derivative at the last node.

    The samples f(t_0), ..., f(t_N) lie on a uniform grid starting at the
    lower terminal. Only first differences of the samples enter, so a
    constant sequence yields exactly zero.

    Args:
        values: Samples along `axis`, N + 1 of them
        step: Grid spacing h (scalar, or broadcastable to the result)
        alpha: Order in (0, 1)
        axis: Sample axis

    Returns:
        Derivative estimate with `axis` removed
    """
    samples = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    intervals = samples.shape[0] - 1
    increments = np.diff(samples, axis=0)
    weights = l1_weights(alpha, intervals)[::-1]
    total = np.tensordot(weights, increments, axes=(0, 0))
    return np.asarray(step, dtype=float) ** (-alpha) * total / lanczos_gamma(2.0 - alpha)


def classical_derivative(f: Callable, x: float, step: float = 1e-3) -> float:
    """Five-point central difference, exact for polynomials up to degree four."""
    nodes = np.array([x - 2 * step, x - step, x + step, x + 2 * step])
    v = _sample(f, nodes)
    return float((v[0] - 8.0 * v[1] + 8.0 * v[2] - v[3]) / (12.0 * step))


def _sample(f: Callable, nodes: np.ndarray) -> np.ndarray:
    """Evaluate f on nodes, vectorised when f supports arrays."""
    try:
        values = np.asarray(f(nodes), dtype=float)
    except (TypeError, ValueError):
        values = None
    if values is None or values.shape != nodes.shape:
        values = np.array([float(f(t)) for t in nodes])
    return values


def caputo_left(f: Callable, order: OrderLike, x: float, cfg: CaputoConfig) -> float:
    """
    Left Caputo derivative of f at x with lower terminal 0.

    Args:
        f: Real function evaluable on [0, x]
        order: Fractional order
        x: Evaluation abscissa
        cfg: Quadrature settings

    Returns:
        L1 estimate of (1/Gamma(1-alpha)) * int_0^x (x-s)^(-alpha) f'(s) ds,
        or the ordinary derivative when alpha = 1
    """
    order = as_order(order)
    cfg.validate()
    if order.is_classical:
        return classical_derivative(f, x, cfg.fd_step)
    if x <= cfg.lower_terminal:
        raise NonPositiveAbscissa(f"Caputo evaluation needs x > 0, got {x}")

    nodes = np.linspace(cfg.lower_terminal, x, cfg.grid_points + 1)
    values = _sample(f, nodes)
    return float(l1_derivative(values, x / cfg.grid_points, order.alpha))


def caputo_right(f: Callable, order: OrderLike, x: float, upper_terminal: float,
                 cfg: CaputoConfig) -> float:
    """
    Right Caputo derivative of f at x with upper terminal X2.

    Mirroring s = X2 - x' turns the right operator into the left one
    applied to s -> f(X2 - s) at s = X2 - x. At alpha = 1 this gives -f'(x).
    """
    order = as_order(order)
    if x >= upper_terminal:
        raise InvertedInterval(f"need x < upper terminal, got x={x}, X2={upper_terminal}")

    def mirrored(s):
        return f(upper_terminal - np.asarray(s, dtype=float))

    return caputo_left(mirrored, order, upper_terminal - x, cfg)


def caputo_power_rule(term: PowerTerm, order: OrderLike, x: float) -> float:
    """coefficient * Gamma(p+1)/Gamma(p+1-alpha) * x^(p-alpha); zero for constants."""
    order = as_order(order)
    p = term.exponent
    if p == 0.0 or term.coefficient == 0.0:
        return 0.0
    if order.is_classical:
        return term.coefficient * p * x ** (p - 1.0)
    if x <= 0.0:
        raise NonPositiveAbscissa(f"power rule needs x > 0 for alpha < 1, got {x}")
    return term.coefficient * gamma_ratio(p + 1.0, p + 1.0 - order.alpha) * x ** (p - order.alpha)


def coordinate_differential_factor(x: float, order: OrderLike) -> float:
    """x^(1-alpha)/Gamma(2-alpha), the scale relating d^alpha x to (dx)^alpha."""
    order = as_order(order)
    if order.is_classical:
        return 1.0
    if x <= 0.0:
        raise NonPositiveAbscissa(f"coordinate differential needs x > 0, got {x}")
    return x ** (1.0 - order.alpha) / lanczos_gamma(2.0 - order.alpha)


def convergence_order_probe(f: Callable, order: OrderLike, x: float,
                            resolutions: Sequence[int],
                            exact: Optional[float] = None,
                            cfg: Optional[CaputoConfig] = None) -> float:
    """
    Observed convergence order of caputo_left under grid doubling.

    With `exact` the order is log2(e_N / e_2N) on the two finest grids.
    Without it, successive differences d_N = |D_N - D_2N| replace the
    errors and the order is log2(d_N / d_2N) on the finest pair, which
    needs no reference value. When the errors (or differences) are at
    round-off level the scheme is exact for f and infinity is returned.

    Args:
        f: Function to differentiate
        order: Fractional order
        x: Evaluation abscissa
        resolutions: At least three grid sizes, each double the previous
        exact: Optional analytic derivative value
        cfg: Base quadrature settings; grid_points is replaced per resolution

    Returns:
        Observed order
    """
    resolutions = [int(r) for r in resolutions]
    if len(resolutions) < 3:
        raise InsufficientResolutions(f"need at least 3 resolutions, got {len(resolutions)}")
    for coarse, fine in zip(resolutions, resolutions[1:]):
        if fine != 2 * coarse:
            raise InsufficientResolutions(f"resolutions must double, got {coarse} -> {fine}")

    base = cfg or CaputoConfig()
    estimates = np.array([caputo_left(f, order, x, replace(base, grid_points=r))
                          for r in resolutions])
    if exact is None:
        gaps = np.abs(np.diff(estimates))
        scale = max(1.0, float(np.max(np.abs(estimates))))
    else:
        gaps = np.abs(estimates - exact)
        scale = max(1.0, abs(exact))

    floor = 1e-13 * scale
    coarse, fine = gaps[-2], gaps[-1]
    if fine <= floor:
        return math.inf
    return float(math.log2(max(coarse, floor) / fine))


def fractional_integral_trapezoid(values: np.ndarray, step: float, alpha: float) -> np.ndarray:
    """
    Riemann-Liouville integral I^alpha at every node of a uniform grid.

    Product trapezoidal weights, the same ones the Adams-Bashforth-Moulton
    corrector uses, applied to samples f(t_0), ..., f(t_M) along axis 0.
    Row 0 is zero.
    """
    samples = np.asarray(values, dtype=float)
    result = np.zeros_like(samples)
    scale = step ** alpha / lanczos_gamma(alpha + 2.0)
    up = np.arange(samples.shape[0] + 1, dtype=float) ** (alpha + 1.0)
    for k in range(1, samples.shape[0]):
        lag = k - np.arange(k)
        weights = np.empty(k + 1)
        weights[1:k] = up[lag[1:] + 1] + up[lag[1:] - 1] - 2.0 * up[lag[1:]]
        weights[0] = (k - 1.0) ** (alpha + 1.0) - (k - 1.0 - alpha) * k ** alpha
        weights[k] = 1.0
        result[k] = scale * np.tensordot(weights, samples[:k + 1], axes=(0, 0))
    return result


def power_rule_exact(exponent: float, order: OrderLike, x: float) -> float:
    """Closed-form Caputo derivative of x^p, used as a quadrature oracle."""
    return caputo_power_rule(PowerTerm(1.0, exponent), order, x)


def free_motion_solution(x0: float, v0: float, order: OrderLike,
                         tau: np.ndarray) -> np.ndarray:
    """x0 + v0 * tau^alpha / Gamma(1 + alpha): solution of D^alpha x = v0."""
    order = as_order(order)
    return x0 + v0 * np.asarray(tau, dtype=float) ** order.alpha / lanczos_gamma(1.0 + order.alpha)


__all__: List[str] = [
    'FractionalOrder', 'CaputoConfig', 'PowerTerm', 'Scheme', 'as_order',
    'l1_weights', 'l1_derivative', 'classical_derivative',
    'caputo_left', 'caputo_right', 'caputo_power_rule',
    'coordinate_differential_factor', 'convergence_order_probe',
    'fractional_integral_trapezoid',
    'power_rule_exact', 'free_motion_solution',
]

"""Evaluation and differentiation of expression trees.

Integer partials are exact symbolic derivatives. Caputo partials act
coordinate-wise along lines through the point: polynomial dependence
goes through the power rule, everything else through a deferred L1
line quadrature (CaputoLine).
"""

from functools import singledispatch
from typing import Dict, FrozenSet, List, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from caputo_kernel import (
    CaputoConfig,
    OrderLike,
    PowerTerm,
    as_order,
    caputo_left,
    caputo_power_rule,
    l1_derivative,
)
from errors import EvaluationDomainError, NonPositiveAbscissa
from expr.nodes import (
    ONE,
    ZERO,
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
    add,
    call,
    children,
    const,
    div,
    mul,
    neg,
    power,
    sub,
    to_source,
)
from expr.point import Point
from gamma_function import gamma_ratio

_MAX_EXPANDED_POWER = 8

_UFUNCS = {
    'exp': np.exp,
    'log': np.log,
    'sin': np.sin,
    'cos': np.cos,
    'sqrt': np.sqrt,
}


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate(e: Expression, p: Union[Point, np.ndarray]) -> float:
    """
    Evaluate e at a single point.

    Raises:
        EvaluationDomainError: The value (or an intermediate) is not finite
    """
    coords = p.coords if isinstance(p, Point) else np.asarray(p, dtype=float)
    return float(evaluate_array(e, coords[None, :])[0])


def evaluate_array(e: Expression, u: np.ndarray) -> np.ndarray:
    """Evaluate e on a batch of points u with shape (K, n + m)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    with np.errstate(all='ignore'):
        return _evaluate(e, u)


def _checked(e: Expression, values: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(values)):
        raise EvaluationDomainError(f"'{to_source(e)}' is not finite at the requested point")
    return values


@singledispatch
def _evaluate(e: Expression, u: np.ndarray) -> np.ndarray:
    raise TypeError(f"cannot evaluate {type(e).__name__}")


@_evaluate.register(Const)
def _(e: Const, u):
    return np.full(u.shape[0], e.value)


@_evaluate.register(Symbol)
def _(e: Symbol, u):
    return u[:, e.position].copy()


@_evaluate.register(Neg)
def _(e: Neg, u):
    return -_evaluate(e.operand, u)


@_evaluate.register(Add)
def _(e: Add, u):
    return _evaluate(e.left, u) + _evaluate(e.right, u)


@_evaluate.register(Sub)
def _(e: Sub, u):
    return _evaluate(e.left, u) - _evaluate(e.right, u)


@_evaluate.register(Mul)
def _(e: Mul, u):
    return _checked(e, _evaluate(e.left, u) * _evaluate(e.right, u))


@_evaluate.register(Div)
def _(e: Div, u):
    denominator = _evaluate(e.right, u)
    if np.any(denominator == 0.0):
        raise EvaluationDomainError(f"division by zero in '{to_source(e)}'")
    return _checked(e, _evaluate(e.left, u) / denominator)


@_evaluate.register(Pow)
def _(e: Pow, u):
    return _checked(e, np.power(_evaluate(e.base, u), e.exponent))


@_evaluate.register(Call)
def _(e: Call, u):
    argument = _evaluate(e.arg, u)
    if e.func == 'log' and np.any(argument <= 0.0):
        raise EvaluationDomainError(f"log of a non-positive value in '{to_source(e)}'")
    if e.func == 'sqrt' and np.any(argument < 0.0):
        raise EvaluationDomainError(f"sqrt of a negative value in '{to_source(e)}'")
    return _checked(e, _UFUNCS[e.func](argument))


@_evaluate.register(CaputoLine)
def _(e: CaputoLine, u):
    intervals = e.grid_points
    ends = u[:, e.position]
    if np.any(ends <= 0.0):
        raise NonPositiveAbscissa(
            f"Caputo partial along u{e.position + 1} needs a positive coordinate"
        )
    fractions = np.linspace(0.0, 1.0, intervals + 1)

    if _has_line_along(e.operand, e.position):
        # Nested partial along the same coordinate: sample the inner one on
        # 2N interior nodes and differentiate its cubic interpolant.
        nodes = np.arange(1, 2 * intervals + 1) / (2.0 * intervals)
        inner = _line_values(e.operand, u, e.position, nodes)
        values = CubicSpline(nodes, inner.T, axis=0, extrapolate=True)(fractions)
    else:
        values = _line_values(e.operand, u, e.position, fractions).T

    return _checked(e, l1_derivative(values, ends / intervals, e.alpha, axis=0))


def _line_values(e: Expression, u: np.ndarray, position: int, fractions: np.ndarray) -> np.ndarray:
    """Values of e on the segments from 0 to u[k, position]; shape (K, len(fractions))."""
    k, dim = u.shape
    lines = np.repeat(u[:, None, :], len(fractions), axis=1)
    lines[:, :, position] = u[:, position, None] * fractions[None, :]
    return _evaluate(e, lines.reshape(-1, dim)).reshape(k, len(fractions))


def _has_line_along(e: Expression, position: int) -> bool:
    if isinstance(e, CaputoLine) and e.position == position:
        return True
    return any(_has_line_along(c, position) for c in children(e))


# ---------------------------------------------------------------------------
# Derivative context
# ---------------------------------------------------------------------------

_MISSING = object()


class DerivativeContext:
    """
    Memo tables for one differentiation job.

    Shared subtrees are analysed and differentiated once per context.
    Nothing is cached at module level: a model or a component array holds
    its own context, and one-off calls get a fresh one.
    """

    def __init__(self):
        self._free: Dict[Expression, FrozenSet[int]] = {}
        self._integer: Dict[Tuple[Expression, int], Expression] = {}
        self._polynomial: Dict[Tuple[Expression, int], Optional[Tuple[Tuple[float, Expression], ...]]] = {}
        self._fractional: Dict[Tuple[Expression, int, float, int], Expression] = {}

    def free_coordinates(self, e: Expression) -> FrozenSet[int]:
        found = self._free.get(e)
        if found is None:
            if isinstance(e, Symbol):
                found = frozenset([e.position])
            else:
                found = frozenset([e.position]) if isinstance(e, CaputoLine) else frozenset()
                for child in children(e):
                    found = found | self.free_coordinates(child)
            self._free[e] = found
        return found

    def depends_on(self, e: Expression, position: int) -> bool:
        return position in self.free_coordinates(e)

    def integer_partial(self, e: Expression, position: int) -> Expression:
        key = (e, position)
        result = self._integer.get(key)
        if result is None:
            result = _differentiate(e, position, self) if self.depends_on(e, position) else ZERO
            self._integer[key] = result
        return result

    def polynomial(self, e: Expression, position: int) -> Optional[Tuple[Tuple[float, Expression], ...]]:
        """Nonzero (exponent, coefficient) pairs with exponents descending, or None."""
        key = (e, position)
        terms = self._polynomial.get(key, _MISSING)
        if terms is _MISSING:
            built = _polynomial_build(e, position, self)
            terms = None if built is None else tuple(sorted(
                ((p, c) for p, c in built.items() if not (isinstance(c, Const) and c.value == 0.0)),
                key=lambda item: -item[0]))
            self._polynomial[key] = terms
        return terms

    def polynomial_dict(self, e: Expression, position: int) -> Optional[Dict[float, Expression]]:
        terms = self.polynomial(e, position)
        return None if terms is None else dict(terms)

    def caputo_line(self, operand: Expression, position: int, alpha: float,
                    grid_points: int) -> Expression:
        if not self.depends_on(operand, position):
            return ZERO
        return CaputoLine(operand, position, alpha, grid_points)

    def fractional(self, e: Expression, position: int, alpha: float, grid_points: int) -> Expression:
        key = (e, position, alpha, grid_points)
        result = self._fractional.get(key)
        if result is None:
            result = _fractional(e, position, alpha, grid_points, self)
            self._fractional[key] = result
        return result


def _context(context: Optional[DerivativeContext]) -> DerivativeContext:
    return context if context is not None else DerivativeContext()


# ---------------------------------------------------------------------------
# Structure queries
# ---------------------------------------------------------------------------

def free_coordinates(e: Expression, context: Optional[DerivativeContext] = None) -> FrozenSet[int]:
    """Flat positions of every coordinate e depends on."""
    return _context(context).free_coordinates(e)


def depends_on(e: Expression, position: int, context: Optional[DerivativeContext] = None) -> bool:
    return _context(context).depends_on(e, position)


def _position(wrt: Union[Symbol, int]) -> int:
    return wrt.position if isinstance(wrt, Symbol) else int(wrt)


# ---------------------------------------------------------------------------
# Integer-order partials
# ---------------------------------------------------------------------------

def integer_partial(e: Expression, wrt: Union[Symbol, int],
                    context: Optional[DerivativeContext] = None) -> Expression:
    """Exact symbolic partial derivative of e along one coordinate."""
    return _context(context).integer_partial(e, _position(wrt))


@singledispatch
def _differentiate(e: Expression, position: int, ctx: DerivativeContext) -> Expression:
    raise TypeError(f"cannot differentiate {type(e).__name__}")


@_differentiate.register(Symbol)
def _(e: Symbol, position, ctx):
    return ONE if e.position == position else ZERO


@_differentiate.register(Neg)
def _(e: Neg, position, ctx):
    return neg(ctx.integer_partial(e.operand, position))


@_differentiate.register(Add)
def _(e: Add, position, ctx):
    return add(ctx.integer_partial(e.left, position), ctx.integer_partial(e.right, position))


@_differentiate.register(Sub)
def _(e: Sub, position, ctx):
    return sub(ctx.integer_partial(e.left, position), ctx.integer_partial(e.right, position))


@_differentiate.register(Mul)
def _(e: Mul, position, ctx):
    return add(mul(ctx.integer_partial(e.left, position), e.right),
               mul(e.left, ctx.integer_partial(e.right, position)))


@_differentiate.register(Div)
def _(e: Div, position, ctx):
    numerator = ctx.integer_partial(e.left, position)
    denominator = ctx.integer_partial(e.right, position)
    return sub(div(numerator, e.right),
               div(mul(e.left, denominator), power(e.right, 2.0)))


@_differentiate.register(Pow)
def _(e: Pow, position, ctx):
    inner = ctx.integer_partial(e.base, position)
    return mul(mul(const(e.exponent), power(e.base, e.exponent - 1.0)), inner)


@_differentiate.register(Call)
def _(e: Call, position, ctx):
    inner = ctx.integer_partial(e.arg, position)
    if e.func == 'exp':
        outer = e
    elif e.func == 'log':
        return div(inner, e.arg)
    elif e.func == 'sin':
        outer = call('cos', e.arg)
    elif e.func == 'cos':
        outer = neg(call('sin', e.arg))
    else:  # sqrt
        return div(inner, mul(const(2.0), e))
    return mul(outer, inner)


@_differentiate.register(CaputoLine)
def _(e: CaputoLine, position, ctx):
    if e.position == position:
        raise TypeError("integer partial of a Caputo line along its own coordinate")
    return ctx.caputo_line(ctx.integer_partial(e.operand, position), e.position, e.alpha, e.grid_points)


# ---------------------------------------------------------------------------
# Polynomial detection
# ---------------------------------------------------------------------------

def polynomial_terms(e: Expression, wrt: Union[Symbol, int],
                     context: Optional[DerivativeContext] = None) -> Optional[Dict[float, Expression]]:
    """
    Exponent -> coefficient map when e is a finite sum c_k * w^p_k with p_k >= 0.

    Coefficients are expressions in the other coordinates. None when e is
    not of that form in w.
    """
    return _context(context).polynomial_dict(e, _position(wrt))


def _merge(left: Dict[float, Expression], right: Dict[float, Expression], sign: float = 1.0):
    merged = dict(left)
    for exponent, coefficient in right.items():
        term = coefficient if sign > 0 else neg(coefficient)
        merged[exponent] = add(merged[exponent], term) if exponent in merged else term
    return merged


def _product(left: Dict[float, Expression], right: Dict[float, Expression]):
    result: Dict[float, Expression] = {}
    for p, a in left.items():
        for q, b in right.items():
            term = mul(a, b)
            result[p + q] = add(result[p + q], term) if p + q in result else term
    return result


def _polynomial_build(e: Expression, position: int,
                      ctx: DerivativeContext) -> Optional[Dict[float, Expression]]:
    if not ctx.depends_on(e, position):
        return {0.0: e}
    if isinstance(e, Symbol):
        return {1.0: ONE}
    if isinstance(e, Neg):
        inner = ctx.polynomial_dict(e.operand, position)
        return None if inner is None else {p: neg(c) for p, c in inner.items()}
    if isinstance(e, (Add, Sub)):
        left = ctx.polynomial_dict(e.left, position)
        right = ctx.polynomial_dict(e.right, position)
        if left is None or right is None:
            return None
        return _merge(left, right, 1.0 if isinstance(e, Add) else -1.0)
    if isinstance(e, Mul):
        left = ctx.polynomial_dict(e.left, position)
        right = ctx.polynomial_dict(e.right, position)
        if left is None or right is None:
            return None
        return _product(left, right)
    if isinstance(e, Div):
        if ctx.depends_on(e.right, position):
            return None
        left = ctx.polynomial_dict(e.left, position)
        return None if left is None else {p: div(c, e.right) for p, c in left.items()}
    if isinstance(e, Pow):
        base = ctx.polynomial_dict(e.base, position)
        if base is None:
            return None
        if len(base) == 1:
            (p, c), = base.items()
            if p * e.exponent < 0.0:
                return None
            return {p * e.exponent: power(c, e.exponent)}
        k = e.exponent
        if k == int(k) and 0 <= k <= _MAX_EXPANDED_POWER:
            result = {0.0: ONE}
            for _ in range(int(k)):
                result = _product(result, base)
            return result
        return None
    if isinstance(e, CaputoLine) and e.position != position:
        inner = ctx.polynomial_dict(e.operand, position)
        if inner is None:
            return None
        return {p: ctx.caputo_line(c, e.position, e.alpha, e.grid_points) for p, c in inner.items()}
    return None


def is_polynomial(e: Expression, wrt: Union[Symbol, int],
                  context: Optional[DerivativeContext] = None) -> Tuple[bool, List[Tuple[Expression, float]]]:
    """
    Fast-path detector for the power rule.

    Returns:
        (True, [(coefficient, exponent), ...]) with exponents descending, or
        (False, []) when e is not polynomial in wrt
    """
    terms = _context(context).polynomial(e, _position(wrt))
    if terms is None:
        return False, []
    return True, [(c, p) for p, c in terms]


def power_terms_at(e: Expression, wrt: Union[Symbol, int], p: Point,
                   context: Optional[DerivativeContext] = None) -> Optional[List[PowerTerm]]:
    """Polynomial terms of e in wrt with coefficients frozen at p."""
    polynomial, terms = is_polynomial(e, wrt, context)
    if not polynomial:
        return None
    return [PowerTerm(evaluate(c, p), exponent) for c, exponent in terms]


# ---------------------------------------------------------------------------
# Caputo partials
# ---------------------------------------------------------------------------

def caputo_partial_expression(e: Expression, wrt: Union[Symbol, int], order: OrderLike,
                              cfg: CaputoConfig,
                              context: Optional[DerivativeContext] = None) -> Expression:
    """
    Symbolic Caputo partial of e along one coordinate.

    At alpha = 1 this is integer_partial. Otherwise polynomial dependence
    goes through the power rule term by term, sums split linearly,
    factors free of the coordinate are pulled out, and any remainder
    becomes a CaputoLine node evaluated by quadrature.
    """
    order = as_order(order)
    ctx = _context(context)
    if order.is_classical:
        return ctx.integer_partial(e, _position(wrt))
    cfg.validate()
    return ctx.fractional(e, _position(wrt), order.alpha, cfg.grid_points)


def _fractional(e: Expression, position: int, alpha: float, grid_points: int,
                ctx: DerivativeContext) -> Expression:
    if not ctx.depends_on(e, position):
        return ZERO

    terms = ctx.polynomial_dict(e, position)
    if terms is not None:
        variable = _variable_at(e, position, ctx)
        result = ZERO
        for p, c in sorted(terms.items(), key=lambda item: -item[0]):
            if p == 0.0:
                continue
            factor = const(gamma_ratio(p + 1.0, p + 1.0 - alpha))
            result = add(result, mul(mul(factor, c), power(variable, p - alpha)))
        return result

    def again(operand):
        return ctx.fractional(operand, position, alpha, grid_points)

    if isinstance(e, Neg):
        return neg(again(e.operand))
    if isinstance(e, Add):
        return add(again(e.left), again(e.right))
    if isinstance(e, Sub):
        return sub(again(e.left), again(e.right))
    if isinstance(e, Mul):
        if not ctx.depends_on(e.left, position):
            return mul(e.left, again(e.right))
        if not ctx.depends_on(e.right, position):
            return mul(again(e.left), e.right)
    if isinstance(e, Div) and not ctx.depends_on(e.right, position):
        return div(again(e.left), e.right)
    if isinstance(e, CaputoLine) and e.position != position:
        # Caputo partials along different coordinates commute.
        return ctx.caputo_line(again(e.operand), e.position, e.alpha, e.grid_points)

    return CaputoLine(e, position, alpha, grid_points)


def _variable_at(e: Expression, position: int, ctx: DerivativeContext) -> Symbol:
    if isinstance(e, Symbol) and e.position == position:
        return e
    for child in children(e):
        if ctx.depends_on(child, position):
            found = _variable_at(child, position, ctx)
            if found is not None:
                return found
    return None


def caputo_partial(e: Expression, wrt: Union[Symbol, int], order: OrderLike, p: Point,
                   cfg: CaputoConfig, context: Optional[DerivativeContext] = None) -> float:
    """
    Caputo partial of e along wrt, evaluated at p.

    Polynomial dependence on wrt (coefficients frozen at p) goes through
    caputo_power_rule term by term; otherwise e is restricted to the line
    through p along wrt and handed to caputo_left.
    """
    order = as_order(order)
    position = _position(wrt)
    ctx = _context(context)
    if order.is_classical:
        return evaluate(ctx.integer_partial(e, position), p)

    cfg.validate()
    coordinate = p.coords[position]
    if coordinate <= 0.0:
        raise NonPositiveAbscissa(f"Caputo partial needs u{position + 1} > 0, got {coordinate}")

    terms = power_terms_at(e, position, p, ctx)
    if terms is not None:
        return float(sum(caputo_power_rule(term, order, coordinate) for term in terms))

    base = p.coords

    def along_line(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        u = np.repeat(base[None, :], len(t), axis=0)
        u[:, position] = t
        return evaluate_array(e, u)

    return caputo_left(along_line, order, coordinate, cfg)

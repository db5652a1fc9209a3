"""Expression tree and its printer.

Nodes are frozen dataclasses, so trees are immutable and compare
structurally. The lowercase constructors (add, mul, ...) fold constants
and drop neutral elements; the derivative rules build trees through
them so results stay small.
"""

import math
from dataclasses import dataclass
from functools import singledispatch
from typing import Tuple

FUNCTIONS = ('exp', 'log', 'sin', 'cos', 'sqrt')


class Expression:
    """Base class for expression tree nodes."""
    precedence = 100

    def __str__(self):
        return to_source(self)


@dataclass(frozen=True)
class Const(Expression):
    value: float


@dataclass(frozen=True)
class Symbol(Expression):
    """Coordinate symbol; position is the flat index into u = (x, y)."""
    name: str
    position: int

    @property
    def is_fiber(self) -> bool:
        return self.name.startswith('y')


@dataclass(frozen=True)
class Neg(Expression):
    operand: Expression
    precedence = 3


@dataclass(frozen=True)
class Add(Expression):
    left: Expression
    right: Expression
    precedence = 1
    op_symbol = '+'


@dataclass(frozen=True)
class Sub(Expression):
    left: Expression
    right: Expression
    precedence = 1
    op_symbol = '-'


@dataclass(frozen=True)
class Mul(Expression):
    left: Expression
    right: Expression
    precedence = 2
    op_symbol = '*'


@dataclass(frozen=True)
class Div(Expression):
    left: Expression
    right: Expression
    precedence = 2
    op_symbol = '/'


@dataclass(frozen=True)
class Pow(Expression):
    base: Expression
    exponent: float
    precedence = 4


@dataclass(frozen=True)
class Call(Expression):
    func: str
    arg: Expression


@dataclass(frozen=True)
class CaputoLine(Expression):
    """
    Deferred Caputo partial of `operand` along the coordinate `position`.

    Evaluated by L1 quadrature on the segment from the lower terminal to
    the point, all other coordinates frozen. Produced only when no closed
    form applies.
    """
    operand: Expression
    position: int
    alpha: float
    grid_points: int


ZERO = Const(0.0)
ONE = Const(1.0)


def const(value: float) -> Const:
    return Const(float(value))


def is_const(e: Expression, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def neg(a: Expression) -> Expression:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def add(a: Expression, b: Expression) -> Expression:
    if is_const(a) and is_const(b):
        return Const(a.value + b.value)
    if is_const(a, 0.0):
        return b
    if is_const(b, 0.0):
        return a
    return Add(a, b)


def sub(a: Expression, b: Expression) -> Expression:
    if is_const(a) and is_const(b):
        return Const(a.value - b.value)
    if is_const(b, 0.0):
        return a
    if is_const(a, 0.0):
        return neg(b)
    return Sub(a, b)


def mul(a: Expression, b: Expression) -> Expression:
    if is_const(a) and is_const(b):
        return Const(a.value * b.value)
    if is_const(a, 0.0) or is_const(b, 0.0):
        return ZERO
    if is_const(a, 1.0):
        return b
    if is_const(b, 1.0):
        return a
    return Mul(a, b)


def div(a: Expression, b: Expression) -> Expression:
    if is_const(a, 0.0):
        return ZERO
    if is_const(b, 1.0):
        return a
    if is_const(a) and is_const(b) and b.value != 0.0:
        return Const(a.value / b.value)
    return Div(a, b)


def power(base: Expression, exponent: float) -> Expression:
    exponent = float(exponent)
    if exponent == 0.0:
        return ONE
    if exponent == 1.0:
        return base
    if is_const(base) and base.value > 0.0:
        return Const(base.value ** exponent)
    return Pow(base, exponent)


def call(func: str, arg: Expression) -> Expression:
    return Call(func, arg)


def format_number(value: float) -> str:
    """Shortest text that re-parses to the same float."""
    if math.isfinite(value) and value == int(value) and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


@singledispatch
def to_source(e: Expression) -> str:
    raise TypeError(f"cannot print {type(e).__name__}")


def _wrap(e: Expression, needed: bool) -> str:
    text = to_source(e)
    return f"({text})" if needed else text


@to_source.register(Const)
def _(e: Const) -> str:
    return format_number(e.value)


@to_source.register(Symbol)
def _(e: Symbol) -> str:
    return e.name


@to_source.register(Neg)
def _(e: Neg) -> str:
    return '-' + _wrap(e.operand, e.operand.precedence < Neg.precedence)


def _binary(e) -> str:
    # Left-associative: a right operand of equal precedence needs parentheses.
    left = _wrap(e.left, e.left.precedence < e.precedence)
    right = _wrap(e.right, e.right.precedence <= e.precedence)
    if e.precedence == 1:
        return f"{left} {e.op_symbol} {right}"
    return f"{left}{e.op_symbol}{right}"


for _node in (Add, Sub, Mul, Div):
    to_source.register(_node)(_binary)


@to_source.register(Pow)
def _(e: Pow) -> str:
    base = e.base
    atomic = isinstance(base, (Symbol, Call)) or (isinstance(base, Const) and base.value >= 0)
    return f"{_wrap(base, not atomic)}^{format_number(e.exponent)}"


@to_source.register(Call)
def _(e: Call) -> str:
    return f"{e.func}({to_source(e.arg)})"


@to_source.register(CaputoLine)
def _(e: CaputoLine) -> str:
    # Diagnostic form only; the grammar has no fractional operator.
    return f"caputo[{format_number(e.alpha)}, u{e.position + 1}]({to_source(e.operand)})"


def children(e: Expression) -> Tuple[Expression, ...]:
    if isinstance(e, (Add, Sub, Mul, Div)):
        return (e.left, e.right)
    if isinstance(e, Neg):
        return (e.operand,)
    if isinstance(e, Pow):
        return (e.base,)
    if isinstance(e, Call):
        return (e.arg,)
    if isinstance(e, CaputoLine):
        return (e.operand,)
    return ()

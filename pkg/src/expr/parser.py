"""Recursive-descent parser for scalar field expressions.

Grammar (whitespace insignificant):

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' signed_number)?
    base   := number | ident | '(' expr ')' | func '(' expr ')'
    ident  := ('x' | 'y') digits
    func   := 'exp' | 'log' | 'sin' | 'cos' | 'sqrt'

Numbers accept a fractional part and a decimal exponent.
"""

import re
from dataclasses import dataclass
from typing import List, Optional

from errors import ExpressionSyntaxError, IndexOutOfRange, UnknownSymbol
from expr.nodes import (
    FUNCTIONS,
    Add,
    Call,
    Const,
    Div,
    Expression,
    Mul,
    Neg,
    Pow,
    Sub,
    Symbol,
)

_TOKEN_RE = re.compile(r"""
    (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
  | (?P<space>\s+)
  | (?P<bad>.)
""", re.VERBOSE)

_COORDINATE_RE = re.compile(r"^([xy])(\d+)$")


@dataclass
class Token:
    kind: str
    text: str
    offset: int


def symbol(name: str, n: int, m: Optional[int] = None) -> Symbol:
    """
    Resolve a coordinate name to its Symbol.

    Args:
        name: 'x<i>' (1 <= i <= n) or 'y<a>' (1 <= a <= m)
        n: Base dimension
        m: Fiber dimension, defaults to n

    Returns:
        Symbol with the flat position into u = (x1..xn, y1..ym)
    """
    m = n if m is None else m
    match = _COORDINATE_RE.match(name)
    if not match:
        raise UnknownSymbol(f"unknown symbol '{name}'")
    kind, index = match.group(1), int(match.group(2))
    bound = n if kind == 'x' else m
    if not 1 <= index <= bound:
        raise IndexOutOfRange(f"'{name}' is outside the declared range {kind}1..{kind}{bound}")
    position = index - 1 if kind == 'x' else n + index - 1
    return Symbol(name, position)


class _Parser:
    def __init__(self, source: str, n: int, m: int):
        self.source = source
        self.n = n
        self.m = m
        self.tokens = self._tokenize(source)
        self.index = 0

    def _location(self, offset: int):
        line = self.source.count('\n', 0, offset) + 1
        column = offset - (self.source.rfind('\n', 0, offset) + 1) + 1
        return line, column

    def _error(self, message: str, offset: int) -> ExpressionSyntaxError:
        line, column = self._location(offset)
        return ExpressionSyntaxError(message, line, column, self.source)

    def _tokenize(self, source: str) -> List[Token]:
        tokens = []
        for match in _TOKEN_RE.finditer(source):
            kind = match.lastgroup
            if kind == 'space':
                continue
            if kind == 'bad':
                raise self._error(f"unexpected character '{match.group()}'", match.start())
            tokens.append(Token(kind, match.group(), match.start()))
        tokens.append(Token('end', '', len(source)))
        return tokens

    @property
    def current(self) -> Token:
        return self.tokens[self.index]

    def _advance(self) -> Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def _accept(self, text: str) -> bool:
        if self.current.kind == 'op' and self.current.text == text:
            self.index += 1
            return True
        return False

    def _expect(self, text: str):
        if not self._accept(text):
            found = self.current.text or 'end of input'
            raise self._error(f"expected '{text}' but found '{found}'", self.current.offset)

    def parse(self) -> Expression:
        if self.current.kind == 'end':
            raise self._error("empty expression", 0)
        tree = self.expr()
        if self.current.kind != 'end':
            raise self._error(f"unexpected '{self.current.text}'", self.current.offset)
        return tree

    def expr(self) -> Expression:
        tree = self.term()
        while self.current.kind == 'op' and self.current.text in '+-':
            op = self._advance().text
            right = self.term()
            tree = Add(tree, right) if op == '+' else Sub(tree, right)
        return tree

    def term(self) -> Expression:
        tree = self.factor()
        while self.current.kind == 'op' and self.current.text in '*/':
            op = self._advance().text
            right = self.factor()
            tree = Mul(tree, right) if op == '*' else Div(tree, right)
        return tree

    def factor(self) -> Expression:
        if self._accept('-'):
            operand = self.factor()
            if isinstance(operand, Const):
                return Const(-operand.value)
            return Neg(operand)

        tree = self.base()
        if self._accept('^'):
            tree = Pow(tree, self._signed_number())
        return tree

    def _signed_number(self) -> float:
        sign = 1.0
        if self._accept('-'):
            sign = -1.0
        elif self._accept('+'):
            pass
        token = self.current
        if token.kind != 'number':
            raise self._error("exponent must be a number", token.offset)
        self._advance()
        return sign * float(token.text)

    def base(self) -> Expression:
        token = self.current
        if token.kind == 'number':
            self._advance()
            return Const(float(token.text))

        if token.kind == 'name':
            self._advance()
            if token.text in FUNCTIONS:
                self._expect('(')
                argument = self.expr()
                self._expect(')')
                return Call(token.text, argument)
            if self.current.kind == 'op' and self.current.text == '(':
                raise UnknownSymbol(f"unknown function '{token.text}'")
            try:
                return symbol(token.text, self.n, self.m)
            except (UnknownSymbol, IndexOutOfRange) as e:
                line, column = self._location(token.offset)
                raise type(e)(f"{e} (line {line}, column {column})") from None

        if self._accept('('):
            tree = self.expr()
            self._expect(')')
            return tree

        found = token.text or 'end of input'
        raise self._error(f"unexpected '{found}'", token.offset)


def parse(source: str, n: int, m: Optional[int] = None) -> Expression:
    """
    Parse expression text over the coordinates x1..xn, y1..ym.

    Args:
        source: Expression text
        n: Base dimension
        m: Fiber dimension, defaults to n

    Returns:
        Immutable expression tree

    Raises:
        ExpressionSyntaxError: Malformed text, with line and column
        UnknownSymbol: Identifier that is neither a coordinate nor a function
        IndexOutOfRange: Coordinate index outside the declared dimension
    """
    return _Parser(source, n, n if m is None else m).parse()

"""
Expression language for metric components, embeddings and test functions.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := ("+" | "-") unary | factor
    factor := atom ("^" ["-"] integer)?
    atom   := number | ident | "(" expr ")" | func "(" expr ")"

Identifiers are x1..x9, u1..u9 and pi; functions are sin, cos, exp, log, sqrt,
tanh and atan. Parsed trees evaluate to jets and print back to parseable text.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from gjms.errors import ExpressionSyntaxError, GeometrySpecError
from gjms.jets.series import Jet

logger = logging.getLogger(__name__)

# Token types
NUMBER = "NUMBER"
OPERATOR = "OPERATOR"
LPAREN = "LPAREN"
RPAREN = "RPAREN"
IDENTIFIER = "IDENTIFIER"
EOF = "EOF"

OPERATORS = ("+", "-", "*", "/", "^")
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh", "atan")
VARIABLE_PREFIXES = ("x", "u")


@dataclass(frozen=True)
class Token:
    type: str
    value: Optional[str]
    line: int
    column: int


class Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.column = 1
        self.current_char = self.text[0] if self.text else None

    def advance(self):
        if self.current_char == "\n":
            self.line += 1
            self.column = 1
        else:
            self.column += 1
        self.pos += 1
        self.current_char = self.text[self.pos] if self.pos < len(self.text) else None

    def skip_whitespace(self):
        while self.current_char is not None and self.current_char.isspace():
            self.advance()

    def _digits(self) -> str:
        result = ""
        while self.current_char is not None and self.current_char.isdigit():
            result += self.current_char
            self.advance()
        return result

    def get_number(self) -> str:
        """Decimal literal with optional fraction and exponent."""
        line, column = self.line, self.column
        result = self._digits()
        if self.current_char == ".":
            result += "."
            self.advance()
            result += self._digits()
        if self.current_char in ("e", "E"):
            result += "e"
            self.advance()
            if self.current_char in ("+", "-"):
                result += self.current_char
                self.advance()
            exponent = self._digits()
            if not exponent:
                raise ExpressionSyntaxError("malformed exponent in number", line, column, result)
            result += exponent
        if result in (".", ""):
            raise ExpressionSyntaxError("malformed number", line, column, result)
        return result

    def get_identifier(self) -> str:
        result = ""
        while self.current_char is not None and (self.current_char.isalnum() or self.current_char == "_"):
            result += self.current_char
            self.advance()
        return result

    def get_next_token(self) -> Token:
        while self.current_char is not None:
            if self.current_char.isspace():
                self.skip_whitespace()
                continue

            line, column = self.line, self.column
            if self.current_char.isdigit() or self.current_char == ".":
                return Token(NUMBER, self.get_number(), line, column)

            if self.current_char.isalpha():
                return Token(IDENTIFIER, self.get_identifier(), line, column)

            if self.current_char in OPERATORS:
                op = self.current_char
                self.advance()
                return Token(OPERATOR, op, line, column)

            if self.current_char in "()":
                kind = LPAREN if self.current_char == "(" else RPAREN
                op = self.current_char
                self.advance()
                return Token(kind, op, line, column)

            raise ExpressionSyntaxError(f"invalid character {self.current_char!r}", line, column, self.current_char)

        return Token(EOF, None, self.line, self.column)


# --- AST ---


class ExprNode:
    """Base class of expression trees."""

    def evaluate(self, scope: "Scope") -> Jet:
        raise NotImplementedError

    def symbols(self) -> frozenset[str]:
        return frozenset()


@dataclass(frozen=True)
class Num(ExprNode):
    value: float

    def evaluate(self, scope: "Scope") -> Jet:
        return scope.constant(self.value)

    def __str__(self) -> str:
        text = repr(float(self.value))
        return f"({text})" if self.value < 0 else text


@dataclass(frozen=True)
class Pi(ExprNode):
    def evaluate(self, scope: "Scope") -> Jet:
        return scope.constant(math.pi)

    def __str__(self) -> str:
        return "pi"


@dataclass(frozen=True)
class Symbol(ExprNode):
    name: str

    def evaluate(self, scope: "Scope") -> Jet:
        return scope.lookup(self.name)

    def symbols(self) -> frozenset[str]:
        return frozenset({self.name})

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class BinOp(ExprNode):
    op: str
    left: ExprNode
    right: ExprNode

    def evaluate(self, scope: "Scope") -> Jet:
        a = scope.evaluate(self.left)
        b = scope.evaluate(self.right)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return a / b

    def symbols(self) -> frozenset[str]:
        return self.left.symbols() | self.right.symbols()

    def __str__(self) -> str:
        return f"({self.left} {self.op} {self.right})"


@dataclass(frozen=True)
class Negate(ExprNode):
    operand: ExprNode

    def evaluate(self, scope: "Scope") -> Jet:
        return -scope.evaluate(self.operand)

    def symbols(self) -> frozenset[str]:
        return self.operand.symbols()

    def __str__(self) -> str:
        return f"(-{self.operand})"


@dataclass(frozen=True)
class Power(ExprNode):
    base: ExprNode
    exponent: int

    def evaluate(self, scope: "Scope") -> Jet:
        return scope.evaluate(self.base) ** self.exponent

    def symbols(self) -> frozenset[str]:
        return self.base.symbols()

    def __str__(self) -> str:
        return f"({self.base})^{self.exponent}"


@dataclass(frozen=True)
class Call(ExprNode):
    func: str
    argument: ExprNode

    def evaluate(self, scope: "Scope") -> Jet:
        return getattr(scope.evaluate(self.argument), self.func)()

    def symbols(self) -> frozenset[str]:
        return self.argument.symbols()

    def __str__(self) -> str:
        return f"{self.func}({self.argument})"


# --- Parser ---


class Parser:
    def __init__(self, lexer: Lexer):
        self.lexer = lexer
        self.current_token = self.lexer.get_next_token()

    def error(self, message: str):
        token = self.current_token
        shown = token.value if token.value is not None else "end of input"
        raise ExpressionSyntaxError(f"{message}, got {shown!r}", token.line, token.column, token.value)

    def eat(self, token_type: str, value: Optional[str] = None) -> Token:
        token = self.current_token
        if token.type != token_type or (value is not None and token.value != value):
            self.error(f"expected {value or token_type}")
        self.current_token = self.lexer.get_next_token()
        return token

    def _at(self, token_type: str, value: Optional[str] = None) -> bool:
        token = self.current_token
        return token.type == token_type and (value is None or token.value == value)

    def parse(self) -> ExprNode:
        node = self.expr()
        if not self._at(EOF):
            self.error("unexpected token")
        return node

    def expr(self) -> ExprNode:
        node = self.term()
        while self._at(OPERATOR, "+") or self._at(OPERATOR, "-"):
            op = self.eat(OPERATOR).value
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> ExprNode:
        node = self.unary()
        while self._at(OPERATOR, "*") or self._at(OPERATOR, "/"):
            op = self.eat(OPERATOR).value
            node = BinOp(op, node, self.unary())
        return node

    def unary(self) -> ExprNode:
        if self._at(OPERATOR, "-"):
            self.eat(OPERATOR)
            return Negate(self.unary())
        if self._at(OPERATOR, "+"):
            self.eat(OPERATOR)
            return self.unary()
        return self.factor()

    def factor(self) -> ExprNode:
        node = self.atom()
        if self._at(OPERATOR, "^"):
            self.eat(OPERATOR)
            sign = 1
            if self._at(OPERATOR, "-"):
                self.eat(OPERATOR)
                sign = -1
            token = self.current_token
            if token.type != NUMBER or not token.value.isdigit():
                self.error("expected an integer exponent")
            self.eat(NUMBER)
            node = Power(node, sign * int(token.value))
        return node

    def atom(self) -> ExprNode:
        token = self.current_token
        if token.type == NUMBER:
            self.eat(NUMBER)
            return Num(float(token.value))

        if token.type == LPAREN:
            self.eat(LPAREN)
            node = self.expr()
            self.eat(RPAREN, ")")
            return node

        if token.type == IDENTIFIER:
            name = token.value
            if name in FUNCTIONS:
                self.eat(IDENTIFIER)
                self.eat(LPAREN, "(")
                argument = self.expr()
                self.eat(RPAREN, ")")
                return Call(name, argument)
            if name == "pi":
                self.eat(IDENTIFIER)
                return Pi()
            if _is_variable(name):
                self.eat(IDENTIFIER)
                return Symbol(name)
            raise ExpressionSyntaxError(f"unknown identifier {name!r}", token.line, token.column, name)

        self.error("unexpected token")


def _is_variable(name: str) -> bool:
    return len(name) == 2 and name[0] in VARIABLE_PREFIXES and name[1] in "123456789"


def parse(text: str) -> ExprNode:
    """Parse expression text into an AST."""
    return Parser(Lexer(text)).parse()


def as_expression(value: Union[str, ExprNode, float, int]) -> ExprNode:
    if isinstance(value, ExprNode):
        return value
    if isinstance(value, (int, float)):
        return Num(float(value))
    return parse(value)


# --- Evaluation ---


def default_bindings(dim: int) -> dict[str, int]:
    return {f"x{i + 1}": i for i in range(dim)}


class Scope:
    """Variable jets plus a memo of already evaluated subtrees."""

    def __init__(self, point: Sequence[float], order: int, bindings: Optional[Mapping[str, int]] = None):
        point = np.asarray(point, dtype=float).reshape(-1)
        self.dim = len(point)
        self.order = order
        bindings = default_bindings(self.dim) if bindings is None else bindings
        self.variables = {
            name: Jet.variable(index + 1, point[index], self.dim, order) for name, index in bindings.items()
        }
        self._memo: dict[int, tuple[ExprNode, Jet]] = {}

    def constant(self, value: float) -> Jet:
        return Jet.constant(value, self.dim, self.order)

    def lookup(self, name: str) -> Jet:
        try:
            return self.variables[name]
        except KeyError:
            raise GeometrySpecError(f"unbound identifier {name!r}") from None

    def evaluate(self, node: ExprNode) -> Jet:
        cached = self._memo.get(id(node))
        if cached is not None and cached[0] is node:
            return cached[1]
        result = node.evaluate(self)
        self._memo[id(node)] = (node, result)
        return result


def evaluate(
    expr: Union[str, ExprNode],
    point: Sequence[float],
    order: int,
    bindings: Optional[Mapping[str, int]] = None,
) -> Jet:
    """Truncated Taylor expansion of ``expr`` at ``point``."""
    return Scope(point, order, bindings).evaluate(as_expression(expr))


# --- Builders ---


def product(*factors: Union[str, ExprNode, float]) -> ExprNode:
    nodes = [as_expression(f) for f in factors]
    result = nodes[0]
    for node in nodes[1:]:
        result = BinOp("*", result, node)
    return result


def total(*terms: Union[str, ExprNode, float]) -> ExprNode:
    nodes = [as_expression(t) for t in terms]
    result = nodes[0]
    for node in nodes[1:]:
        result = BinOp("+", result, node)
    return result


def exp_of(argument: Union[str, ExprNode]) -> ExprNode:
    return Call("exp", as_expression(argument))


def is_zero(node: ExprNode) -> bool:
    return isinstance(node, Num) and node.value == 0.0

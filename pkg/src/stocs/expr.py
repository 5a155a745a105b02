"""Constraint expression language: AST, parser, type checker, evaluator.

Grammar, lowest to highest precedence:

    or < and < not < comparison (non-associative) < additive (left)
       < multiplicative (left) < unary minus < atoms

Comparison operators are spelled ``= != < <= > >=``; keywords are lowercase.
Chained comparisons like ``a < b < c`` are rejected. Atoms are integer
literals, identifiers, and parenthesized expressions.

Booleans count as the integers 0/1 inside arithmetic and comparisons, which
lets objectives use indicator terms like ``10 * (x = s)``. The operands of
``and``/``or``/``not`` must be boolean.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Iterator

from .errors import (
    BadExpressionTypeError,
    ChainedComparisonError,
    ExpressionSyntaxError,
)

__all__ = [
    "Expr", "IntLiteral", "VariableRef", "Add", "Sub", "Mul", "Neg",
    "Eq", "Ne", "Lt", "Le", "Gt", "Ge", "And", "Or", "Not",
    "parse_expression", "infer_type", "variables_in", "compile_expression",
    "format_expression", "interval_range",
]


@dataclass(frozen=True)
class Expr:
    pass


@dataclass(frozen=True)
class IntLiteral(Expr):
    value: int


@dataclass(frozen=True)
class VariableRef(Expr):
    name: str


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class Eq(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Ne(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Lt(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Le(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Gt(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Ge(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class And(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Or(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr


_COMPARISONS = {"=": Eq, "!=": Ne, "<": Lt, "<=": Le, ">": Gt, ">=": Ge}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|!=|[=<>+\-*()]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # "int" | "name" | "op" | "end"
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.lastgroup is None:
            at = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionSyntaxError(f"unexpected character {text[at]!r}", at)
        kind = m.lastgroup
        tokens.append(_Token(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op: str) -> None:
        tok = self.peek()
        if tok.kind != "op" or tok.text != op:
            raise ExpressionSyntaxError(f"expected {op!r}", tok.pos)
        self.advance()

    def at_op(self, *ops: str) -> bool:
        tok = self.peek()
        return tok.kind == "op" and tok.text in ops

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "name" and tok.text == word

    def parse(self) -> Expr:
        node = self.parse_or()
        tok = self.peek()
        if tok.kind != "end":
            raise ExpressionSyntaxError(f"unexpected trailing input {tok.text!r}", tok.pos)
        return node

    def parse_or(self) -> Expr:
        node = self.parse_and()
        while self.at_keyword("or"):
            self.advance()
            node = Or(node, self.parse_and())
        return node

    def parse_and(self) -> Expr:
        node = self.parse_not()
        while self.at_keyword("and"):
            self.advance()
            node = And(node, self.parse_not())
        return node

    def parse_not(self) -> Expr:
        if self.at_keyword("not"):
            self.advance()
            return Not(self.parse_not())
        return self.parse_comparison()

    def parse_comparison(self) -> Expr:
        node = self.parse_additive()
        if self.at_op(*_COMPARISONS):
            op = self.advance()
            node = _COMPARISONS[op.text](node, self.parse_additive())
            # non-associative: a second comparison operator is an error
            if self.at_op(*_COMPARISONS):
                tok = self.peek()
                raise ChainedComparisonError("chained comparison", tok.pos)
        return node

    def parse_additive(self) -> Expr:
        node = self.parse_multiplicative()
        while self.at_op("+", "-"):
            op = self.advance()
            right = self.parse_multiplicative()
            node = Add(node, right) if op.text == "+" else Sub(node, right)
        return node

    def parse_multiplicative(self) -> Expr:
        node = self.parse_unary()
        while self.at_op("*"):
            self.advance()
            node = Mul(node, self.parse_unary())
        return node

    def parse_unary(self) -> Expr:
        if self.at_op("-"):
            self.advance()
            return Neg(self.parse_unary())
        return self.parse_atom()

    def parse_atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "int":
            self.advance()
            return IntLiteral(int(tok.text))
        if tok.kind == "name":
            if tok.text in ("and", "or", "not"):
                raise ExpressionSyntaxError(f"unexpected keyword {tok.text!r}", tok.pos)
            self.advance()
            return VariableRef(tok.text)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            node = self.parse_or()
            self.expect_op(")")
            return node
        shown = tok.text if tok.kind != "end" else "end of input"
        raise ExpressionSyntaxError(f"expected expression, found {shown}", tok.pos)


def parse_expression(text: str) -> Expr:
    """Parse ``text`` into an expression tree.

    Raises ExpressionSyntaxError (with a character offset) on malformed
    input, including chained comparisons.
    """
    return _Parser(text).parse()


def infer_type(node: Expr) -> str:
    """Return "int" or "bool" for a well-typed expression.

    Arithmetic and comparisons accept both kinds (booleans act as 0/1);
    ``and``/``or``/``not`` insist on boolean operands.
    """
    if isinstance(node, (IntLiteral, VariableRef)):
        return "int"
    if isinstance(node, (Add, Sub, Mul)):
        infer_type(node.left)
        infer_type(node.right)
        return "int"
    if isinstance(node, Neg):
        infer_type(node.operand)
        return "int"
    if isinstance(node, (Eq, Ne, Lt, Le, Gt, Ge)):
        infer_type(node.left)
        infer_type(node.right)
        return "bool"
    if isinstance(node, (And, Or)):
        for side in (node.left, node.right):
            if infer_type(side) != "bool":
                raise BadExpressionTypeError(
                    f"{type(node).__name__.lower()} needs boolean operands, "
                    f"got {format_expression(side)!r}"
                )
        return "bool"
    if isinstance(node, Not):
        if infer_type(node.operand) != "bool":
            raise BadExpressionTypeError(
                f"not needs a boolean operand, got {format_expression(node.operand)!r}"
            )
        return "bool"
    raise TypeError(f"not an expression node: {node!r}")


def _walk(node: Expr) -> Iterator[Expr]:
    yield node
    for field in ("left", "right", "operand"):
        child = getattr(node, field, None)
        if child is not None:
            yield from _walk(child)


def variables_in(node: Expr) -> list[str]:
    """Variable names in first-occurrence order, without duplicates."""
    seen: dict[str, None] = {}
    for sub in _walk(node):
        if isinstance(sub, VariableRef):
            seen.setdefault(sub.name)
    return list(seen)


def compile_expression(node: Expr, index_of: dict[str, int]) -> Callable:
    """Compile to a closure evaluating over an environment list.

    The environment is a list indexed by variable position; only positions
    named in the expression are read. Comparison results are Python bools,
    which arithmetic treats as 0/1.
    """
    if isinstance(node, IntLiteral):
        v = node.value
        return lambda env: v
    if isinstance(node, VariableRef):
        i = index_of[node.name]
        return lambda env: env[i]
    if isinstance(node, Neg):
        f = compile_expression(node.operand, index_of)
        return lambda env: -f(env)
    if isinstance(node, Not):
        f = compile_expression(node.operand, index_of)
        return lambda env: not f(env)
    left = compile_expression(node.left, index_of)
    right = compile_expression(node.right, index_of)
    if isinstance(node, Add):
        return lambda env: left(env) + right(env)
    if isinstance(node, Sub):
        return lambda env: left(env) - right(env)
    if isinstance(node, Mul):
        return lambda env: left(env) * right(env)
    if isinstance(node, Eq):
        return lambda env: left(env) == right(env)
    if isinstance(node, Ne):
        return lambda env: left(env) != right(env)
    if isinstance(node, Lt):
        return lambda env: left(env) < right(env)
    if isinstance(node, Le):
        return lambda env: left(env) <= right(env)
    if isinstance(node, Gt):
        return lambda env: left(env) > right(env)
    if isinstance(node, Ge):
        return lambda env: left(env) >= right(env)
    if isinstance(node, And):
        return lambda env: bool(left(env)) and bool(right(env))
    if isinstance(node, Or):
        return lambda env: bool(left(env)) or bool(right(env))
    raise TypeError(f"not an expression node: {node!r}")


_LEVEL_OR = 1
_LEVEL_AND = 2
_LEVEL_NOT = 3
_LEVEL_CMP = 4
_LEVEL_ADD = 5
_LEVEL_MUL = 6
_LEVEL_NEG = 7
_LEVEL_ATOM = 8

_CMP_TEXT = {Eq: "=", Ne: "!=", Lt: "<", Le: "<=", Gt: ">", Ge: ">="}


def _level(node: Expr) -> int:
    if isinstance(node, (IntLiteral, VariableRef)):
        return _LEVEL_ATOM
    if isinstance(node, Neg):
        return _LEVEL_NEG
    if isinstance(node, Mul):
        return _LEVEL_MUL
    if isinstance(node, (Add, Sub)):
        return _LEVEL_ADD
    if isinstance(node, (Eq, Ne, Lt, Le, Gt, Ge)):
        return _LEVEL_CMP
    if isinstance(node, Not):
        return _LEVEL_NOT
    if isinstance(node, And):
        return _LEVEL_AND
    return _LEVEL_OR


def format_expression(node: Expr) -> str:
    """Print with minimal parentheses; parse_expression inverts it."""
    def wrap(child: Expr, minimum: int) -> str:
        text = format_expression(child)
        return f"({text})" if _level(child) < minimum else text

    if isinstance(node, IntLiteral):
        return str(node.value)
    if isinstance(node, VariableRef):
        return node.name
    if isinstance(node, Neg):
        return "-" + wrap(node.operand, _LEVEL_NEG)
    if isinstance(node, Not):
        return "not " + wrap(node.operand, _LEVEL_NOT)
    level = _level(node)
    if isinstance(node, (Add, Sub, Mul)):
        op = {Add: "+", Sub: "-", Mul: "*"}[type(node)]
        # left-associative: equal level allowed on the left only
        return f"{wrap(node.left, level)} {op} {wrap(node.right, level + 1)}"
    if isinstance(node, (Eq, Ne, Lt, Le, Gt, Ge)):
        op = _CMP_TEXT[type(node)]
        return f"{wrap(node.left, level + 1)} {op} {wrap(node.right, level + 1)}"
    op = "and" if isinstance(node, And) else "or"
    return f"{wrap(node.left, level)} {op} {wrap(node.right, level + 1)}"


def interval_range(node: Expr, domain_of: dict[str, tuple[int, ...]]) -> tuple[int, int]:
    """Cheap interval bound on the values an expression can take.

    Used to warn when an objective's violation value beats every achievable
    objective value. Sound but not tight (interval arithmetic).
    """
    if isinstance(node, IntLiteral):
        return node.value, node.value
    if isinstance(node, VariableRef):
        dom = domain_of[node.name]
        return dom[0], dom[-1]
    if isinstance(node, Neg):
        lo, hi = interval_range(node.operand, domain_of)
        return -hi, -lo
    if isinstance(node, (Eq, Ne, Lt, Le, Gt, Ge, Not)):
        return 0, 1
    if isinstance(node, (And, Or)):
        return 0, 1
    a, b = interval_range(node.left, domain_of)
    c, d = interval_range(node.right, domain_of)
    if isinstance(node, Add):
        return a + c, b + d
    if isinstance(node, Sub):
        return a - d, b - c
    corners = (a * c, a * d, b * c, b * d)
    return min(corners), max(corners)

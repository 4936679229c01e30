# expressions.py
"""
Initial packet-set expressions (the `target_subnet` intent parameter).

The parameter is a JSON-encoded list of tokens. A term is a bracketed list of masked values
(their conjunction); `&` intersects, `|` unites, `^` complements the following term and
parentheses group. `^` binds tightest, then `&`, then `|`.
"""
import json
from collections import Counter
from dataclasses import dataclass
from typing import Iterator

from slicecheck.errors import BadExpression
from slicecheck.header_space import (
    ETH_DST,
    ETH_SRC,
    IP_DST,
    IP_SRC,
    L4_DST,
    L4_SRC,
    HeaderSpace,
    MaskedValue,
    PacketSet,
)

OPERATORS = ("&", "|", "^", "(", ")")
REVERSED_FIELDS = {
    ETH_SRC: ETH_DST,
    ETH_DST: ETH_SRC,
    IP_SRC: IP_DST,
    IP_DST: IP_SRC,
    L4_SRC: L4_DST,
    L4_DST: L4_SRC,
}


class Expr:
    def build(self, space: HeaderSpace) -> PacketSet:
        raise NotImplementedError

    def tokens(self) -> list:
        raise NotImplementedError

    def terms(self) -> Iterator[MaskedValue]:
        raise NotImplementedError

    def reverse(self) -> "Expr":
        """The same expression with source and destination fields swapped."""
        raise NotImplementedError

    def to_text(self) -> str:
        return json.dumps(self.tokens())


@dataclass(frozen=True)
class Term(Expr):
    atoms: tuple[MaskedValue, ...]

    def build(self, space):
        return space.match(self.atoms)

    def tokens(self):
        return [[mv.to_json() for mv in self.atoms]]

    def terms(self):
        yield from self.atoms

    def reverse(self):
        return Term(
            tuple(
                MaskedValue(
                    REVERSED_FIELDS.get(mv.field_code, mv.field_code), mv.value, mv.mask, mv.depth
                )
                for mv in self.atoms
            )
        )


@dataclass(frozen=True)
class Not(Expr):
    operand: Expr

    def build(self, space):
        return ~self.operand.build(space)

    def tokens(self):
        inner = self.operand.tokens()
        return ["^"] + (inner if isinstance(self.operand, Term) else ["("] + inner + [")"])

    def terms(self):
        yield from self.operand.terms()

    def reverse(self):
        return Not(self.operand.reverse())


@dataclass(frozen=True)
class Binary(Expr):
    op: str
    left: Expr
    right: Expr

    def build(self, space):
        lhs, rhs = self.left.build(space), self.right.build(space)
        return lhs & rhs if self.op == "&" else lhs | rhs

    def tokens(self):
        return ["("] + self.left.tokens() + [self.op] + self.right.tokens() + [")"]

    def terms(self):
        yield from self.left.terms()
        yield from self.right.terms()

    def reverse(self):
        return Binary(self.op, self.left.reverse(), self.right.reverse())


class _Parser:
    def __init__(self, tokens: list):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def parse(self) -> Expr:
        if not self.tokens:
            raise BadExpression(0, "empty expression")
        expr = self.union()
        if self.pos != len(self.tokens):
            raise BadExpression(self.pos, f"unexpected token {self.peek()!r}")
        return expr

    def union(self) -> Expr:
        expr = self.intersection()
        while self.peek() == "|":
            self.take()
            expr = Binary("|", expr, self.intersection())
        return expr

    def intersection(self) -> Expr:
        expr = self.unary()
        while self.peek() == "&":
            self.take()
            expr = Binary("&", expr, self.unary())
        return expr

    def unary(self) -> Expr:
        if self.peek() == "^":
            self.take()
            return Not(self.unary())
        return self.primary()

    def primary(self) -> Expr:
        position = self.pos
        tok = self.take()
        if tok == "(":
            expr = self.union()
            if self.take() != ")":
                raise BadExpression(self.pos - 1, "missing ')'")
            return expr
        if isinstance(tok, dict):
            tok = [tok]
        if isinstance(tok, list):
            try:
                return Term(tuple(MaskedValue.from_json(mv) for mv in tok))
            except (KeyError, TypeError, ValueError, AttributeError) as e:
                raise BadExpression(position, f"bad masked value: {e}")
        if tok is None:
            raise BadExpression(position, "unexpected end of expression")
        raise BadExpression(position, f"unexpected token {tok!r}")


def parse_expression(source: str | list) -> Expr:
    """
    Parse a target_subnet expression.
    Args:
        source (str | list): JSON text of the token list, or the decoded list.
    Returns:
        Expr: Tree whose build(space) yields the initial packet set.
    Raises:
        BadExpression: With the index of the offending token.
    """
    if isinstance(source, str):
        try:
            source = json.loads(source)
        except json.JSONDecodeError as e:
            raise BadExpression(0, f"not JSON: {e}")
    if not isinstance(source, list):
        raise BadExpression(0, "expression must be a list of tokens")
    return _Parser(source).parse()


def term_multiset(expr: Expr | None) -> Counter:
    """Masked values of an expression as a multiset, for intent distances."""
    if expr is None:
        return Counter()
    return Counter((mv.field_code, mv.value, mv.mask, mv.depth) for mv in expr.terms())


def conjunction(atoms: list[MaskedValue]) -> Expr:
    return Term(tuple(atoms))

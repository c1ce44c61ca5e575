"""Concrete syntax for Findel primitives.

Grammar (whitespace is insignificant between tokens)::

    expr := Zero | One(CUR) | Scale(NAT, expr) | ScaleObs(ADDR, expr)
          | Give(expr) | And(expr, expr) | Or(expr, expr)
          | If(ADDR, expr, expr) | Timebound(NAT, NAT, expr)
          | At(NAT, expr) | Before(NAT, expr) | After(NAT, expr)

``At``/``Before``/``After`` are expanded while parsing, so they never
appear in the resulting tree and ``pretty_print`` does not restore them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

from . import ast
from .ast import And, Give, If, One, Or, Primitive, Scale, ScaleObs, Timebound, Zero

DEFAULT_DELTA = 30
MAX_NESTING = 400

_TOKEN_RE = re.compile(r"(?P<ws>\s+)|(?P<word>[A-Za-z0-9_][A-Za-z0-9_.:\-]*)|(?P<punct>[(),])")


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int, expected: frozenset[str] = frozenset()):
        self.message = message
        self.line = line
        self.column = column
        self.expected = expected
        detail = f" (expected {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{line}:{column}: {message}{detail}")


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # "word", "punct" or "eof"
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        chunk = m.group()
        if m.lastgroup != "ws":
            tokens.append(Token(m.lastgroup, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


_CONSTRUCTORS = (
    "Zero", "One", "Scale", "ScaleObs", "Give", "And", "Or", "If", "Timebound",
    "At", "Before", "After",
)
_EXPR = frozenset(_CONSTRUCTORS)


class _Parser:
    def __init__(self, text: str, delta: int):
        self.tokens = tokenize(text)
        self.pos = 0
        self.delta = delta
        self.nesting = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, message: str, expected: frozenset[str] | set[str] = frozenset()) -> ParseError:
        tok = self.peek()
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return ParseError(f"{message}, found {found}", tok.line, tok.column, frozenset(expected))

    def punct(self, ch: str) -> None:
        tok = self.peek()
        if tok.kind != "punct" or tok.text != ch:
            raise self.fail(f"expected {ch!r}", {ch})
        self.advance()

    def nat(self) -> int:
        tok = self.peek()
        if tok.kind != "word" or not tok.text.isdigit():
            raise self.fail("expected a natural number", {"NAT"})
        self.advance()
        return int(tok.text)

    def currency(self) -> str:
        tok = self.peek()
        if tok.kind != "word" or not ast.CURRENCY_RE.fullmatch(tok.text):
            raise self.fail("expected a currency symbol", {"CUR"})
        self.advance()
        return tok.text

    def address(self) -> str:
        tok = self.peek()
        if tok.kind != "word":
            raise self.fail("expected an address", {"ADDR"})
        self.advance()
        return tok.text

    def expr(self) -> Primitive:
        tok = self.peek()
        if tok.kind != "word" or tok.text not in _EXPR:
            raise self.fail("expected a primitive", _EXPR)
        self.nesting += 1
        if self.nesting > MAX_NESTING:
            raise self.fail(f"expression nested deeper than {MAX_NESTING}")
        self.advance()
        name = tok.text
        if name == "Zero":
            node: Primitive = Zero()
        else:
            self.punct("(")
            node = self._RULES[name](self)
            self.punct(")")
        self.nesting -= 1
        return node

    def _args(self, *parts: Callable[[_Parser], object]) -> list:
        out = []
        for i, part in enumerate(parts):
            if i:
                self.punct(",")
            out.append(part(self))
        return out

    _RULES: dict[str, Callable[[_Parser], Primitive]] = {
        "One": lambda s: One(s.currency()),
        "Scale": lambda s: Scale(*s._args(_Parser.nat, _Parser.expr)),
        "ScaleObs": lambda s: ScaleObs(*s._args(_Parser.address, _Parser.expr)),
        "Give": lambda s: Give(s.expr()),
        "And": lambda s: And(*s._args(_Parser.expr, _Parser.expr)),
        "Or": lambda s: Or(*s._args(_Parser.expr, _Parser.expr)),
        "If": lambda s: If(*s._args(_Parser.address, _Parser.expr, _Parser.expr)),
        "Timebound": lambda s: Timebound(*s._args(_Parser.nat, _Parser.nat, _Parser.expr)),
        "At": lambda s: ast.at(*s._args(_Parser.nat, _Parser.expr), s.delta),
        "Before": lambda s: ast.before(*s._args(_Parser.nat, _Parser.expr)),
        "After": lambda s: ast.after(*s._args(_Parser.nat, _Parser.expr)),
    }


def parse(text: str, delta: int = DEFAULT_DELTA) -> Primitive:
    """Parse a Findel expression, expanding At/Before/After with the given delta.

    Raises ParseError (with line, column and the expected token set) on any
    malformed input.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    p = _Parser(text, delta)
    node = p.expr()
    if p.peek().kind != "eof":
        raise p.fail("trailing input", {"end of input"})
    return node


def pretty_print(p: Primitive) -> str:
    """Canonical rendering: ``", "`` between arguments, no sugar."""
    match p:
        case Zero():
            return "Zero"
        case One(currency=c):
            return f"One({c})"
        case Scale(k=k, sub=s):
            return f"Scale({k}, {pretty_print(s)})"
        case ScaleObs(source=a, sub=s):
            return f"ScaleObs({a}, {pretty_print(s)})"
        case Give(sub=s):
            return f"Give({pretty_print(s)})"
        case And(left=l, right=r):
            return f"And({pretty_print(l)}, {pretty_print(r)})"
        case Or(left=l, right=r):
            return f"Or({pretty_print(l)}, {pretty_print(r)})"
        case If(source=a, then=t, else_=e):
            return f"If({a}, {pretty_print(t)}, {pretty_print(e)})"
        case Timebound(t0=t0, t1=t1, sub=s):
            return f"Timebound({t0}, {t1}, {pretty_print(s)})"
    raise TypeError(f"not a primitive: {p!r}")

"""Findel primitive trees, derived combinators and structural validation.

A contract description is a finite tree built from nine constructors.
Trees are immutable, hashable and compare structurally.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union

# Timestamps are unbounded naturals; this is the sentinel used by `after`.
T_MAX = 2**64 - 1

CURRENCY_RE = re.compile(r"[A-Z]{1,8}")
ADDRESS_RE = re.compile(r"[A-Za-z0-9_][A-Za-z0-9_.:\-]*")


def check_currency(symbol: str) -> str:
    if not isinstance(symbol, str) or not CURRENCY_RE.fullmatch(symbol):
        raise ValueError(f"invalid currency symbol {symbol!r}")
    return symbol


def check_address(value: str) -> str:
    if not isinstance(value, str) or not ADDRESS_RE.fullmatch(value):
        raise ValueError(f"invalid address {value!r}")
    return value


def _check_nat(name: str, value: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ValueError(f"{name} must be a natural number, got {value!r}")


@dataclass(frozen=True, slots=True)
class Zero:
    pass


@dataclass(frozen=True, slots=True)
class One:
    currency: str

    def __post_init__(self) -> None:
        check_currency(self.currency)


@dataclass(frozen=True, slots=True)
class Scale:
    k: int
    sub: Primitive

    def __post_init__(self) -> None:
        _check_nat("scale factor", self.k)


@dataclass(frozen=True, slots=True)
class ScaleObs:
    source: str
    sub: Primitive

    def __post_init__(self) -> None:
        check_address(self.source)


@dataclass(frozen=True, slots=True)
class Give:
    sub: Primitive


@dataclass(frozen=True, slots=True)
class And:
    left: Primitive
    right: Primitive


@dataclass(frozen=True, slots=True)
class Or:
    left: Primitive
    right: Primitive


@dataclass(frozen=True, slots=True)
class If:
    source: str
    then: Primitive
    else_: Primitive

    def __post_init__(self) -> None:
        check_address(self.source)


@dataclass(frozen=True, slots=True)
class Timebound:
    """Window ``[t0, t1]``; ``t0 <= t1`` is checked by :func:`validate`, not here."""

    t0: int
    t1: int
    sub: Primitive

    def __post_init__(self) -> None:
        _check_nat("t0", self.t0)
        _check_nat("t1", self.t1)


Primitive = Union[Zero, One, Scale, ScaleObs, Give, And, Or, If, Timebound]


def children(p: Primitive) -> list[tuple[str, Primitive]]:
    """Named sub-trees of ``p`` in left-to-right order."""
    match p:
        case Scale(sub=s) | ScaleObs(sub=s) | Give(sub=s) | Timebound(sub=s):
            return [("sub", s)]
        case And(left=l, right=r) | Or(left=l, right=r):
            return [("left", l), ("right", r)]
        case If(then=a, else_=b):
            return [("then", a), ("else", b)]
    return []


def walk(p: Primitive, path: tuple[str, ...] = ()) -> Iterator[tuple[tuple[str, ...], Primitive]]:
    """Pre-order traversal yielding ``(path, node)``."""
    stack = [(path, p)]
    while stack:
        here, node = stack.pop()
        yield here, node
        stack.extend((here + (name,), c) for name, c in reversed(children(node)))


def depth(p: Primitive) -> int:
    return 1 + max((depth(c) for _, c in children(p)), default=0)


def size(p: Primitive) -> int:
    return sum(1 for _ in walk(p))


# -- derived combinators ---------------------------------------------------

def at(t: int, p: Primitive, delta: int) -> Timebound:
    """Executable only within ``delta`` time units of ``t``; the lower bound saturates at 0."""
    _check_nat("delta", delta)
    return Timebound(max(t - delta, 0), t + delta, p)


def before(t: int, p: Primitive) -> Timebound:
    return Timebound(0, t, p)


def after(t: int, p: Primitive) -> Timebound:
    return Timebound(t, T_MAX, p)


# -- validation ------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class WindowViolation:
    path: tuple[str, ...]
    node: Timebound

    def __str__(self) -> str:
        where = "/".join(self.path) or "<root>"
        return f"Timebound at {where}: t0={self.node.t0} > t1={self.node.t1}"


def validate(p: Primitive) -> list[WindowViolation]:
    """Return every ill-ordered Timebound window with its path; empty means ok."""
    return [
        WindowViolation(path, node)
        for path, node in walk(p)
        if isinstance(node, Timebound) and node.t0 > node.t1
    ]

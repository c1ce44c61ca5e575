"""Recursive execution of primitive trees.

:func:`execute` is the ``exec`` function of the formal semantics: it runs a
primitive between an issuer and an owner and returns the updated balances,
the contracts generated by postponed ``Or``/``Timebound`` nodes, the next
fresh id and the extended ledger. It is all-or-nothing: on failure it raises
:class:`ExecutionFailed` and none of its inputs have changed.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Union

from .ast import And, Give, If, One, Or, Primitive, Scale, ScaleObs, Timebound, Zero

DEFAULT_FRESHNESS = 10

GatewayValue = Union[int, bool]
# (address, currency) -> signed amount; absent keys read as 0 and zero entries are dropped.
Balances = Mapping[tuple[str, str], int]


@dataclass(frozen=True, slots=True)
class TransferRecord:
    contract_id: int
    payer: str
    payee: str
    amount: int
    currency: str
    timestamp: int


@dataclass(frozen=True, slots=True)
class GatewayEntry:
    value: GatewayValue
    recorded_at: int

    def is_fresh(self, now: int, window: int) -> bool:
        return now - self.recorded_at <= window


@dataclass(frozen=True, slots=True)
class FindelContract:
    """A live contract ``[id, dsc_id, primitive, issuer, owner, proposed_owner, scale]``."""

    id: int
    dsc_id: int
    primitive: Primitive
    issuer: str
    owner: str
    proposed_owner: str
    scale: int = 1


@dataclass(frozen=True)
class ExecResult:
    balance: dict[tuple[str, str], int]
    generated: tuple[FindelContract, ...]
    fresh_id: int
    ledger: tuple[TransferRecord, ...]


class FailureReason(str, enum.Enum):
    EXPIRED = "Expired"
    GATEWAY_MISSING = "GatewayMissing"
    GATEWAY_STALE = "GatewayStale"
    GATEWAY_TYPE_MISMATCH = "GatewayTypeMismatch"


class ExecutionFailed(Exception):
    def __init__(self, reason: FailureReason, detail: str = ""):
        self.reason = reason
        self.detail = detail
        super().__init__(f"{reason.value}: {detail}" if detail else reason.value)


def is_gateway_value(value: object) -> bool:
    return isinstance(value, bool) or (isinstance(value, int) and value >= 0)


@dataclass
class _Run:
    """Private working copy threaded through one ``execute`` call."""

    c_id: int
    dsc_id: int
    now: int
    gateway: Mapping[str, GatewayEntry]
    freshness: int
    balance: dict[tuple[str, str], int]
    ledger: list[TransferRecord]
    fresh_id: int
    generated: list[FindelContract] = field(default_factory=list)

    def observe(self, address: str, kind: type) -> GatewayValue:
        entry = self.gateway.get(address)
        if entry is None:
            raise ExecutionFailed(FailureReason.GATEWAY_MISSING, address)
        if not entry.is_fresh(self.now, self.freshness):
            raise ExecutionFailed(
                FailureReason.GATEWAY_STALE,
                f"{address} recorded at {entry.recorded_at}, now {self.now}",
            )
        # bool is an int subclass, so test it explicitly in both directions
        if (kind is bool) != isinstance(entry.value, bool):
            raise ExecutionFailed(FailureReason.GATEWAY_TYPE_MISMATCH, address)
        return entry.value

    def transfer(self, payer: str, payee: str, amount: int, currency: str) -> None:
        if amount == 0:
            return
        for key, delta in (((payer, currency), -amount), ((payee, currency), amount)):
            value = self.balance.get(key, 0) + delta
            if value:
                self.balance[key] = value
            else:
                self.balance.pop(key, None)
        self.ledger.append(TransferRecord(self.c_id, payer, payee, amount, currency, self.now))

    def postpone(self, node: Primitive, scale: int, issuer: str, owner: str) -> None:
        self.generated.append(
            FindelContract(self.fresh_id, self.dsc_id, node, issuer, owner, owner, scale)
        )
        self.fresh_id += 1

    def run(self, p: Primitive, scale: int, issuer: str, owner: str) -> None:
        match p:
            case Zero():
                pass
            case One(currency=cur):
                self.transfer(issuer, owner, scale, cur)
            case Scale(k=k, sub=sub):
                self.run(sub, scale * k, issuer, owner)
            case ScaleObs(source=a, sub=sub):
                self.run(sub, scale * self.observe(a, int), issuer, owner)
            case Give(sub=sub):
                self.run(sub, scale, owner, issuer)
            case And(left=left, right=right):
                self.run(left, scale, issuer, owner)
                self.run(right, scale, issuer, owner)
            case Or():
                self.postpone(p, scale, issuer, owner)
            case If(source=a, then=then, else_=else_):
                self.run(then if self.observe(a, bool) else else_, scale, issuer, owner)
            case Timebound(t0=t0, t1=t1, sub=sub):
                if self.now > t1:
                    raise ExecutionFailed(FailureReason.EXPIRED, f"now {self.now} > {t1}")
                if t0 > self.now:
                    self.postpone(p, scale, issuer, owner)
                else:
                    self.run(sub, scale, issuer, owner)
            case _:
                raise TypeError(f"not a primitive: {p!r}")


def execute(
    p: Primitive,
    c_id: int,
    dsc_id: int,
    scale: int,
    issuer: str,
    owner: str,
    now: int,
    gateway: Mapping[str, GatewayEntry],
    balance: Balances,
    ledger: tuple[TransferRecord, ...] | list[TransferRecord],
    fresh_id: int,
    freshness_window: int = DEFAULT_FRESHNESS,
) -> ExecResult:
    """Execute ``p`` with ``issuer`` paying ``owner``.

    Raises:
        ExecutionFailed: an expired Timebound or a missing, stale or
            mistyped gateway entry anywhere in the executed part of the tree.
            Nothing is committed in that case.
    """
    run = _Run(c_id, dsc_id, now, gateway, freshness_window, dict(balance), list(ledger), fresh_id)
    run.run(p, scale, issuer, owner)
    return ExecResult(run.balance, tuple(run.generated), run.fresh_id, tuple(run.ledger))

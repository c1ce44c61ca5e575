"""The marketplace state machine.

A :class:`MarketplaceState` is an immutable snapshot of contracts,
descriptions, balances, time, gateway, fresh id, ledger and events. Every
transition is a function from a state to a new state; rejected transitions
raise a :class:`MarketError` and leave the caller's snapshot as it was.

There is deliberately no transition that lets an issuer cancel a contract:
live contracts only leave the marketplace through ``join``/``join_or``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Literal, Mapping, Union

from .ast import T_MAX, Or, Primitive
from .engine import (
    DEFAULT_FRESHNESS,
    ExecResult,
    ExecutionFailed,
    FindelContract,
    GatewayEntry,
    GatewayValue,
    TransferRecord,
    execute,
    is_gateway_value,
)


class MarketError(Exception):
    """A transition was rejected; the state is unchanged."""


class InvalidWindow(MarketError):
    pass


class UnknownDescription(MarketError):
    pass


class UnknownContract(MarketError):
    pass


class NotProposedOwner(MarketError):
    pass


class RootIsOr(MarketError):
    pass


class RootNotOr(MarketError):
    pass


class OutsideWindow(MarketError):
    pass


class InvalidGatewayValue(MarketError):
    pass


@dataclass(frozen=True, slots=True)
class Description:
    id: int
    primitive: Primitive
    valid_from: int = 0
    valid_until: int = T_MAX


@dataclass(frozen=True, slots=True)
class IssuedFor:
    proposed_owner: str
    contract_id: int


@dataclass(frozen=True, slots=True)
class Executed:
    contract_id: int


@dataclass(frozen=True, slots=True)
class Deleted:
    contract_id: int


Event = Union[IssuedFor, Executed, Deleted]

_EMPTY: Mapping = MappingProxyType({})


@dataclass(frozen=True)
class MarketplaceState:
    contracts: tuple[FindelContract, ...] = ()
    descriptions: tuple[Description, ...] = ()
    balances: Mapping[tuple[str, str], int] = _EMPTY
    time: int = 0
    gateway: Mapping[str, GatewayEntry] = _EMPTY
    fresh_id: int = 1
    ledger: tuple[TransferRecord, ...] = ()
    events: tuple[Event, ...] = ()  # newest first
    freshness_window: int = DEFAULT_FRESHNESS

    def contract(self, contract_id: int) -> FindelContract:
        for c in self.contracts:
            if c.id == contract_id:
                return c
        raise UnknownContract(f"no live contract with id {contract_id}")

    def description(self, dsc_id: int) -> Description:
        for d in self.descriptions:
            if d.id == dsc_id:
                return d
        raise UnknownDescription(f"no description with id {dsc_id}")

    def balance(self, party: str, currency: str) -> int:
        return self.balances.get((party, currency), 0)


def empty(freshness_window: int = DEFAULT_FRESHNESS) -> MarketplaceState:
    return MarketplaceState(freshness_window=freshness_window)


def register_description(
    state: MarketplaceState, primitive: Primitive, valid_from: int = 0, valid_until: int = T_MAX
) -> tuple[MarketplaceState, int]:
    if valid_from > valid_until:
        raise InvalidWindow(f"valid_from {valid_from} > valid_until {valid_until}")
    dsc_id = max((d.id for d in state.descriptions), default=0) + 1
    dsc = Description(dsc_id, primitive, valid_from, valid_until)
    return replace(state, descriptions=state.descriptions + (dsc,)), dsc_id


def issue(
    state: MarketplaceState, dsc_id: int, issuer: str, proposed_owner: str
) -> tuple[MarketplaceState, int]:
    """Offer a contract built from description ``dsc_id`` to ``proposed_owner``.

    The issuer is recorded as the current owner; no balance changes.
    """
    dsc = state.description(dsc_id)
    i = state.fresh_id
    contract = FindelContract(i, dsc.id, dsc.primitive, issuer, issuer, proposed_owner, 1)
    new = replace(
        state,
        contracts=state.contracts + (contract,),
        fresh_id=i + 1,
        events=(IssuedFor(proposed_owner, i),) + state.events,
    )
    return new, i


def _admit(state: MarketplaceState, contract_id: int, caller: str) -> FindelContract:
    contract = state.contract(contract_id)
    if caller != contract.proposed_owner:
        raise NotProposedOwner(
            f"{caller} is not the proposed owner {contract.proposed_owner} of contract {contract_id}"
        )
    return contract


def _check_window(state: MarketplaceState, contract: FindelContract) -> None:
    dsc = state.description(contract.dsc_id)
    if not dsc.valid_from <= state.time <= dsc.valid_until:
        raise OutsideWindow(
            f"time {state.time} outside [{dsc.valid_from}, {dsc.valid_until}] of description {dsc.id}"
        )


def _run(state: MarketplaceState, contract: FindelContract, primitive: Primitive, caller: str):
    remaining = tuple(c for c in state.contracts if c.id != contract.id)
    try:
        result: ExecResult = execute(
            primitive,
            contract.id,
            contract.dsc_id,
            contract.scale,
            contract.issuer,
            caller,
            state.time,
            state.gateway,
            state.balances,
            state.ledger,
            state.fresh_id,
            state.freshness_window,
        )
    except ExecutionFailed:
        return replace(state, contracts=remaining, events=(Deleted(contract.id),) + state.events)
    return replace(
        state,
        contracts=remaining + result.generated,
        balances=MappingProxyType(result.balance),
        fresh_id=result.fresh_id,
        ledger=result.ledger,
        events=(Executed(contract.id),) + state.events,
    )


def join(state: MarketplaceState, contract_id: int, caller: str) -> MarketplaceState:
    """Accept and immediately execute a contract.

    A failed execution deletes the contract (``Deleted`` event); the
    precondition errors below reject the call without touching anything.

    Raises:
        UnknownContract, NotProposedOwner, RootIsOr, OutsideWindow
    """
    contract = _admit(state, contract_id, caller)
    if isinstance(contract.primitive, Or):
        raise RootIsOr(f"contract {contract_id} has an Or root; use join_or")
    _check_window(state, contract)
    return _run(state, contract, contract.primitive, caller)


def join_or(
    state: MarketplaceState, contract_id: int, caller: str, choice: Literal["left", "right"]
) -> MarketplaceState:
    contract = _admit(state, contract_id, caller)
    root = contract.primitive
    if not isinstance(root, Or):
        raise RootNotOr(f"contract {contract_id} root is {type(root).__name__}, not Or")
    if choice not in ("left", "right"):
        raise ValueError(f"choice must be 'left' or 'right', got {choice!r}")
    _check_window(state, contract)
    return _run(state, contract, root.left if choice == "left" else root.right, caller)


def tick(state: MarketplaceState, n: int = 1) -> MarketplaceState:
    if n < 1:
        raise ValueError("tick count must be positive")
    return replace(state, time=state.time + n)


def set_gateway(state: MarketplaceState, address: str, value: GatewayValue) -> MarketplaceState:
    """Record ``value`` at ``address`` stamped with the current time."""
    if not is_gateway_value(value):
        raise InvalidGatewayValue(f"gateway values are naturals or booleans, got {value!r}")
    gateway = dict(state.gateway)
    gateway[address] = GatewayEntry(value, state.time)
    return replace(state, gateway=MappingProxyType(gateway))


@dataclass(frozen=True)
class MarketView:
    time: int
    balances: Mapping[tuple[str, str], int]
    contracts: tuple[FindelContract, ...]
    ledger: tuple[TransferRecord, ...]
    events: tuple[Event, ...]
    events_chronological: tuple[Event, ...] = field(init=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "events_chronological", tuple(reversed(self.events)))


def query(state: MarketplaceState) -> MarketView:
    return MarketView(state.time, state.balances, state.contracts, state.ledger, state.events)


# name -> transition, used by trace replay and the scenario runner
TRANSITIONS = {
    "register": register_description,
    "issue": issue,
    "join": join,
    "join_or": join_or,
    "tick": tick,
    "set_gateway": set_gateway,
}

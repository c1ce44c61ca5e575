"""Brute-force consistency checks for marketplace states and traces.

Everything here is written independently of the engine: the ledger replay
is its own fold, and trace checking recomputes each transition from the
recorded arguments. Violations are returned, never raised or logged.
"""

from __future__ import annotations

import enum
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from . import marketplace
from .ast import And, Give, If, One, Or, Primitive, Scale, ScaleObs, Timebound, Zero
from .engine import TransferRecord
from .marketplace import Deleted, Executed, MarketError, MarketplaceState


class Kind(str, enum.Enum):
    DUPLICATE_ID = "DuplicateId"
    STALE_FRESH_ID = "StaleFreshId"
    DANGLING_DESCRIPTION = "DanglingDescription"
    LEDGER_MISMATCH = "LedgerMismatch"
    EVENT_DANGLING = "EventDangling"
    TIME_REGRESSION = "TimeRegression"
    CONTRACT_WITHDRAWN = "ContractWithdrawn"
    STEP_MISMATCH = "StepMismatch"


@dataclass(frozen=True)
class Violation:
    kind: Kind
    detail: str
    at_step: int  # 0 is the initial state, k the state after the k-th step

    def __str__(self) -> str:
        return f"[step {self.at_step}] {self.kind.value}: {self.detail}"


@dataclass(frozen=True)
class Step:
    op: str
    args: Mapping[str, Any]
    state: MarketplaceState
    outcome: str = "ok"  # or the name of the rejecting MarketError


@dataclass(frozen=True)
class Trace:
    initial: MarketplaceState
    steps: tuple[Step, ...] = ()

    def states(self) -> list[MarketplaceState]:
        return [self.initial] + [s.state for s in self.steps]


def replay_ledger(ledger: Iterable[TransferRecord]) -> dict[tuple[str, str], int]:
    """Balances obtained by folding the ledger over an all-zero table."""
    totals: defaultdict[tuple[str, str], int] = defaultdict(int)
    for rec in ledger:
        totals[rec.payer, rec.currency] -= rec.amount
        totals[rec.payee, rec.currency] += rec.amount
    return {key: amount for key, amount in totals.items() if amount != 0}


def check_state(state: MarketplaceState, at_step: int = 0) -> list[Violation]:
    out: list[Violation] = []

    def flag(kind: Kind, detail: str) -> None:
        out.append(Violation(kind, detail, at_step))

    ids = Counter(c.id for c in state.contracts)
    for cid, n in sorted(ids.items()):
        if n > 1:
            flag(Kind.DUPLICATE_ID, f"contract id {cid} appears {n} times")
    dsc_ids = Counter(d.id for d in state.descriptions)
    for did, n in sorted(dsc_ids.items()):
        if n > 1:
            flag(Kind.DUPLICATE_ID, f"description id {did} appears {n} times")

    for c in state.contracts:
        if c.id >= state.fresh_id:
            flag(Kind.STALE_FRESH_ID, f"fresh id {state.fresh_id} does not exceed contract id {c.id}")
        if c.dsc_id not in dsc_ids:
            flag(Kind.DANGLING_DESCRIPTION, f"contract {c.id} refers to missing description {c.dsc_id}")

    expected = replay_ledger(state.ledger)
    actual = {k: v for k, v in state.balances.items() if v != 0}
    if expected != actual:
        diff = sorted(
            (k, expected.get(k, 0), actual.get(k, 0))
            for k in expected.keys() | actual.keys()
            if expected.get(k, 0) != actual.get(k, 0)
        )
        flag(Kind.LEDGER_MISMATCH, f"replayed vs stored (key, ledger, balance): {diff}")

    finished: Counter[int] = Counter()
    for ev in state.events:
        if ev.contract_id >= state.fresh_id:
            flag(Kind.EVENT_DANGLING, f"{ev} refers to an id never allocated")
        if isinstance(ev, (Executed, Deleted)):
            finished[ev.contract_id] += 1
            if ev.contract_id in ids:
                flag(Kind.EVENT_DANGLING, f"{ev} but contract {ev.contract_id} is still live")
    for cid, n in sorted(finished.items()):
        if n > 1:
            flag(Kind.EVENT_DANGLING, f"contract {cid} finished {n} times")
    return out


def apply(state: MarketplaceState, op: str, args: Mapping[str, Any]) -> tuple[MarketplaceState, str]:
    """Run one named transition; rejections return the unchanged state and the error name."""
    try:
        result = marketplace.TRANSITIONS[op](state, **args)
    except MarketError as exc:
        return state, type(exc).__name__
    if isinstance(result, tuple):
        result = result[0]
    return result, "ok"


def check_trace(trace: Trace) -> list[Violation]:
    out = check_state(trace.initial, 0)
    prev = trace.initial
    for k, step in enumerate(trace.steps, start=1):
        new = step.state
        out.extend(check_state(new, k))

        def flag(kind: Kind, detail: str) -> None:
            out.append(Violation(kind, detail, k))

        recomputed, _ = apply(prev, step.op, step.args)
        if recomputed != new:
            flag(Kind.STEP_MISMATCH, f"{step.op}{dict(step.args)} does not produce the recorded state")

        if new.time < prev.time:
            flag(Kind.TIME_REGRESSION, f"time went from {prev.time} to {new.time}")
        elif step.op != "tick" and new.time != prev.time:
            flag(Kind.TIME_REGRESSION, f"{step.op} changed time from {prev.time} to {new.time}")

        if new.fresh_id < prev.fresh_id:
            flag(Kind.STALE_FRESH_ID, f"fresh id went from {prev.fresh_id} to {new.fresh_id}")

        if new.ledger[: len(prev.ledger)] != prev.ledger:
            flag(Kind.LEDGER_MISMATCH, "ledger is not an extension of the previous ledger")

        kept = len(new.events) - len(prev.events)
        if kept < 0 or new.events[kept:] != prev.events:
            flag(Kind.EVENT_DANGLING, "event list is not an extension of the previous list")

        gone = {c.id for c in prev.contracts} - {c.id for c in new.contracts}
        joined = {step.args.get("contract_id")} if step.op in ("join", "join_or") else set()
        for cid in sorted(gone - joined):
            flag(Kind.CONTRACT_WITHDRAWN, f"contract {cid} vanished during {step.op}")
        prev = new
    return out


# -- random generation ---------------------------------------------------

@dataclass(frozen=True)
class Universe:
    parties: tuple[str, ...] = ("alice", "bob", "carol")
    currencies: tuple[str, ...] = ("USD", "EUR")
    numeric_sources: tuple[str, ...] = ("rate",)
    boolean_sources: tuple[str, ...] = ("flag",)
    max_tree_depth: int = 4
    invalid_rate: float = 0.2
    freshness_window: int = 10
    op_weights: Mapping[str, float] = field(
        default_factory=lambda: {
            "register": 0.12,
            "issue": 0.22,
            "join": 0.33,
            "tick": 0.18,
            "set_gateway": 0.15,
        }
    )


def random_primitive(rng: random.Random, max_depth: int, universe: Universe = Universe(), now: int = 0) -> Primitive:
    """A random tree of depth at most ``max_depth`` with timestamps near ``now``."""
    if max_depth <= 1 or rng.random() < 0.25:
        return One(rng.choice(universe.currencies)) if rng.random() < 0.75 else Zero()

    def sub() -> Primitive:
        return random_primitive(rng, max_depth - 1, universe, now)

    kind = rng.randrange(8)
    if kind == 0:
        return Scale(rng.randint(1, 12) if rng.random() < 0.9 else 0, sub())
    if kind == 1:
        return ScaleObs(rng.choice(universe.numeric_sources), sub())
    if kind == 2:
        return Give(sub())
    if kind == 3:
        return And(sub(), sub())
    if kind == 4:
        return Or(sub(), sub())
    if kind == 5:
        return If(rng.choice(universe.boolean_sources), sub(), sub())
    t0 = max(0, now + rng.randint(-8, 8))
    t1 = t0 + rng.randint(0, 12)
    if rng.random() < 0.05:
        t1 = max(0, t0 - rng.randint(1, 3))  # ill-ordered window
    return Timebound(t0, t1, sub())


def random_trace(seed: int, depth: int, universe: Universe = Universe()) -> Trace:
    """Deterministic random sequence of ``depth`` transitions from the empty marketplace.

    About ``universe.invalid_rate`` of the steps use arguments chosen to be
    rejected (wrong caller, unknown id, bad window, Or via plain join, ...).
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    rng = random.Random(seed)
    initial = marketplace.empty(universe.freshness_window)
    state = initial
    steps: list[Step] = []
    ops = list(universe.op_weights)
    weights = list(universe.op_weights.values())
    for _ in range(depth):
        op, args = _draw(rng, state, universe, rng.choices(ops, weights)[0])
        state, outcome = apply(state, op, args)
        steps.append(Step(op, args, state, outcome))
    return Trace(initial, tuple(steps))


def _draw(rng: random.Random, state: MarketplaceState, u: Universe, op: str) -> tuple[str, dict]:
    invalid = rng.random() < u.invalid_rate
    now = state.time
    if op == "issue" and not state.descriptions:
        op = "register"
    if op == "join" and not state.contracts:
        op = "issue" if state.descriptions else "register"
        if op == "register":
            invalid = False

    if op == "register":
        primitive = random_primitive(rng, u.max_tree_depth, u, now)
        if invalid:
            lo = now + rng.randint(1, 5)
            return op, {"primitive": primitive, "valid_from": lo, "valid_until": lo - rng.randint(1, 5)}
        if rng.random() < 0.8:
            return op, {"primitive": primitive}
        lo = max(0, now - rng.randint(0, 5))
        return op, {"primitive": primitive, "valid_from": lo, "valid_until": lo + rng.randint(0, 20)}

    if op == "issue":
        issuer, owner = rng.sample(u.parties, 2)
        dsc_id = rng.choice(state.descriptions).id
        if invalid:
            dsc_id = max(d.id for d in state.descriptions) + rng.randint(1, 3)
        return op, {"dsc_id": dsc_id, "issuer": issuer, "proposed_owner": owner}

    if op == "join":
        contract = rng.choice(state.contracts)
        caller = contract.proposed_owner
        is_or = isinstance(contract.primitive, Or)
        if invalid:
            mode = rng.randrange(3)
            if mode == 0:
                caller = rng.choice([p for p in u.parties if p != caller] or ["mallory"])
            elif mode == 1:
                return "join", {"contract_id": state.fresh_id + rng.randint(0, 3), "caller": caller}
            else:
                # wrong join flavour for the root
                if is_or:
                    return "join", {"contract_id": contract.id, "caller": caller}
                return "join_or", {"contract_id": contract.id, "caller": caller, "choice": "left"}
        if is_or:
            choice = rng.choice(("left", "right"))
            return "join_or", {"contract_id": contract.id, "caller": caller, "choice": choice}
        return "join", {"contract_id": contract.id, "caller": caller}

    if op == "tick":
        return op, {"n": rng.choice((1, 1, 2, 3, 5, 8))}

    if op == "set_gateway":
        if invalid:
            return op, {"address": rng.choice(u.numeric_sources), "value": -rng.randint(1, 5)}
        if rng.random() < 0.5:
            return op, {"address": rng.choice(u.numeric_sources), "value": rng.randint(0, 6)}
        return op, {"address": rng.choice(u.boolean_sources), "value": rng.random() < 0.5}

    raise ValueError(f"unknown operation {op!r}")


"""Line-oriented scenario files that drive a marketplace and check assertions.

One command per line, ``#`` starts a comment::

    desc <label> = <findel-expr> [window <t0> <t1>]
    issue <issuer> for <owner> <label> as <clabel>
    join <party> @<clabel>
    joinor <party> @<clabel> <left|right>
    tick <n|Nyr>
    gateway <addr> = <number|true|false>
    assert balance <party> <CUR> <signed-int>
    assert event <issuedfor|executed|deleted> @<clabel>
    assert <live|gone> @<clabel>
    expect <error-name>: <command>

Contracts generated while executing ``@c`` are bound to ``@c.gen0``,
``@c.gen1``, ... in generation order. ``Nyr`` (e.g. ``1yr``) may be used for
any time literal, including inside Findel expressions.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from typing import Union

from . import marketplace, oracle
from .marketplace import Deleted, Executed, IssuedFor, MarketError, MarketplaceState
from .parser import DEFAULT_DELTA, ParseError, parse

DEFAULT_YEAR = 365

ERROR_NAMES = frozenset(
    cls.__name__
    for cls in (
        marketplace.InvalidWindow,
        marketplace.UnknownDescription,
        marketplace.UnknownContract,
        marketplace.NotProposedOwner,
        marketplace.RootIsOr,
        marketplace.RootNotOr,
        marketplace.OutsideWindow,
        marketplace.InvalidGatewayValue,
    )
)
EVENT_KINDS = {"issuedfor": IssuedFor, "executed": Executed, "deleted": Deleted}

_YEARS_RE = re.compile(r"\b(\d*)yr\b")
_NAME = r"[A-Za-z0-9_][A-Za-z0-9_.:\-]*"
_LABEL = r"[A-Za-z_][A-Za-z0-9_]*"
_CLABEL = rf"{_LABEL}(?:\.gen\d+)*"
_TIME = r"\d+|\d*yr"


class ScenarioParseError(ValueError):
    def __init__(self, message: str, line: int, column: int = 1):
        self.message = message
        self.line = line
        self.column = column
        super().__init__(f"line {line}:{column}: {message}")


@dataclass(frozen=True)
class DescCmd:
    label: str
    text: str
    window: tuple[str, str] | None = None


@dataclass(frozen=True)
class IssueCmd:
    issuer: str
    proposed_owner: str
    dsc_label: str
    label: str


@dataclass(frozen=True)
class JoinCmd:
    caller: str
    label: str


@dataclass(frozen=True)
class JoinOrCmd:
    caller: str
    label: str
    choice: str


@dataclass(frozen=True)
class TickCmd:
    n: str


@dataclass(frozen=True)
class GatewayCmd:
    address: str
    value: Union[int, bool]


@dataclass(frozen=True)
class AssertBalanceCmd:
    party: str
    currency: str
    expected: int


@dataclass(frozen=True)
class AssertEventCmd:
    kind: str
    label: str


@dataclass(frozen=True)
class AssertLiveCmd:
    label: str
    live: bool


@dataclass(frozen=True)
class ExpectErrorCmd:
    error: str
    command: Command


Command = Union[
    DescCmd, IssueCmd, JoinCmd, JoinOrCmd, TickCmd, GatewayCmd,
    AssertBalanceCmd, AssertEventCmd, AssertLiveCmd, ExpectErrorCmd,
]


@dataclass(frozen=True)
class Line:
    number: int
    source: str
    command: Command


# -- parsing ------------------------------------------------------------------

_PATTERNS: list[tuple[re.Pattern, str]] = [
    (re.compile(rf"desc\s+(?P<label>{_LABEL})\s*=\s*(?P<expr>.+?)"
                rf"(?:\s+window\s+(?P<t0>{_TIME})\s+(?P<t1>{_TIME}))?"), "desc"),
    (re.compile(rf"issue\s+(?P<issuer>{_NAME})\s+for\s+(?P<owner>{_NAME})\s+"
                rf"(?P<dsc>{_LABEL})\s+as\s+(?P<label>{_LABEL})"), "issue"),
    (re.compile(rf"join\s+(?P<caller>{_NAME})\s+@(?P<label>{_CLABEL})"), "join"),
    (re.compile(rf"joinor\s+(?P<caller>{_NAME})\s+@(?P<label>{_CLABEL})\s+(?P<choice>left|right)"), "joinor"),
    (re.compile(rf"tick\s+(?P<n>{_TIME})"), "tick"),
    (re.compile(rf"gateway\s+(?P<addr>{_NAME})\s*=\s*(?P<value>\S+)"), "gateway"),
    (re.compile(rf"assert\s+balance\s+(?P<party>{_NAME})\s+(?P<cur>[A-Z]{{1,8}})\s+(?P<amount>[+-]?\d+)"), "balance"),
    (re.compile(rf"assert\s+event\s+(?P<kind>issuedfor|executed|deleted)\s+@(?P<label>{_CLABEL})"), "event"),
    (re.compile(rf"assert\s+(?P<state>live|gone)\s+@(?P<label>{_CLABEL})"), "live"),
]
_EXPECT_RE = re.compile(r"expect\s+(?P<error>[A-Za-z]+)\s*:\s*(?P<rest>.+)")


def expand_years(text: str, year_length: int) -> str:
    return _YEARS_RE.sub(lambda m: str(int(m.group(1) or 1) * year_length), text)


def _time(text: str, year_length: int) -> int:
    return int(expand_years(text, year_length))


def _parse_command(body: str, lineno: int, column: int) -> Command:
    m = _EXPECT_RE.fullmatch(body)
    if m:
        if m.group("error") not in ERROR_NAMES:
            raise ScenarioParseError(
                f"unknown error name {m.group('error')!r}; expected one of {', '.join(sorted(ERROR_NAMES))}",
                lineno, column,
            )
        inner = _parse_command(m.group("rest"), lineno, column + m.start("rest"))
        if isinstance(inner, ExpectErrorCmd):
            raise ScenarioParseError("expect cannot be nested", lineno, column)
        return ExpectErrorCmd(m.group("error"), inner)

    for pattern, kind in _PATTERNS:
        m = pattern.fullmatch(body)
        if not m:
            continue
        g = m.groupdict()
        if kind == "desc":
            text = g["expr"].strip()
            try:
                parse(expand_years(text, DEFAULT_YEAR))
            except ParseError as exc:
                raise ScenarioParseError(
                    f"bad Findel expression: {exc.message}", lineno, column + m.start("expr") + exc.column - 1
                ) from None
            window = (g["t0"], g["t1"]) if g["t0"] is not None else None
            return DescCmd(g["label"], text, window)
        if kind == "issue":
            return IssueCmd(g["issuer"], g["owner"], g["dsc"], g["label"])
        if kind == "join":
            return JoinCmd(g["caller"], g["label"])
        if kind == "joinor":
            return JoinOrCmd(g["caller"], g["label"], g["choice"])
        if kind == "tick":
            return TickCmd(g["n"])
        if kind == "gateway":
            raw = g["value"]
            if raw in ("true", "false"):
                return GatewayCmd(g["addr"], raw == "true")
            if not re.fullmatch(r"[+-]?\d+", raw):
                raise ScenarioParseError(f"gateway value must be an integer or true/false, got {raw!r}",
                                         lineno, column + m.start("value"))
            return GatewayCmd(g["addr"], int(raw))
        if kind == "balance":
            return AssertBalanceCmd(g["party"], g["cur"], int(g["amount"]))
        if kind == "event":
            return AssertEventCmd(g["kind"], g["label"])
        return AssertLiveCmd(g["label"], g["state"] == "live")
    keyword = body.split()[0]
    raise ScenarioParseError(f"unrecognised command {keyword!r}", lineno, column)


def _labels_used(cmd: Command) -> tuple[list[str], list[str]]:
    """(description labels, contract base labels) referenced by ``cmd``."""
    if isinstance(cmd, ExpectErrorCmd):
        return _labels_used(cmd.command)
    if isinstance(cmd, IssueCmd):
        return [cmd.dsc_label], []
    if isinstance(cmd, (JoinCmd, JoinOrCmd, AssertEventCmd, AssertLiveCmd)):
        return [], [cmd.label.split(".")[0]]
    return [], []


def _binds(cmd: Command) -> tuple[str | None, str | None]:
    if isinstance(cmd, ExpectErrorCmd):
        return _binds(cmd.command)
    if isinstance(cmd, DescCmd):
        return cmd.label, None
    if isinstance(cmd, IssueCmd):
        return None, cmd.label
    return None, None


def parse_scenario(text: str) -> list[Line]:
    """Parse a scenario file; labels must be bound before they are used.

    Raises:
        ScenarioParseError: positioned at the offending line and column.
    """
    lines: list[Line] = []
    descs: set[str] = set()
    contracts: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0]
        stripped = body.strip()
        if not stripped:
            continue
        column = len(body) - len(body.lstrip()) + 1
        cmd = _parse_command(stripped, lineno, column)
        used_d, used_c = _labels_used(cmd)
        for label in used_d:
            if label not in descs:
                raise ScenarioParseError(f"description label {label!r} used before definition", lineno, column)
        for label in used_c:
            if label not in contracts:
                raise ScenarioParseError(f"contract label @{label} used before it is bound", lineno, column)
        d, c = _binds(cmd)
        if d:
            descs.add(d)
        if c:
            contracts.add(c)
        lines.append(Line(lineno, stripped, cmd))
    return lines


# -- running ------------------------------------------------------------------

def state_digest(state: MarketplaceState) -> str:
    canonical = repr((
        state.contracts,
        state.descriptions,
        sorted(state.balances.items()),
        state.time,
        sorted(state.gateway.items()),
        state.fresh_id,
        state.ledger,
        state.events,
    ))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class StepReport:
    command: str
    outcome: str
    state_digest: str


@dataclass
class TraceReport:
    steps: list[StepReport] = field(default_factory=list)
    failures: list[str] = field(default_factory=list)

    @property
    def verdict(self) -> str:
        return "fail" if self.failures else "pass"

    def to_json(self) -> dict:
        return {
            "steps": [
                {"command": s.command, "outcome": s.outcome, "state_digest": s.state_digest}
                for s in self.steps
            ],
            "verdict": self.verdict,
            "failures": list(self.failures),
        }

    def to_text(self) -> str:
        width = max((len(s.command) for s in self.steps), default=0)
        out = [f"{i:>3}  {s.command:<{width}}  -> {s.outcome}  [{s.state_digest}]"
               for i, s in enumerate(self.steps, start=1)]
        out.append(f"verdict: {self.verdict}")
        out.extend(f"  FAIL {f}" for f in self.failures)
        return "\n".join(out)


class _Unresolved(Exception):
    pass


class _Runner:
    def __init__(self, delta: int, freshness_window: int, year_length: int):
        self.delta = delta
        self.year = year_length
        self.state = marketplace.empty(freshness_window)
        self.descs: dict[str, int] = {}
        self.contracts: dict[str, int] = {}

    def resolve(self, label: str) -> int:
        try:
            return self.contracts[label]
        except KeyError:
            raise _Unresolved(f"@{label} is not bound to a contract") from None

    def apply(self, cmd: Command) -> str:
        """Perform a mutating command; MarketError propagates."""
        s = self.state
        if isinstance(cmd, DescCmd):
            primitive = parse(expand_years(cmd.text, self.year), self.delta)
            window = {}
            if cmd.window:
                window = {"valid_from": _time(cmd.window[0], self.year),
                          "valid_until": _time(cmd.window[1], self.year)}
            self.state, dsc_id = marketplace.register_description(s, primitive, **window)
            self.descs[cmd.label] = dsc_id
            return f"description {dsc_id}"
        if isinstance(cmd, IssueCmd):
            self.state, cid = marketplace.issue(s, self.descs[cmd.dsc_label], cmd.issuer, cmd.proposed_owner)
            self.contracts[cmd.label] = cid
            return f"contract {cid}"
        if isinstance(cmd, (JoinCmd, JoinOrCmd)):
            cid = self.resolve(cmd.label)
            if isinstance(cmd, JoinCmd):
                new = marketplace.join(s, cid, cmd.caller)
            else:
                new = marketplace.join_or(s, cid, cmd.caller, cmd.choice)
            before = {c.id for c in s.contracts}
            generated = [c.id for c in new.contracts if c.id not in before]
            for i, gid in enumerate(generated):
                self.contracts[f"{cmd.label}.gen{i}"] = gid
            self.state = new
            if isinstance(new.events[0], Deleted):
                return "deleted"
            return f"executed, generated {generated}" if generated else "executed"
        if isinstance(cmd, TickCmd):
            n = _time(cmd.n, self.year)
            self.state = marketplace.tick(s, n)
            return f"time {self.state.time}"
        if isinstance(cmd, GatewayCmd):
            self.state = marketplace.set_gateway(s, cmd.address, cmd.value)
            return f"{cmd.address} = {cmd.value} @ {s.time}"
        raise TypeError(cmd)

    def check(self, cmd: Command) -> str | None:
        """Evaluate an assertion; returns a failure message or None."""
        s = self.state
        if isinstance(cmd, AssertBalanceCmd):
            actual = s.balance(cmd.party, cmd.currency)
            if actual != cmd.expected:
                return f"balance {cmd.party} {cmd.currency}: expected {cmd.expected:+d}, got {actual:+d}"
            return None
        cid = self.resolve(cmd.label)
        if isinstance(cmd, AssertEventCmd):
            kind = EVENT_KINDS[cmd.kind]
            if not any(isinstance(e, kind) and e.contract_id == cid for e in s.events):
                return f"no {kind.__name__} event for @{cmd.label} (contract {cid})"
            return None
        live = any(c.id == cid for c in s.contracts)
        if live != cmd.live:
            return f"@{cmd.label} (contract {cid}) is {'live' if live else 'gone'}"
        return None


_ASSERTIONS = (AssertBalanceCmd, AssertEventCmd, AssertLiveCmd)


def run_scenario(
    lines: list[Line],
    delta: int = DEFAULT_DELTA,
    freshness_window: int = marketplace.DEFAULT_FRESHNESS,
    year_length: int = DEFAULT_YEAR,
) -> TraceReport:
    """Execute parsed commands from the empty marketplace.

    Never raises for scenario-level problems: failed assertions, unexpected
    rejections and consistency violations all land in ``report.failures``.
    """
    runner = _Runner(delta, freshness_window, year_length)
    report = TraceReport()
    for line in lines:
        cmd = line.command
        where = f"line {line.number}"
        try:
            if isinstance(cmd, _ASSERTIONS):
                problem = runner.check(cmd)
                outcome = "ok" if problem is None else f"FAILED: {problem}"
                if problem:
                    report.failures.append(f"{where}: {problem}")
            elif isinstance(cmd, ExpectErrorCmd):
                try:
                    result = runner.apply(cmd.command)
                except MarketError as exc:
                    got = type(exc).__name__
                    if got == cmd.error:
                        outcome = f"rejected as expected: {got}"
                    else:
                        outcome = f"FAILED: rejected with {got}"
                        report.failures.append(f"{where}: expected {cmd.error}, got {got}: {exc}")
                else:
                    outcome = f"FAILED: succeeded ({result})"
                    report.failures.append(f"{where}: expected {cmd.error}, but the command succeeded")
            else:
                try:
                    outcome = runner.apply(cmd)
                except MarketError as exc:
                    outcome = f"REJECTED: {type(exc).__name__}"
                    report.failures.append(f"{where}: {type(exc).__name__}: {exc}")
        except _Unresolved as exc:
            outcome = f"FAILED: {exc}"
            report.failures.append(f"{where}: {exc}")
        if not isinstance(cmd, _ASSERTIONS):
            for v in oracle.check_state(runner.state, len(report.steps) + 1):
                report.failures.append(f"{where}: consistency violation {v}")
        report.steps.append(StepReport(line.source, outcome, state_digest(runner.state)))
    return report


def run_text(text: str, **config) -> TraceReport:
    return run_scenario(parse_scenario(text), **config)


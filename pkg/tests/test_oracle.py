import ast as pyast
import inspect
from dataclasses import replace

import pytest

from findel import marketplace as mk, oracle
from findel.ast import And, Give, One, Scale
from findel.engine import FindelContract, TransferRecord
from findel.oracle import Kind, Step, Trace, check_state, check_trace, random_trace, replay_ledger

FRCE = And(Give(Scale(11, One("USD"))), Scale(10, One("EUR")))


def test_replay_empty():
    assert replay_ledger([]) == {}


def test_replay_frce():
    led = [TransferRecord(1, "bob", "alice", 11, "USD", 0), TransferRecord(1, "alice", "bob", 10, "EUR", 0)]
    assert replay_ledger(led) == {
        ("alice", "USD"): 11, ("alice", "EUR"): -10, ("bob", "USD"): -11, ("bob", "EUR"): 10,
    }


def test_replay_is_independent_of_engine():
    tree = pyast.parse(inspect.getsource(oracle.replay_ledger))
    names = {n.id for n in pyast.walk(tree) if isinstance(n, pyast.Name)}
    attrs = {n.attr for n in pyast.walk(tree) if isinstance(n, pyast.Attribute)}
    assert not (names | attrs) & {"execute", "_Run", "transfer", "engine", "marketplace"}


def test_check_fresh_state():
    assert check_state(mk.empty()) == []


def test_duplicate_id_detected():
    s, _ = mk.register_description(mk.empty(), FRCE)
    c = FindelContract(3, 1, FRCE, "a", "a", "b")
    s = replace(s, contracts=(c, c), fresh_id=4)
    assert [v.kind for v in check_state(s)] == [Kind.DUPLICATE_ID]


def frce_trace():
    s0 = mk.empty()
    s1, _ = mk.register_description(s0, FRCE)
    s2, cid = mk.issue(s1, 1, "alice", "bob")
    s3 = mk.join(s2, cid, "bob")
    return Trace(s0, (
        Step("register", {"primitive": FRCE}, s1),
        Step("issue", {"dsc_id": 1, "issuer": "alice", "proposed_owner": "bob"}, s2),
        Step("join", {"contract_id": cid, "caller": "bob"}, s3),
    ))


def test_known_good_trace():
    assert check_trace(frce_trace()) == []


def test_corrupted_middle_state():
    tr = frce_trace()
    bad = replace(tr.steps[1].state, time=5)
    steps = list(tr.steps)
    steps[1] = replace(steps[1], state=bad)
    found = check_trace(Trace(tr.initial, tuple(steps)))
    assert found and {v.at_step for v in found} >= {2}
    assert Kind.TIME_REGRESSION in {v.kind for v in found if v.at_step == 2}


def test_random_trace_shape():
    assert random_trace(1, 0).steps == ()
    assert random_trace(7, 30) == random_trace(7, 30)
    assert random_trace(7, 30) != random_trace(8, 30)
    with pytest.raises(ValueError):
        random_trace(1, -1)


def test_random_trace_seed_42():
    assert check_trace(random_trace(42, 50)) == []


def test_every_prefix_of_long_trace_consistent():
    tr = random_trace(3, 200)
    for k, state in enumerate(tr.states()):
        assert check_state(state, k) == []


def test_random_trace_mixes_invalid_steps():
    outcomes = [s.outcome for seed in range(50) for s in random_trace(seed, 50).steps]
    rejected = sum(o != "ok" for o in outcomes) / len(outcomes)
    assert 0.1 < rejected < 0.35


def test_rejected_steps_leave_state():
    tr = random_trace(5, 50)
    prev = tr.initial
    for step in tr.steps:
        if step.outcome != "ok":
            assert step.state is prev
        prev = step.state

import json
from pathlib import Path

import pytest

from findel.ast import And, Give, One, Scale
from findel.cli import main
from findel.scenario import (
    DescCmd, ExpectErrorCmd, JoinCmd, ScenarioParseError, TickCmd, parse_scenario, run_text,
)

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
FRCE_DESC = "desc frce = And(Give(Scale(11, One(USD))), Scale(10, One(EUR)))"


def test_parse_tick():
    [line] = parse_scenario("tick 5")
    assert line.command == TickCmd("5")


def test_parse_desc():
    [line] = parse_scenario(FRCE_DESC)
    assert line.command == DescCmd("frce", "And(Give(Scale(11, One(USD))), Scale(10, One(EUR)))")


def test_parse_desc_window_and_expect():
    lines = parse_scenario("desc d = Zero window 0 1yr\nissue a for b d as c\nexpect RootIsOr: join b @c")
    assert lines[0].command.window == ("0", "1yr")
    assert lines[2].command == ExpectErrorCmd("RootIsOr", JoinCmd("b", "c"))


def test_unbound_label():
    with pytest.raises(ScenarioParseError) as info:
        parse_scenario("join bob @frce")
    assert info.value.line == 1


@pytest.mark.parametrize("text, line", [
    ("tick", 1),
    ("# c\nfrobnicate 3", 2),
    ("desc x = Scale(, One(USD))", 1),
    ("gateway r = 1.5", 1),
    ("expect Bogus: tick 1", 1),
    ("issue a for b nodesc as c", 1),
])
def test_parse_errors(text, line):
    with pytest.raises(ScenarioParseError) as info:
        parse_scenario(text)
    assert info.value.line == line


def test_desc_error_column_points_into_expression():
    with pytest.raises(ScenarioParseError) as info:
        parse_scenario("desc x = Scale(, One(USD))")
    assert info.value.column == len("desc x = Scale(") + 1


def test_frce_scenario_passes():
    report = run_text((SCENARIOS / "frce.scn").read_text())
    assert report.verdict == "pass", report.failures


def test_zcb_without_claim_fails():
    report = run_text((SCENARIOS / "zcb_no_guarantee.scn").read_text())
    assert report.verdict == "fail"
    assert "expected +11, got -10" in report.failures[0]


@pytest.mark.parametrize("name", ["frce", "ext", "ext_stale", "zcb", "zcb_unclaimed"])
def test_shipped_scenarios_pass(name):
    report = run_text((SCENARIOS / f"{name}.scn").read_text())
    assert report.verdict == "pass", report.failures


def test_generated_labels_nest():
    text = """
desc d = Or(Or(One(USD), Zero), Zero)
issue alice for bob d as c
joinor bob @c left
joinor bob @c.gen0 left
assert balance bob USD 1
assert gone @c.gen0
"""
    report = run_text(text)
    assert report.verdict == "pass", report.failures


def test_expect_mismatch_and_unbound_generated_label_are_failures():
    text = f"""
{FRCE_DESC}
issue alice for bob frce as c
expect NotProposedOwner: join bob @c
join bob @c.gen3
"""
    report = run_text(text)
    assert report.verdict == "fail"
    assert len(report.failures) == 2


def test_unexpected_rejection_is_failure():
    report = run_text(f"{FRCE_DESC}\nissue alice for bob frce as c\njoin carol @c")
    assert report.failures and "NotProposedOwner" in report.failures[0]


def test_config_changes_window():
    text = """
desc z = And(Give(Scale(10, One(USD))), At(1yr, Scale(11, One(USD))))
issue alice for bob z as c
join bob @c
tick 1yr
tick 5
join bob @c.gen0
assert event executed @c.gen0
"""
    assert run_text(text, delta=30).verdict == "pass"
    assert run_text(text, delta=2).verdict == "fail"
    assert run_text(text, delta=2, year_length=100).verdict == "fail"


def test_report_json_schema_and_determinism():
    text = (SCENARIOS / "zcb.scn").read_text()
    a, b = run_text(text).to_json(), run_text(text).to_json()
    assert a == b
    assert set(a) == {"steps", "verdict", "failures"}
    assert set(a["steps"][0]) == {"command", "outcome", "state_digest"}


def test_cli_exit_codes(capsys):
    assert main(["run", str(SCENARIOS / "frce.scn")]) == 0
    assert "verdict: pass" in capsys.readouterr().out
    assert main(["run", str(SCENARIOS / "zcb_no_guarantee.scn"), "--format", "json"]) == 1
    out = json.loads(capsys.readouterr().out)
    assert out["verdict"] == "fail"


def test_cli_parse_error_exit(tmp_path, capsys):
    f = tmp_path / "bad.scn"
    f.write_text("join bob @x\n")
    assert main(["run", str(f)]) == 2
    assert "bad.scn:1:1" in capsys.readouterr().err


def test_cli_parse_command(capsys):
    assert main(["parse", "At(100, One(USD))", "--delta", "10"]) == 0
    assert capsys.readouterr().out.strip() == "Timebound(90, 110, One(USD))"
    assert main(["parse", "Timebound(5, 3, Zero)"]) == 1
    assert main(["parse", "Scale(, Zero)"]) == 2


def test_cli_flags_forwarded(tmp_path):
    f = tmp_path / "ext.scn"
    f.write_text((SCENARIOS / "ext.scn").read_text().replace("tick 1", "tick 5"))
    assert main(["run", str(f)]) == 0
    assert main(["run", str(f), "--freshness", "4"]) == 1

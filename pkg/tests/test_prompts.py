from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from erc_sentinel.errors import BudgetExceeded
from erc_sentinel.prompts import (
    CONDITION_INSTRUCTION, OUTCOMES, STAGES, STRICT_SUFFIX, SYSTEM_PROMPT, VERDICT_INSTRUCTION,
    PromptOptions, estimate_tokens, parse_verdict, plan_compound, specialize_prompt, with_strict_format,
)
from erc_sentinel.solidity import parse_contract, slice_public_function


@pytest.fixture
def bypass_slice(bypass_src):
    model = parse_contract(bypass_src)
    (fn,) = model.find_functions("transferFrom")
    return slice_public_function(model, fn)


def _rule_for(erc20, fn, pattern):
    (rule,) = [r for r in erc20.function(fn).rules if pattern in r.id]
    return rule


def test_privilege_prompt(erc20, bypass_slice):
    rule = erc20.rule("erc20.transferFrom.throw-unauthorized")
    task = specialize_prompt(rule, bypass_slice)
    assert task.messages[0] == ("system", SYSTEM_PROMPT)
    user = task.messages[1][1]
    assert user.startswith("Does each transferFrom() function throw unless")
    assert "deliberately authorized the sender" in user
    assert "(26 lines)" in user and bypass_slice.rendered in user
    assert user.endswith(VERDICT_INSTRUCTION)
    assert task.stage == "single" and task.rule_id == rule.id


def test_verdict_instruction_is_exact():
    assert VERDICT_INSTRUCTION == 'End your answer with exactly one line: "VERDICT: COMPLIANT" or "VERDICT: VIOLATION".'


def test_one_shot_toggle(erc20, bypass_slice):
    with_shot = next(r for r in erc20.rules if r.one_shot and r.scope == "function" and not r.compound
                     and erc20.function("transferFrom") and r in erc20.function("transferFrom").rules)
    text = specialize_prompt(with_shot, bypass_slice).text
    assert "Example for reference:" in text and with_shot.one_shot.rstrip() in text
    assert "Example for reference:" not in specialize_prompt(
        with_shot, bypass_slice, options=PromptOptions(one_shot=False)).text
    assert "Example for reference:" not in specialize_prompt(replace(with_shot, one_shot=None), bypass_slice).text


def test_pre_05_one_shot_verbatim(erc20):
    src = """pragma solidity ^0.4.24;
contract Old {
    event Transfer(address indexed from, address indexed to, uint256 value);
    mapping(address => uint256) balances;
    function transfer(address to, uint256 v) public returns (bool) {
        balances[msg.sender] -= v;
        balances[to] += v;
        Transfer(msg.sender, to, v);
        return true;
    }
}
"""
    model = parse_contract(src)
    (fn,) = model.find_functions("transfer")
    rule = next(r for r in erc20.function("transfer").rules if r.group == "EP")
    assert "pragma solidity ^0.4" in rule.one_shot
    text = specialize_prompt(rule, slice_public_function(model, fn)).text
    assert rule.one_shot.rstrip() in text


def test_each_group_template(erc20, bypass_slice):
    seen = set()
    for rule in erc20.function("transferFrom").rules:
        if rule.is_static or rule.compound:
            continue
        q = specialize_prompt(rule, bypass_slice).messages[1][1].split("\n")[0]
        seen.add(rule.group)
        if rule.group == "EP":
            assert q.startswith("Does each transferFrom() function emit the Transfer event when")
        elif rule.group == "AP":
            assert q.startswith("Check each transferFrom() function for this state update:")
            assert q.endswith("Is the update performed correctly?")
        else:
            assert q.startswith("Does each transferFrom() function ")
    assert {"CP", "EP", "RP", "AP"} <= seen


def test_generic_prompt_when_not_specialized(erc20, bypass_slice):
    rule = erc20.rule("erc20.transferFrom.throw-unauthorized")
    text = specialize_prompt(rule, bypass_slice, options=PromptOptions(specialize=False)).text
    assert "comply with this rule" in text and rule.text in text


def test_decl_rules_never_prompt(erc20, bypass_slice):
    decl = next(r for r in erc20.rules if r.is_static)
    with pytest.raises(ValueError):
        specialize_prompt(decl, bypass_slice)


def test_budget_is_checked_before_anything_is_sent(erc20, bypass_slice):
    rule = erc20.rule("erc20.transferFrom.throw-unauthorized")
    task = specialize_prompt(rule, bypass_slice)
    assert task.token_estimate == sum(estimate_tokens(t) for _, t in task.messages)
    specialize_prompt(rule, bypass_slice, budget=task.token_estimate)
    with pytest.raises(BudgetExceeded) as info:
        specialize_prompt(rule, bypass_slice, budget=task.token_estimate - 1)
    assert info.value.token_estimate == task.token_estimate


def test_compound_plan(erc20, bypass_slice):
    rule = next(r for r in erc20.rules if r.compound and r.group == "CP")
    cond, build = plan_compound(rule, bypass_slice)
    assert cond.stage == "condition-probe"
    assert cond.messages[1][1].startswith(f"Does the code below contain the following: {rule.payload.condition}?")
    assert cond.messages[1][1].endswith(CONDITION_INSTRUCTION)
    action = build()
    assert action.stage == "action-probe"
    assert rule.payload.action in action.text and action.text.endswith(VERDICT_INSTRUCTION)


def test_compound_needs_cp_or_ep(erc20, bypass_slice):
    rp = next(r for r in erc20.rules if r.group == "RP")
    with pytest.raises(ValueError):
        plan_compound(rp, bypass_slice)


def test_strict_retry(erc20, bypass_slice):
    task = specialize_prompt(erc20.rule("erc20.transferFrom.throw-unauthorized"), bypass_slice)
    strict = with_strict_format(task)
    assert strict.text.endswith(STRICT_SUFFIX)
    assert strict.token_estimate > task.token_estimate


def test_constructor_subject(erc20, bypass_src):
    model = parse_contract(bypass_src)
    (ctor,) = [f for f in model.functions if f.kind == "constructor"]
    rule = next(r for r in erc20.rules if r.scope == "event" and r.compound)
    cond, _ = plan_compound(rule, slice_public_function(model, ctor, "SimpleToken"))
    assert "Code of constructor in contract SimpleToken" in cond.text


# -- verdict parsing ----------------------------------------------------------------------

def test_violation_with_explanation():
    v = parse_verdict("The code lacks an allowance check.\nVERDICT: VIOLATION")
    assert (v.outcome, v.explanation) == ("violation", "The code lacks an allowance check.")


def test_bare_compliant():
    v = parse_verdict("VERDICT: COMPLIANT")
    assert (v.outcome, v.explanation) == ("compliant", "")


def test_free_prose_is_uncertain():
    assert parse_verdict("Looks fine to me.").outcome == "uncertain"


def test_last_verdict_line_wins():
    assert parse_verdict("VERDICT: VIOLATION\nOn reflection...\n**VERDICT: COMPLIANT**").outcome == "compliant"


def test_condition_tokens_only_in_probe_stage():
    assert parse_verdict("VERDICT: PRESENT", "condition-probe").outcome == "condition-present"
    assert parse_verdict("VERDICT: ABSENT", "condition-probe").outcome == "condition-absent"
    assert parse_verdict("VERDICT: PRESENT").outcome == "uncertain"
    assert parse_verdict("VERDICT: COMPLIANT", "condition-probe").outcome == "uncertain"


@given(st.text(), st.sampled_from(STAGES))
def test_parser_is_total(text, stage):
    v = parse_verdict(text, stage)
    assert v.outcome in OUTCOMES and v.raw == text


@given(st.text(), st.sampled_from(["COMPLIANT", "VIOLATION"]))
def test_appended_verdict_is_recovered(prose, token):
    v = parse_verdict(f"{prose}\nVERDICT: {token}")
    assert v.outcome == token.lower()


# -- token estimate -------------------------------------------------------------------------

def test_estimate_examples():
    assert estimate_tokens("") == 0
    assert estimate_tokens("abcdefgh") == 2


@given(st.text(), st.text())
def test_estimate_monotone(a, b):
    assert estimate_tokens(a + b) >= max(estimate_tokens(a), estimate_tokens(b))

"""Per-rule prompt construction and verdict parsing.

Each semantic rule becomes one specialized question about one code slice.
Compound rules ("when C holds, A must happen") become two probes: the first
asks only whether C is present, and the second, built lazily, asks about A.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Callable

from .errors import BudgetExceeded
from .rules.model import APPayload, CPPayload, EPPayload, ErcRule, RPPayload
from .solidity.slicing import CodeSlice

log = logging.getLogger(__name__)

SYSTEM_PROMPT = (
    "You are a meticulous smart contract auditor. You check Solidity code against "
    "rules taken from Ethereum token standards (ERCs). Base every judgement only on "
    "the code you are shown, and explain your reasoning briefly before the verdict."
)

VERDICT_INSTRUCTION = 'End your answer with exactly one line: "VERDICT: COMPLIANT" or "VERDICT: VIOLATION".'
CONDITION_INSTRUCTION = 'End your answer with exactly one line: "VERDICT: PRESENT" or "VERDICT: ABSENT".'
STRICT_SUFFIX = "Your reply must finish with that verdict line, spelled exactly as shown, with nothing after it."

LONG_SLICE_LINES = 200
STAGES = ("single", "condition-probe", "action-probe")
OUTCOMES = ("compliant", "violation", "condition-absent", "condition-present", "uncertain")

_VERDICT_RE = re.compile(r"^\s*\**\s*VERDICT\s*:\s*\**\s*([A-Za-z-]+)\s*\**\s*\.?\s*$")
_TOKENS = {
    "single": {"COMPLIANT": "compliant", "VIOLATION": "violation"},
    "action-probe": {"COMPLIANT": "compliant", "VIOLATION": "violation"},
    "condition-probe": {"PRESENT": "condition-present", "ABSENT": "condition-absent"},
}


def estimate_tokens(text: str) -> int:
    """Rough token count: one token per four characters, rounded up.

    >>> estimate_tokens(""), estimate_tokens("12345678"), estimate_tokens("123456789")
    (0, 2, 3)
    """
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class PromptOptions:
    """Switches for ablation runs; the defaults are the full pipeline."""

    specialize: bool = True
    one_shot: bool = True
    decompose: bool = True


@dataclass(frozen=True)
class PromptTask:
    rule_id: str
    function: str
    contract: str
    messages: tuple[tuple[str, str], ...]
    stage: str
    token_estimate: int
    slice: CodeSlice | None = field(default=None, compare=False, repr=False)

    @property
    def text(self) -> str:
        """All message texts joined; what mock scripts match against."""
        return "\n\n".join(text for _, text in self.messages)


@dataclass(frozen=True)
class Verdict:
    outcome: str
    explanation: str = ""
    raw: str = ""

    @property
    def parsed(self) -> bool:
        return self.outcome != "uncertain"


def _subject(slice_: CodeSlice) -> str:
    fn = slice_.anchor
    if fn.kind == "constructor":
        return "the constructor"
    return f"each {fn.name}() function"


def _code_block(slice_: CodeSlice) -> str:
    fn = slice_.anchor
    label = "constructor" if fn.kind == "constructor" else f"{fn.name}()"
    if len(slice_) > LONG_SLICE_LINES:
        log.warning("slice for %s.%s has %d lines; long inputs hurt accuracy", fn.owner, fn.name, len(slice_))
    return (
        f"Code of {label} in contract {slice_.contract}, with the code it depends on "
        f"({len(slice_)} lines):\n```solidity\n{slice_.rendered}\n```"
    )


def _question(rule: ErcRule, slice_: CodeSlice) -> str:
    p = rule.payload
    who = _subject(slice_)
    if isinstance(p, CPPayload):
        if p.condition_type == "always" or not p.condition:
            return f"Does {who} always {p.action}?"
        return f"Does {who} {p.action} {p.condition_type} {p.condition}?"
    if isinstance(p, EPPayload):
        verb = "emit" if p.polarity == "must-emit" else "avoid emitting"
        return f"Does {who} {verb} the {p.event} event when {p.condition}?"
    if isinstance(p, RPPayload):
        return f"Does {who} {p.return_semantics}?"
    if isinstance(p, APPayload):
        return f"Check {who} for this state update: {p.assignment}. Is the update performed correctly?"
    raise ValueError(f"{rule.id}: {rule.group} rules are checked statically, not by prompt")


def _generic_question(rule: ErcRule, slice_: CodeSlice) -> str:
    return f"Does {_subject(slice_)} comply with this rule from the standard?\n{rule.text}"


def _example(rule: ErcRule, options: PromptOptions) -> str | None:
    if not (options.one_shot and rule.one_shot):
        return None
    return f"Example for reference:\n```solidity\n{rule.one_shot.rstrip()}\n```"


def _task(rule, slice_, stage, parts, budget) -> PromptTask:
    user = "\n\n".join(p for p in parts if p)
    messages = (("system", SYSTEM_PROMPT), ("user", user))
    estimate = sum(estimate_tokens(text) for _, text in messages)
    if budget is not None and estimate > budget:
        raise BudgetExceeded(estimate, budget)
    return PromptTask(rule.id, slice_.anchor.name, slice_.contract, messages, stage, estimate, slice_)


def specialize_prompt(
    rule: ErcRule, slice_: CodeSlice, budget: int | None = None, options: PromptOptions = PromptOptions()
) -> PromptTask:
    """One self-contained question about ``slice_`` for a non-compound semantic rule."""
    if rule.is_static:
        raise ValueError(f"{rule.id}: DECL rules never become prompts")
    question = _question(rule, slice_) if options.specialize else _generic_question(rule, slice_)
    parts = [question, _code_block(slice_), _example(rule, options), VERDICT_INSTRUCTION]
    return _task(rule, slice_, "single", parts, budget)


def _condition_text(rule: ErcRule) -> str:
    return rule.payload.condition


def plan_compound(
    rule: ErcRule, slice_: CodeSlice, budget: int | None = None, options: PromptOptions = PromptOptions()
) -> tuple[PromptTask, Callable[[], PromptTask]]:
    """Condition probe now, plus a builder for the action probe.

    The builder should only be called after the condition probe came back
    ``condition-present``.
    """
    if not isinstance(rule.payload, (CPPayload, EPPayload)):
        raise ValueError(f"{rule.id}: only CP and EP rules can be compound")
    condition = _condition_text(rule)
    probe = f"Does the code below contain the following: {condition}?"
    cond_task = _task(rule, slice_, "condition-probe",
                      [probe, _code_block(slice_), CONDITION_INSTRUCTION], budget)

    def action_task() -> PromptTask:
        p = rule.payload
        if isinstance(p, CPPayload):
            ask = f"In this code, {condition}. Given that, does the code {p.action}?"
        else:
            verb = "emit" if p.polarity == "must-emit" else "avoid emitting"
            ask = f"In this code, {condition}. Given that, does the code {verb} the {p.event} event?"
        parts = [ask, _code_block(slice_), _example(rule, options), VERDICT_INSTRUCTION]
        return _task(rule, slice_, "action-probe", parts, budget)

    return cond_task, action_task


def with_strict_format(task: PromptTask, budget: int | None = None) -> PromptTask:
    """The same task with a firmer reminder about the verdict line, for a single retry."""
    messages = list(task.messages)
    role, text = messages[-1]
    messages[-1] = (role, f"{text}\n{STRICT_SUFFIX}")
    estimate = sum(estimate_tokens(t) for _, t in messages)
    if budget is not None and estimate > budget:
        raise BudgetExceeded(estimate, budget)
    return PromptTask(task.rule_id, task.function, task.contract, tuple(messages), task.stage, estimate, task.slice)


def parse_verdict(response: str, stage: str = "single") -> Verdict:
    """Classify a model reply by its last ``VERDICT:`` line.

    Text before that line is the explanation. Replies without a usable
    verdict line (or with a token that does not fit the stage) are uncertain.
    """
    if stage not in _TOKENS:
        raise ValueError(f"unknown stage {stage!r}")
    lines = response.splitlines()
    for idx in range(len(lines) - 1, -1, -1):
        m = _VERDICT_RE.match(lines[idx])
        if m:
            outcome = _TOKENS[stage].get(m.group(1).upper())
            if outcome is None:
                break
            explanation = "\n".join(lines[:idx]).strip()
            return Verdict(outcome, explanation, response)
    return Verdict("uncertain", response.strip(), response)

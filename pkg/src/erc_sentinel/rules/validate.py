from __future__ import annotations

from dataclasses import dataclass, replace
from collections import Counter

from ..solidity.signature import parse_declaration
from .model import (
    ALLOWED_IMPACTS,
    CPPayload,
    DeclPayload,
    EPPayload,
    ErcRule,
    ErcRuleSet,
    EventSpec,
    FunctionSpec,
)


@dataclass(frozen=True)
class ValidationIssue:
    rule_id: str | None
    reason: str

    def __str__(self) -> str:
        return f"{self.rule_id or '<ruleset>'}: {self.reason}"


def _expected_scope(owner: FunctionSpec | EventSpec | None) -> str:
    if owner is None:
        return "contract"
    return "function" if isinstance(owner, FunctionSpec) else "event"


def structural_issues(ruleset: ErcRuleSet) -> list[ValidationIssue]:
    """Invariant breaches that make a rule file unusable (load-time errors)."""
    issues: list[ValidationIssue] = []
    counts = Counter(r.id for r in ruleset.rules)
    for rule_id, n in counts.items():
        if n > 1:
            issues.append(ValidationIssue(rule_id, f"duplicate id ({n} rules share it)"))

    for fn in ruleset.functions:
        names = Counter(p.name for p in fn.params)
        for name, n in names.items():
            if n > 1:
                issues.append(ValidationIssue(None, f"function {fn.name}: duplicate parameter name {name!r}"))

    event_names = {ev.name for ev in ruleset.events}
    for owner, rule in ruleset.iter_rules():
        expected = _expected_scope(owner)
        if rule.scope != expected:
            issues.append(ValidationIssue(rule.id, f"scope is {rule.scope!r} but the rule sits at {expected} level"))
        if rule.impact not in ALLOWED_IMPACTS[rule.content_category]:
            issues.append(ValidationIssue(
                rule.id, f"illegal impact/category pair: {rule.content_category}/{rule.impact}"))
        if isinstance(rule.payload, EPPayload) and rule.payload.event not in event_names:
            issues.append(ValidationIssue(rule.id, f"event {rule.payload.event!r} is not declared in the rule set"))
    return issues


def _rule_issues(rule: ErcRule) -> list[ValidationIssue]:
    issues = []
    p = rule.payload
    if isinstance(p, CPPayload) and not (p.condition.strip() and p.condition_type and p.action.strip()):
        issues.append(ValidationIssue(rule.id, "CP payload incomplete"))
    if isinstance(p, EPPayload) and not p.event.strip():
        issues.append(ValidationIssue(rule.id, "EP payload incomplete"))
    if isinstance(p, DeclPayload):
        try:
            parse_declaration(p.expected_signature)
        except ValueError:
            issues.append(ValidationIssue(rule.id, "expected_signature is not a function or event declaration"))
    if (rule.group == "DECL") != isinstance(p, DeclPayload):
        issues.append(ValidationIssue(rule.id, "payload does not match group"))
    if rule.compound:
        if isinstance(p, CPPayload):
            ok = bool(p.condition.strip() and p.action.strip())
        elif isinstance(p, EPPayload):
            ok = bool(p.condition.strip() and p.event.strip())
        else:
            ok = False
        if not ok:
            issues.append(ValidationIssue(rule.id, "compound rule needs both a condition and an action"))
    if rule.review != "approved":
        issues.append(ValidationIssue(rule.id, "pending human review"))
    return issues


def validate_ruleset(ruleset: ErcRuleSet) -> list[ValidationIssue]:
    """All invariant breaches plus unreviewed rules; empty means audit-ready."""
    issues = structural_issues(ruleset)
    for rule in ruleset.rules:
        issues.extend(_rule_issues(rule))
    return issues


def approve_all(ruleset: ErcRuleSet) -> ErcRuleSet:
    """Copy of ``ruleset`` with every rule marked approved."""

    def ok(rules):
        return tuple(replace(r, review="approved") for r in rules)

    return replace(
        ruleset,
        functions=tuple(replace(f, rules=ok(f.rules)) for f in ruleset.functions),
        events=tuple(replace(e, rules=ok(e.rules)) for e in ruleset.events),
        contract_scope_rules=ok(ruleset.contract_scope_rules),
    )

"""Reading and writing rule files (YAML)."""

from __future__ import annotations

from dataclasses import MISSING, fields
from typing import Any

import yaml

from ..errors import ParseError, ValidationError
from .model import (
    CATEGORIES,
    CONDITION_TYPES,
    GROUPS,
    IMPACTS,
    PATTERN_IDS,
    PAYLOAD_TYPES,
    POLARITIES,
    REVIEW_STATES,
    SCOPES,
    ErcRule,
    ErcRuleSet,
    EventSpec,
    FunctionSpec,
    Param,
)

_LINE = "__line__"

_TOP_KEYS = {"erc", "functions", "events", "contract_scope_rules"}
_FUNCTION_KEYS = {"name", "params", "returns", "optional", "rules"}
_EVENT_KEYS = {"name", "params", "rules"}
_RULE_REQUIRED = {"id", "group", "content_category", "impact", "scope", "text", "payload", "compound", "review"}
_RULE_KEYS = _RULE_REQUIRED | {"pattern_id", "one_shot"}
_ENUMS = {
    "group": GROUPS,
    "content_category": CATEGORIES,
    "impact": IMPACTS,
    "scope": SCOPES,
    "review": REVIEW_STATES,
}


class _LineLoader(yaml.SafeLoader):
    """SafeLoader that stamps every mapping with its 1-based source line."""

    def construct_mapping(self, node, deep=False):
        mapping = super().construct_mapping(node, deep=deep)
        mapping[_LINE] = node.start_mark.line + 1
        return mapping


def _line(obj: Any) -> int | None:
    return obj.get(_LINE) if isinstance(obj, dict) else None


def _expect_mapping(obj: Any, what: str, line: int | None) -> dict:
    if not isinstance(obj, dict):
        raise ParseError(line, f"{what} must be a mapping")
    return obj


def _check_keys(obj: dict, allowed: set[str], required: set[str], what: str) -> None:
    keys = set(obj) - {_LINE}
    unknown = sorted(keys - allowed)
    if unknown:
        raise ParseError(_line(obj), f"unknown key(s) in {what}: {', '.join(unknown)}")
    missing = sorted(required - keys)
    if missing:
        raise ParseError(_line(obj), f"missing key(s) in {what}: {', '.join(missing)}")


def _str(obj: dict, key: str, what: str) -> str:
    value = obj[key]
    if not isinstance(value, str):
        raise ParseError(_line(obj), f"{what}.{key} must be a string")
    return value


def _parse_params(raw: Any, line: int | None, *, event: bool) -> tuple[Param, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ParseError(line, "params must be a list")
    allowed = {"name", "type", "indexed"} if event else {"name", "type"}
    out = []
    for item in raw:
        item = _expect_mapping(item, "param", line)
        _check_keys(item, allowed, {"name", "type"}, "param")
        indexed = item.get("indexed", False)
        if not isinstance(indexed, bool):
            raise ParseError(_line(item), "indexed must be a boolean")
        out.append(Param(str(item["name"]), str(item["type"]), indexed))
    return tuple(out)


def _parse_payload(raw: Any, group: str, line: int | None):
    raw = _expect_mapping(raw, "payload", line)
    cls = PAYLOAD_TYPES[group]
    names = {f.name for f in fields(cls)}
    required = {f.name for f in fields(cls) if f.default is MISSING}
    _check_keys(raw, names, required, f"{group} payload")
    values = {}
    for key in names & set(raw):
        value = raw[key]
        if value is None:
            value = ""
        if not isinstance(value, str):
            raise ParseError(_line(raw), f"payload.{key} must be a string")
        values[key] = value
    if group == "CP" and values.get("condition_type") not in CONDITION_TYPES:
        raise ParseError(_line(raw), f"condition_type must be one of {', '.join(CONDITION_TYPES)}")
    if group == "EP" and values.get("polarity", "must-emit") not in POLARITIES:
        raise ParseError(_line(raw), f"polarity must be one of {', '.join(POLARITIES)}")
    return cls(**values)


def _parse_rule(raw: Any, line: int | None) -> ErcRule:
    raw = _expect_mapping(raw, "rule", line)
    _check_keys(raw, _RULE_KEYS, _RULE_REQUIRED, "rule")
    for key, allowed in _ENUMS.items():
        if raw[key] not in allowed:
            raise ParseError(_line(raw), f"{key} must be one of {', '.join(allowed)}, got {raw[key]!r}")
    pattern_id = raw.get("pattern_id")
    if pattern_id is not None and pattern_id not in PATTERN_IDS:
        raise ParseError(_line(raw), f"unknown pattern_id {pattern_id!r}")
    if not isinstance(raw["compound"], bool):
        raise ParseError(_line(raw), "compound must be a boolean")
    one_shot = raw.get("one_shot")
    if one_shot is not None and not isinstance(one_shot, str):
        raise ParseError(_line(raw), "one_shot must be a string")
    return ErcRule(
        id=_str(raw, "id", "rule"),
        group=raw["group"],
        pattern_id=pattern_id,
        content_category=raw["content_category"],
        impact=raw["impact"],
        scope=raw["scope"],
        text=_str(raw, "text", "rule"),
        payload=_parse_payload(raw["payload"], raw["group"], _line(raw)),
        compound=raw["compound"],
        one_shot=one_shot,
        review=raw["review"],
    )


def _parse_rules(raw: Any, line: int | None) -> tuple[ErcRule, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ParseError(line, "rules must be a list")
    return tuple(_parse_rule(r, line) for r in raw)


def parse_ruleset(rule_file_text: str) -> ErcRuleSet:
    """Parse without invariant checks. Use :func:`load_ruleset` normally."""
    try:
        doc = yaml.load(rule_file_text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(mark.line + 1 if mark else None, str(getattr(exc, "problem", exc))) from exc
    doc = _expect_mapping(doc, "rule file", 1)
    _check_keys(doc, _TOP_KEYS, {"erc"}, "rule file")

    functions = []
    for raw in doc.get("functions") or []:
        raw = _expect_mapping(raw, "function", _line(doc))
        _check_keys(raw, _FUNCTION_KEYS, {"name"}, "function")
        returns = raw.get("returns")
        optional = raw.get("optional", False)
        if not isinstance(optional, bool):
            raise ParseError(_line(raw), "optional must be a boolean")
        functions.append(FunctionSpec(
            name=str(raw["name"]),
            params=_parse_params(raw.get("params"), _line(raw), event=False),
            returns=None if returns is None else str(returns),
            optional_flag=optional,
            rules=_parse_rules(raw.get("rules"), _line(raw)),
        ))

    events = []
    for raw in doc.get("events") or []:
        raw = _expect_mapping(raw, "event", _line(doc))
        _check_keys(raw, _EVENT_KEYS, {"name"}, "event")
        events.append(EventSpec(
            name=str(raw["name"]),
            params=_parse_params(raw.get("params"), _line(raw), event=True),
            rules=_parse_rules(raw.get("rules"), _line(raw)),
        ))

    return ErcRuleSet(
        erc_id=str(doc["erc"]),
        functions=tuple(functions),
        events=tuple(events),
        contract_scope_rules=_parse_rules(doc.get("contract_scope_rules"), _line(doc)),
    )


def load_ruleset(rule_file_text: str) -> ErcRuleSet:
    """Parse a rule file and enforce the structural invariants.

    Raises ParseError for malformed text and ValidationError for duplicate
    ids, dangling event references, scope mismatches and impact/category
    pairs outside the taxonomy. Review state and payload completeness are
    reported by :func:`validate_ruleset` instead, so drafts stay loadable.
    """
    from .validate import structural_issues

    ruleset = parse_ruleset(rule_file_text)
    issues = structural_issues(ruleset)
    if issues:
        first = issues[0]
        raise ValidationError(first.rule_id, first.reason)
    return ruleset


# -- saving -------------------------------------------------------------------


class _Dumper(yaml.SafeDumper):
    pass


def _str_representer(dumper: yaml.SafeDumper, data: str):
    style = "|" if "\n" in data else None
    return dumper.represent_scalar("tag:yaml.org,2002:str", data, style=style)


_Dumper.add_representer(str, _str_representer)


def _params_doc(params: tuple[Param, ...], *, event: bool) -> list[dict]:
    out = []
    for p in params:
        item = {"name": p.name, "type": p.type}
        if event:
            item["indexed"] = p.indexed
        out.append(item)
    return out


def _rule_doc(rule: ErcRule) -> dict:
    doc: dict[str, Any] = {"id": rule.id, "group": rule.group}
    if rule.pattern_id is not None:
        doc["pattern_id"] = rule.pattern_id
    doc.update(
        content_category=rule.content_category,
        impact=rule.impact,
        scope=rule.scope,
        text=rule.text,
        payload={f.name: getattr(rule.payload, f.name) for f in fields(rule.payload)},
        compound=rule.compound,
    )
    if rule.one_shot is not None:
        doc["one_shot"] = rule.one_shot
    doc["review"] = rule.review
    return doc


def ruleset_to_dict(ruleset: ErcRuleSet) -> dict:
    functions = []
    for fn in ruleset.functions:
        item: dict[str, Any] = {"name": fn.name, "params": _params_doc(fn.params, event=False)}
        item["returns"] = fn.returns
        if fn.optional_flag:
            item["optional"] = True
        item["rules"] = [_rule_doc(r) for r in fn.rules]
        functions.append(item)
    events = [
        {"name": ev.name, "params": _params_doc(ev.params, event=True), "rules": [_rule_doc(r) for r in ev.rules]}
        for ev in ruleset.events
    ]
    return {
        "erc": ruleset.erc_id,
        "functions": functions,
        "events": events,
        "contract_scope_rules": [_rule_doc(r) for r in ruleset.contract_scope_rules],
    }


def save_ruleset(ruleset: ErcRuleSet) -> str:
    return yaml.dump(
        ruleset_to_dict(ruleset),
        Dumper=_Dumper,
        sort_keys=False,
        allow_unicode=True,
        width=100,
        default_flow_style=False,
    )

"""Data types for ERC rule sets.

A rule set mirrors the shape of an ERC: the functions it mandates, the events
it declares, and the rules attached to each. Every rule belongs to one
implementation group:

* ``CP`` -- a condition check followed by an action (``throw unless ...``)
* ``EP`` -- an event must (or must not) be emitted
* ``RP`` -- how a return value is produced
* ``AP`` -- how a piece of state is assigned
* ``DECL`` -- a declaration the contract must expose; checked statically

All types are frozen; a loaded rule set can be shared between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

GROUPS = ("CP", "EP", "RP", "AP", "DECL")
SEMANTIC_GROUPS = ("CP", "EP", "RP", "AP")
PATTERN_IDS = (
    "CP1", "CP2", "CP3", "CP4", "CP5", "CP6", "CP7",
    "EP1", "EP2", "EP3",
    "RP1", "RP2",
    "AP1",
)
CATEGORIES = ("privilege-check", "functionality", "usage", "logging")
IMPACTS = ("high", "medium", "low")
SCOPES = ("function", "event", "contract")
CONDITION_TYPES = ("if", "unless", "when", "always")
POLARITIES = ("must-emit", "must-not-emit")
REVIEW_STATES = ("pending", "approved")

# Non-empty cells of the study's content x impact table. usage/high covers
# recipient-capability checks (onERC721Received and friends).
ALLOWED_IMPACTS = {
    "privilege-check": ("high",),
    "functionality": ("high", "medium"),
    "usage": ("medium", "high"),
    "logging": ("low",),
}


@dataclass(frozen=True)
class CPPayload:
    condition: str
    condition_type: str
    action: str


@dataclass(frozen=True)
class EPPayload:
    condition: str
    event: str
    polarity: str = "must-emit"


@dataclass(frozen=True)
class RPPayload:
    return_semantics: str


@dataclass(frozen=True)
class APPayload:
    assignment: str


@dataclass(frozen=True)
class DeclPayload:
    expected_signature: str


GroupPayload = Union[CPPayload, EPPayload, RPPayload, APPayload, DeclPayload]

PAYLOAD_TYPES: dict[str, type] = {
    "CP": CPPayload,
    "EP": EPPayload,
    "RP": RPPayload,
    "AP": APPayload,
    "DECL": DeclPayload,
}


@dataclass(frozen=True)
class ErcRule:
    id: str
    group: str
    content_category: str
    impact: str
    scope: str
    text: str
    payload: GroupPayload
    pattern_id: str | None = None
    compound: bool = False
    one_shot: str | None = None
    review: str = "pending"

    @property
    def is_static(self) -> bool:
        return self.group == "DECL"


@dataclass(frozen=True)
class Param:
    name: str
    type: str
    indexed: bool = False


@dataclass(frozen=True)
class FunctionSpec:
    name: str
    params: tuple[Param, ...] = ()
    returns: str | None = None
    optional_flag: bool = False
    rules: tuple[ErcRule, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.params)

    def declaration(self) -> str:
        """Solidity-style declaration text, as shown to the LLM."""
        params = ", ".join(f"{p.type} {p.name}".strip() for p in self.params)
        text = f"function {self.name}({params})"
        if self.returns:
            text += f" returns ({self.returns})"
        return text


@dataclass(frozen=True)
class EventSpec:
    name: str
    params: tuple[Param, ...] = ()
    rules: tuple[ErcRule, ...] = ()

    def declaration(self) -> str:
        parts = []
        for p in self.params:
            bits = [p.type, "indexed" if p.indexed else "", p.name]
            parts.append(" ".join(b for b in bits if b))
        return f"event {self.name}({', '.join(parts)})"


@dataclass(frozen=True)
class ErcRuleSet:
    erc_id: str
    functions: tuple[FunctionSpec, ...] = ()
    events: tuple[EventSpec, ...] = ()
    contract_scope_rules: tuple[ErcRule, ...] = field(default=())

    def iter_rules(self) -> Iterator[tuple[FunctionSpec | EventSpec | None, ErcRule]]:
        """Yield ``(owner, rule)`` in file order; owner is None for contract scope."""
        for fn in self.functions:
            for rule in fn.rules:
                yield fn, rule
        for ev in self.events:
            for rule in ev.rules:
                yield ev, rule
        for rule in self.contract_scope_rules:
            yield None, rule

    @property
    def rules(self) -> list[ErcRule]:
        return [r for _, r in self.iter_rules()]

    def function(self, name: str) -> FunctionSpec | None:
        return next((f for f in self.functions if f.name == name), None)

    def event(self, name: str) -> EventSpec | None:
        return next((e for e in self.events if e.name == name), None)

    def rule(self, rule_id: str) -> ErcRule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise KeyError(rule_id)

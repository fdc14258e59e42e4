"""Startup phase: turn an ERC document into a draft rule set with staged prompts.

Every extracted rule starts with ``review: pending``; a human approves the
file with ``erc-sentinel validate --approve-all --yes`` after editing it.
"""

from __future__ import annotations

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources

import yaml

from .errors import BudgetExceeded, ExtractionParseError
from .llm import Gateway
from .prompts import estimate_tokens
from .rules.model import (
    ALLOWED_IMPACTS,
    CATEGORIES,
    CONDITION_TYPES,
    PATTERN_IDS,
    POLARITIES,
    APPayload,
    CPPayload,
    DeclPayload,
    EPPayload,
    ErcRule,
    ErcRuleSet,
    EventSpec,
    FunctionSpec,
    Param,
    RPPayload,
)
from .solidity.signature import normalize_type

log = logging.getLogger(__name__)

EXTRACTION_GROUPS = ("CP", "EP", "RP", "AP")
DEFAULT_CLASS = {
    "CP": ("functionality", "medium"),
    "EP": ("logging", "low"),
    "RP": ("functionality", "medium"),
    "AP": ("functionality", "medium"),
}

SYSTEM = "You read Ethereum standard documents (ERCs) and extract precise, structured implementation requirements."
STRICT = (
    "Your previous reply could not be parsed. Reply with a single ```yaml fenced block containing "
    "only the YAML array, and no other text."
)

_HEADING = re.compile(r"^(#{1,6})\s+(.*\S)\s*$")


@dataclass(frozen=True)
class ErcDocument:
    erc_id: str
    body: str
    sections: tuple[tuple[str, tuple[int, int]], ...]  # (heading, 1-based inclusive line span)

    @classmethod
    def from_text(cls, body: str, erc_id: str | None = None) -> "ErcDocument":
        if not body.strip():
            raise ValueError("ERC document is empty")
        return cls(erc_id or guess_erc_id(body), body, scan_sections(body))

    def section_text(self, index: int) -> str:
        lines = self.body.splitlines()
        first, last = self.sections[index][1]
        return "\n".join(lines[first - 1:last])


def guess_erc_id(body: str) -> str:
    r"""ERC id from the front matter or the first "ERC-n" mention.

    >>> guess_erc_id("---\neip: 721\ntitle: Non-Fungible Token\n---")
    'ERC721'
    >>> guess_erc_id("An extension of EIP-20 tokens")
    'ERC20'
    """
    m = re.search(r"^eip:\s*(\d+)\s*$", body, re.M) or re.search(r"\b(?:ERC|EIP)[- ]?(\d+)\b", body)
    return f"ERC{m.group(1)}" if m else "ERC"


def scan_sections(body: str) -> tuple[tuple[str, tuple[int, int]], ...]:
    """Split at markdown headings outside code fences; the spans tile the body."""
    lines = body.splitlines() or [""]
    starts: list[tuple[str, int]] = []
    fenced = False
    for i, line in enumerate(lines, 1):
        if line.lstrip().startswith("```"):
            fenced = not fenced
            continue
        m = None if fenced else _HEADING.match(line)
        if m:
            starts.append((m.group(2), i))
    if not starts or starts[0][1] != 1:
        starts.insert(0, ("", 1))
    out = []
    for k, (title, first) in enumerate(starts):
        last = starts[k + 1][1] - 1 if k + 1 < len(starts) else len(lines)
        out.append((title, (first, last)))
    return tuple(out)


def _fill(frame: str, doc: str) -> str:
    return frame.replace("<<DOC>>", doc)


def _asset(name: str) -> str:
    return resources.files("erc_sentinel").joinpath(f"data/prompts/{name}").read_text("utf-8")


def group_explanation(group: str) -> str:
    return _asset(f"group_{group.lower()}.txt").strip()


@dataclass(frozen=True)
class LogEntry:
    subject: str  # function/event name, or "*" for interface prompts
    group: str  # functions | events | CP | EP | RP | AP
    token_estimate: int
    outcome: str

    def line(self) -> str:
        return f"{self.subject}\t{self.group}\t{self.token_estimate}\t{self.outcome}"


@dataclass
class ExtractionLog:
    """Per-prompt log plus rejected response items; shared across worker threads."""

    entries: list[LogEntry] = field(default_factory=list)
    rejections: list[tuple[str, str, str]] = field(default_factory=list)  # (subject, group, reason)
    warnings: list[str] = field(default_factory=list)

    def render(self) -> str:
        lines = [e.line() for e in self.entries]
        lines += [f"# rejected {s} {g}: {r}" for s, g, r in self.rejections]
        lines += [f"# warning: {w}" for w in self.warnings]
        return "\n".join(lines) + ("\n" if lines else "")


def _parse_yaml_array(text: str) -> list | None:
    m = re.search(r"```(?:ya?ml)?\s*\n(.*?)```", text, re.S)
    candidate = m.group(1) if m else text
    try:
        data = yaml.safe_load(candidate)
    except yaml.YAMLError:
        return None
    if data is None:
        return []
    return data if isinstance(data, list) else None


class _Session:
    def __init__(self, doc: ErcDocument, gateway: Gateway, log_: ExtractionLog | None):
        self.doc = doc
        self.gateway = gateway
        self.log = log_ if log_ is not None else ExtractionLog()
        self.budget = gateway.config.input_budget

    def fits(self, text: str) -> bool:
        return estimate_tokens(SYSTEM) + estimate_tokens(text) <= self.budget

    def context_for(self, name: str | None, frame: str) -> list[str]:
        """Document text to embed: the whole body if it fits, else the relevant sections."""
        if self.fits(_fill(frame, self.doc.body)):
            return [self.doc.body]
        n = len(self.doc.sections)
        if name is None:
            # pack consecutive sections into budget-sized chunks
            chunks, cur = [], ""
            for i in range(n):
                piece = self.doc.section_text(i)
                joined = f"{cur}\n{piece}" if cur else piece
                if cur and not self.fits(_fill(frame, joined)):
                    chunks.append(cur)
                    cur = piece
                else:
                    cur = joined
            return chunks + ([cur] if cur else [])
        pat = re.compile(rf"\b(?:function|event)\s+{re.escape(name)}\s*\(|^#+\s*{re.escape(name)}\b", re.M)
        hits = [self.doc.section_text(i) for i in range(n) if pat.search(self.doc.section_text(i))]
        return ["\n".join(hits)] if hits else [self.doc.body]

    def ask(self, subject: str, group: str, user: str) -> list:
        messages = [("system", SYSTEM), ("user", user)]
        estimate = sum(estimate_tokens(t) for _, t in messages)
        if estimate > self.budget:
            self.log.entries.append(LogEntry(subject, group, estimate, "budget-exceeded"))
            raise BudgetExceeded(estimate, self.budget)
        for attempt in range(2):
            if attempt:
                messages = [("system", SYSTEM), ("user", f"{user}\n\n{STRICT}")]
                estimate = sum(estimate_tokens(t) for _, t in messages)
            reply = self.gateway.complete(messages)
            items = _parse_yaml_array(reply)
            self.log.entries.append(LogEntry(subject, group, estimate, "ok" if items is not None else "unparseable"))
            if items is not None:
                return items
        raise ExtractionParseError(f"{subject}/{group}: response is not a YAML array after one retry")

    def reject(self, subject: str, group: str, reason: str) -> None:
        self.log.rejections.append((subject, group, reason))


# -- step 1: interface ---------------------------------------------------------------

_FUNCTIONS_FRAME = (
    "Here is an Ethereum standard document:\n\n<<DOC>>\n\n"
    "Enumerate every function this document specifies. Present them as a YAML array; "
    "each element has the keys name, params (a list of {name, type} objects, in order), "
    "returns (the Solidity return type, or null) and optional (true only when the document "
    "marks the function as OPTIONAL). Put the array in a ```yaml fenced block."
)
_EVENTS_FRAME = (
    "Here is an Ethereum standard document:\n\n<<DOC>>\n\n"
    "Enumerate every event declaration this document specifies. Present them as a YAML array; "
    "each element has the keys name and params (a list of {name, type, indexed} objects, in order). "
    "Put the array in a ```yaml fenced block."
)


def _params(raw, event: bool) -> tuple[Param, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ValueError("params must be a list")
    out = []
    for i, p in enumerate(raw):
        if not isinstance(p, dict) or "type" not in p:
            raise ValueError(f"param {i} needs a type")
        name = str(p.get("name") or f"arg{i}")
        out.append(Param(name, normalize_type(str(p["type"])), bool(p.get("indexed", False)) if event else False))
    if len({p.name for p in out}) != len(out):
        raise ValueError("duplicate parameter names")
    return tuple(out)


def extract_interface(
    doc: ErcDocument, gateway: Gateway, log_: ExtractionLog | None = None
) -> tuple[list[FunctionSpec], list[EventSpec]]:
    """One prompt (per segment) for functions and one for events."""
    s = _Session(doc, gateway, log_)
    functions: dict[str, FunctionSpec] = {}
    events: dict[str, EventSpec] = {}
    for chunk in s.context_for(None, _FUNCTIONS_FRAME):
        for item in s.ask("*", "functions", _fill(_FUNCTIONS_FRAME, chunk)):
            try:
                if not isinstance(item, dict) or not isinstance(item.get("name"), str):
                    raise ValueError("element needs a name")
                returns = item.get("returns")
                fn = FunctionSpec(item["name"], _params(item.get("params"), False),
                                  normalize_type(str(returns)) if returns else None,
                                  bool(item.get("optional", False)))
            except ValueError as exc:
                s.reject("*", "functions", f"{exc}: {item!r}")
                continue
            functions.setdefault(fn.name, fn)
    for chunk in s.context_for(None, _EVENTS_FRAME):
        for item in s.ask("*", "events", _fill(_EVENTS_FRAME, chunk)):
            try:
                if not isinstance(item, dict) or not isinstance(item.get("name"), str):
                    raise ValueError("element needs a name")
                ev = EventSpec(item["name"], _params(item.get("params"), True))
            except ValueError as exc:
                s.reject("*", "events", f"{exc}: {item!r}")
                continue
            events.setdefault(ev.name, ev)
    return list(functions.values()), list(events.values())


# -- step 2 and 3: rules -----------------------------------------------------------

_FORMATS = {
    "CP": "text (the rule sentence, verbatim), condition, condition_type (one of if, unless, when, always), action",
    "EP": "text (the rule sentence, verbatim), condition, event, polarity (must-emit or must-not-emit)",
    "RP": "text (the rule sentence, verbatim), return_semantics (how the return value is generated)",
    "AP": "text (the rule sentence, verbatim), assignment (which state is updated and how)",
}
_RULES_FRAME = (
    "Here is an Ethereum standard document:\n\n<<DOC>>\n\n"
    "Consider this declaration from it:\n{decl}\n\n"
    "{explanation}\n\n"
    "Extract every rule of this group that the document imposes on {subject}. Present them as a "
    "YAML array; each element has the keys {fmt}. You may add pattern_id (the matching pattern above) "
    "and content_category (privilege-check, functionality, usage or logging). Reply with [] if there "
    "are none. Put the array in a ```yaml fenced block."
)


def _text(item: dict, key: str) -> str:
    value = item.get(key)
    if not isinstance(value, str) or not value.strip():
        raise ValueError(f"missing {key}")
    return value.strip()


def _payload(group: str, item: dict, event: str | None):
    if group == "CP":
        ctype = str(item.get("condition_type", "")).strip().lower()
        if ctype not in CONDITION_TYPES:
            raise ValueError(f"condition_type {ctype!r} is not one of {', '.join(CONDITION_TYPES)}")
        condition = str(item.get("condition") or "in every case").strip() if ctype == "always" else _text(item, "condition")
        return CPPayload(condition, ctype, _text(item, "action"))
    if group == "EP":
        polarity = str(item.get("polarity", "must-emit")).strip().lower()
        if polarity not in POLARITIES:
            raise ValueError(f"polarity {polarity!r} is not one of {', '.join(POLARITIES)}")
        return EPPayload(_text(item, "condition"), event or _text(item, "event"), polarity)
    if group == "RP":
        return RPPayload(_text(item, "return_semantics"))
    return APPayload(_text(item, "assignment"))


def _classify(group: str, item: dict) -> tuple[str, str]:
    category, impact = DEFAULT_CLASS[group]
    proposed = item.get("content_category")
    if proposed in CATEGORIES and proposed != category:
        category = proposed
        if impact not in ALLOWED_IMPACTS[category]:
            impact = ALLOWED_IMPACTS[category][0]
    return category, impact


def _build_rules(s: _Session, items: list, group: str, subject: str, scope: str,
                 event: str | None = None) -> list[ErcRule]:
    prefix = f"{s.doc.erc_id.lower()}.{subject}.{group.lower()}"
    rules = []
    for item in items:
        try:
            if not isinstance(item, dict):
                raise ValueError("element is not a mapping")
            payload = _payload(group, item, event)
            category, impact = _classify(group, item)
            pattern = item.get("pattern_id")
            pattern = pattern if pattern in PATTERN_IDS and str(pattern).startswith(group) else None
            rules.append(ErcRule(
                id=f"{prefix}-{len(rules) + 1}", group=group, content_category=category, impact=impact,
                scope=scope, text=_text(item, "text"), payload=payload, pattern_id=pattern,
            ))
        except ValueError as exc:
            s.reject(subject, group, f"{exc}: {item!r}")
    return rules


def _rules_prompt(s: _Session, group: str, decl: str, subject_words: str, name: str) -> str:
    frame = _RULES_FRAME.format(decl=decl, explanation=group_explanation(group), subject=subject_words,
                                fmt=_FORMATS[group])
    context = s.context_for(name, frame)[0]
    return _fill(frame, context)


def extract_rules_for_function(
    doc: ErcDocument, fn: FunctionSpec, group: str, gateway: Gateway, log_: ExtractionLog | None = None
) -> list[ErcRule]:
    if group not in EXTRACTION_GROUPS:
        raise ValueError(f"group must be one of {', '.join(EXTRACTION_GROUPS)}")
    s = _Session(doc, gateway, log_)
    prompt = _rules_prompt(s, group, fn.declaration(), f"the function {fn.name}()", fn.name)
    return _build_rules(s, s.ask(fn.name, group, prompt), group, fn.name, "function")


def extract_event_rules(
    doc: ErcDocument, ev: EventSpec, gateway: Gateway, log_: ExtractionLog | None = None
) -> list[ErcRule]:
    s = _Session(doc, gateway, log_)
    prompt = _rules_prompt(s, "EP", ev.declaration(), f"the event {ev.name}: when it must or must not be emitted",
                           ev.name)
    return _build_rules(s, s.ask(ev.name, "EP", prompt), "EP", ev.name, "event", event=ev.name)


def _decl_rule(erc: str, spec: FunctionSpec | EventSpec) -> ErcRule:
    decl = spec.declaration()
    is_event = isinstance(spec, EventSpec)
    return ErcRule(
        id=f"{erc.lower()}.{spec.name}.decl", group="DECL",
        content_category="logging" if is_event else "usage", impact="low" if is_event else "medium",
        scope="event" if is_event else "function", text=decl, payload=DeclPayload(decl),
    )


def build_ruleset(doc: ErcDocument, gateway: Gateway, log_: ExtractionLog | None = None) -> ErcRuleSet:
    """Interface, then four rule prompts per function, then one per event. All rules pending."""
    log_ = log_ if log_ is not None else ExtractionLog()
    functions, events = extract_interface(doc, gateway, log_)
    if not functions:
        log_.warnings.append("no function declarations found")
        log.warning("%s: no function declarations found", doc.erc_id)

    def run(job):
        kind, spec, group = job
        if kind == "function":
            return extract_rules_for_function(doc, spec, group, gateway, log_)
        return extract_event_rules(doc, spec, gateway, log_)

    jobs = [("function", fn, g) for fn in functions for g in EXTRACTION_GROUPS]
    jobs += [("event", ev, "EP") for ev in events]
    with ThreadPoolExecutor(max_workers=gateway.config.max_in_flight) as pool:
        results = list(pool.map(run, jobs))

    by_fn: dict[str, list[ErcRule]] = {fn.name: [_decl_rule(doc.erc_id, fn)] for fn in functions}
    by_ev: dict[str, list[ErcRule]] = {ev.name: [_decl_rule(doc.erc_id, ev)] for ev in events}
    for (kind, spec, _group), rules in zip(jobs, results, strict=False):
        (by_fn if kind == "function" else by_ev)[spec.name].extend(rules)
    # log entries arrive in completion order; keep the sidecar deterministic
    order = {("*", "functions"): 0, ("*", "events"): 1}
    for i, (_kind, spec, group) in enumerate(jobs):
        order.setdefault((spec.name, group), i + 2)
    log_.entries.sort(key=lambda e: order.get((e.subject, e.group), len(order) + 2))
    log_.rejections.sort()

    return ErcRuleSet(
        erc_id=doc.erc_id,
        functions=tuple(FunctionSpec(f.name, f.params, f.returns, f.optional_flag, tuple(by_fn[f.name]))
                        for f in functions),
        events=tuple(EventSpec(e.name, e.params, tuple(by_ev[e.name])) for e in events),
    )

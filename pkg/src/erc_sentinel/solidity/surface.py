"""Binding an ERC rule set to a contract, and the static declaration checks."""

from __future__ import annotations

from dataclasses import dataclass

from ..rules.model import ErcRule, ErcRuleSet, EventSpec, FunctionSpec
from .callgraph import linearization
from .model import ContractModel, EventDef, FieldDef, FunctionDef, ModelWarning, Param
from .signature import Declaration, getter_signature, normalize_type, parse_declaration

DECL_KINDS = ("missing-function", "signature-mismatch", "missing-event", "event-param-mismatch", "missing-indexed")


@dataclass(frozen=True)
class DeclFinding:
    rule_id: str
    kind: str
    detail: str
    location: int | None = None
    impact: str = "medium"
    subject: str = ""  # function or event name


def _spec_types(spec: FunctionSpec) -> tuple[str, ...]:
    return tuple(normalize_type(p.type) for p in spec.params)


def _public(f: FunctionDef) -> bool:
    return f.visibility in ("public", "external") and f.kind == "function"


def getter_function(fd: FieldDef) -> FunctionDef:
    """The compiler-generated accessor of a public state variable, as a FunctionDef."""
    params, ret = getter_signature(fd.type)
    return FunctionDef(
        name=fd.name, owner=fd.owner, kind="function", visibility="public",
        params=tuple(Param(t, None) for t in params), returns=(Param(ret, None),),
        modifiers=(), state_mutability="view", span=fd.span, getter_of=fd.name,
    )


def select_contract(model: ContractModel, rules: ErcRuleSet) -> str | None:
    """The contract to audit: the one whose linearization binds the most ERC functions.

    Interfaces and libraries never qualify. Ties go to the most derived
    candidate, then to the one declared last in the file.
    """
    names = {f.name for f in rules.functions}
    best, best_score = None, -1
    for decl in model.contracts:
        if decl.kind in ("interface", "library"):
            continue
        found: set[str] = set()
        for k in linearization(model, decl.name):
            found.update(f.name for f in model.functions_of(k) if f.has_body and _public(f))
            found.update(fd.name for fd in model.fields_of(k) if fd.visibility == "public")
        score = len(names & found)
        if score > best_score or (score == best_score and best is not None):
            # later declarations win ties; a derived contract always comes after its bases
            best, best_score = decl.name, score
    return best


def _bind(model: ContractModel, chain: list[str], spec: FunctionSpec, warnings: list) -> list[FunctionDef]:
    want = _spec_types(spec)
    for k in chain:
        cands = [f for f in model.functions_of(k)
                 if f.name == spec.name and f.arity == spec.arity and f.has_body and _public(f)]
        if len(cands) > 1:
            exact = [f for f in cands if tuple(normalize_type(p.type) for p in f.params) == want]
            cands = exact or cands
        if len(cands) > 1:
            warnings.append(ModelWarning(cands[0].span[0], "ambiguous-overload",
                                         f"{spec.name}/{spec.arity} matches {len(cands)} definitions in {k}"))
        if cands:
            return cands
        for fd in model.fields_of(k):
            if fd.name == spec.name and fd.visibility == "public":
                getter = getter_function(fd)
                if getter.arity == spec.arity:
                    return [getter]
    return []


def match_erc_surface(
    model: ContractModel, rules: ErcRuleSet, contract: str | None = None, warnings: list | None = None
) -> list[tuple[FunctionSpec, FunctionDef | None]]:
    """Map each rule-set function to its most-derived definition in ``contract``.

    Public state variables bind through their generated getter (a synthesized
    :class:`FunctionDef` with ``getter_of`` set). An ambiguous overload yields
    one pair per candidate and a warning appended to ``warnings``.
    """
    warnings = [] if warnings is None else warnings
    contract = contract or select_contract(model, rules)
    chain = linearization(model, contract) if contract else []
    out: list[tuple[FunctionSpec, FunctionDef | None]] = []
    for spec in rules.functions:
        found = _bind(model, chain, spec, warnings)
        if found:
            out.extend((spec, f) for f in found)
        else:
            out.append((spec, None))
    return out


def _decl_rules(rules) -> list[ErcRule]:
    return [r for r in rules if r.group == "DECL"]


def _expected(rule: ErcRule, fallback: str) -> Declaration:
    try:
        return parse_declaration(rule.payload.expected_signature)
    except ValueError:
        return parse_declaration(fallback)


def _find_event(model: ContractModel, chain: list[str], name: str) -> EventDef | None:
    for k in chain:
        for ev in model.events_of(k):
            if ev.name == name:
                return ev
    # file-level events, or events declared in an unrelated interface
    return next((ev for ev in model.events if ev.name == name and ev.owner not in chain), None)


def _fmt(name: str, types) -> str:
    return f"{name}({','.join(types)})"


def _check_function(model, chain, spec: FunctionSpec, binding, rule: ErcRule, taken=frozenset()):
    expected = _expected(rule, spec.declaration())
    if binding is None:
        same_name = [f for k in chain for f in model.functions_of(k)
                     if f.name == spec.name and _public(f) and f.has_body and f.arity not in taken]
        if same_name:
            f = same_name[0]
            got = _fmt(f.name, (normalize_type(p.type) for p in f.params))
            return DeclFinding(rule.id, "signature-mismatch",
                               f"expected {_fmt(spec.name, expected.param_types)}, found {got}",
                               f.span[0], rule.impact, spec.name)
        if spec.optional_flag:
            return None
        return DeclFinding(rule.id, "missing-function",
                           f"{_fmt(spec.name, expected.param_types)} is not implemented",
                           None, rule.impact, spec.name)
    got_params = tuple(normalize_type(p.type) for p in binding.params)
    if got_params != expected.param_types:
        return DeclFinding(rule.id, "signature-mismatch",
                           f"expected {_fmt(spec.name, expected.param_types)}, found {_fmt(binding.name, got_params)}",
                           binding.span[0], rule.impact, spec.name)
    got_returns = tuple(normalize_type(p.type) for p in binding.returns)
    if expected.returns and got_returns != expected.returns:
        shown = ",".join(got_returns) or "nothing"
        return DeclFinding(rule.id, "signature-mismatch",
                           f"{spec.name} returns {shown}, expected {','.join(expected.returns)}",
                           binding.span[0], rule.impact, spec.name)
    return None


def _check_event(model, chain, spec: EventSpec, rule: ErcRule) -> DeclFinding | None:
    expected = _expected(rule, spec.declaration())
    ev = _find_event(model, chain, spec.name)
    if ev is None:
        return DeclFinding(rule.id, "missing-event", f"event {_fmt(spec.name, expected.param_types)} is not declared",
                           None, rule.impact, spec.name)
    got = tuple(normalize_type(p.type) for p in ev.params)
    if got != expected.param_types:
        return DeclFinding(rule.id, "event-param-mismatch",
                           f"expected {_fmt(spec.name, expected.param_types)}, found {_fmt(ev.name, got)}",
                           ev.decl_line, rule.impact, spec.name)
    missing = [p.name or f"#{i}" for i, (p, a) in enumerate(zip(expected.params, ev.params, strict=False)) if p.indexed and not a.indexed]
    if missing:
        return DeclFinding(rule.id, "missing-indexed", f"{spec.name}: parameter(s) {', '.join(missing)} must be indexed",
                           ev.decl_line, rule.impact, spec.name)
    extra = [p.name or f"#{i}" for i, (p, a) in enumerate(zip(expected.params, ev.params, strict=False)) if a.indexed and not p.indexed]
    if extra:
        return DeclFinding(rule.id, "event-param-mismatch", f"{spec.name}: parameter(s) {', '.join(extra)} must not be indexed",
                           ev.decl_line, rule.impact, spec.name)
    return None


def check_declarations(model: ContractModel, rules: ErcRuleSet, contract: str | None = None) -> list[DeclFinding]:
    """Exact checks for every DECL rule: presence, parameter and return types, event layout."""
    contract = contract or select_contract(model, rules)
    chain = linearization(model, contract) if contract else []
    bound: dict[int, FunctionDef | None] = {}
    for spec, fn in match_erc_surface(model, rules, contract):
        bound.setdefault(id(spec), fn)
    findings: list[DeclFinding] = []
    for spec in rules.functions:
        # same-name definitions whose arity belongs to another overload are not mismatches
        taken = {s.arity for s in rules.functions if s.name == spec.name and s is not spec}
        for rule in _decl_rules(spec.rules):
            f = _check_function(model, chain, spec, bound.get(id(spec)), rule, taken)
            if f:
                findings.append(f)
    for spec in rules.events:
        for rule in _decl_rules(spec.rules):
            f = _check_event(model, chain, spec, rule)
            if f:
                findings.append(f)
    return findings

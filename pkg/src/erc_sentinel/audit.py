"""Full contract audits: static declaration checks plus one LLM probe per (function, rule)."""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import BudgetExceeded, NotApproved
from .llm import Gateway
from .prompts import PromptOptions, PromptTask, estimate_tokens, parse_verdict, plan_compound, \
    specialize_prompt, with_strict_format
from .report import AuditReport, Finding, Uncertain
from .rules.model import ErcRule, ErcRuleSet
from .rules.validate import validate_ruleset
from .solidity.callgraph import linearization
from .solidity.model import ContractModel, FunctionDef
from .solidity.parser import parse_contract
from .solidity.slicing import CodeSlice, slice_public_function
from .solidity.surface import check_declarations, match_erc_surface, select_contract


@dataclass(frozen=True)
class AuditConfig:
    contract: str | None = None  # audit this contract instead of the auto-selected one
    budget: int | None = None  # prompt budget; defaults to the gateway's input budget
    options: PromptOptions = PromptOptions()
    workers: int | None = None  # defaults to the gateway's in-flight limit


@dataclass
class _Job:
    rule: ErcRule
    fn: FunctionDef
    slice: CodeSlice
    findings: list[Finding] = field(default_factory=list)
    uncertain: list[Uncertain] = field(default_factory=list)
    prompts: int = 0
    in_tokens: int = 0
    out_tokens: int = 0


def _constructor(model: ContractModel, target: str) -> FunctionDef | None:
    for k in linearization(model, target):
        for f in model.functions_of(k):
            if f.kind == "constructor" and f.has_body:
                return f
    return None


def _plan(model: ContractModel, rules: ErcRuleSet, target: str, warnings: list) -> list[_Job]:
    bindings = match_erc_surface(model, rules, target, warnings)
    slices: dict[int, CodeSlice] = {}

    def slice_of(fn: FunctionDef) -> CodeSlice:
        if id(fn) not in slices:
            slices[id(fn)] = slice_public_function(model, fn, target)
        return slices[id(fn)]

    jobs: list[_Job] = []
    probed: list[FunctionDef] = []
    for spec, fn in bindings:
        # absent functions only get their DECL finding; compiler-made getters are correct by construction
        if fn is None or fn.getter_of is not None:
            continue
        if fn not in probed:
            probed.append(fn)
        for rule in spec.rules:
            if not rule.is_static:
                jobs.append(_Job(rule, fn, slice_of(fn)))

    ctor = _constructor(model, target)
    if ctor is not None:
        probed.append(ctor)
    wide = [r for _, r in rules.iter_rules() if r.scope in ("contract", "event") and not r.is_static]
    for rule in wide:
        for fn in probed:
            jobs.append(_Job(rule, fn, slice_of(fn)))
    return jobs


class _Runner:
    def __init__(self, gateway: Gateway, budget: int, options: PromptOptions, target: str):
        self.gateway = gateway
        self.budget = budget
        self.options = options
        self.target = target

    def _ask(self, job: _Job, task: PromptTask):
        """Send a task, retrying once with a stricter format reminder."""
        for attempt in (task, None):
            if attempt is None:
                attempt = with_strict_format(task, self.budget)
            response = self.gateway.complete(attempt.messages)
            job.prompts += 1
            job.in_tokens += attempt.token_estimate
            job.out_tokens += estimate_tokens(response)
            verdict = parse_verdict(response, task.stage)
            if verdict.parsed:
                return verdict
        return verdict

    def _finding(self, job: _Job, explanation: str, trace=None) -> Finding:
        r = job.rule
        return Finding(r.id, r.impact, r.content_category, self.target, job.fn.name, job.fn.span[0],
                       explanation, "llm", r.text, trace)

    def run(self, job: _Job) -> _Job:
        fn_name = job.fn.name
        try:
            if job.rule.compound and self.options.decompose:
                cond_task, build_action = plan_compound(job.rule, job.slice, self.budget, self.options)
                cond = self._ask(job, cond_task)
                if cond.outcome == "condition-absent":
                    return job
                if cond.outcome != "condition-present":
                    job.uncertain.append(Uncertain(job.rule.id, fn_name, "unparseable response to condition probe"))
                    return job
                action = self._ask(job, build_action())
                verdict, trace = action, (cond.outcome, action.outcome)
            else:
                verdict = self._ask(job, specialize_prompt(job.rule, job.slice, self.budget, self.options))
                trace = None
        except BudgetExceeded as exc:
            job.uncertain.append(Uncertain(job.rule.id, fn_name, f"BudgetExceeded: {exc}"))
            return job
        if verdict.outcome == "violation":
            job.findings.append(self._finding(job, verdict.explanation, trace))
        elif verdict.outcome == "uncertain":
            job.uncertain.append(Uncertain(job.rule.id, fn_name, "unparseable response"))
        return job


def audit_contract(
    source: str,
    rules: ErcRuleSet,
    gateway: Gateway,
    config: AuditConfig = AuditConfig(),
    path: str = "<memory>",
) -> AuditReport:
    """Audit one Solidity file against an approved rule set."""
    issues = validate_ruleset(rules)
    if issues:
        listed = "; ".join(f"{i.rule_id}: {i.reason}" for i in issues[:5])
        more = f" (+{len(issues) - 5} more)" if len(issues) > 5 else ""
        raise NotApproved(f"rule set {rules.erc_id} is not ready for auditing: {listed}{more}")

    model = parse_contract(source)
    target = config.contract or select_contract(model, rules)
    if target is None:
        raise ValueError("the file declares no contract that could implement the standard")
    if model.contract(target) is None:
        raise ValueError(f"no contract named {target!r}")

    static = [
        Finding(d.rule_id, d.impact, rules.rule(d.rule_id).content_category, target, d.subject, d.location,
                d.detail, "static", rules.rule(d.rule_id).text)
        for d in check_declarations(model, rules, target)
    ]

    warnings: list = list(model.warnings)
    jobs = _plan(model, rules, target, warnings)
    runner = _Runner(gateway, config.budget or gateway.config.input_budget, config.options, target)
    workers = config.workers or gateway.config.max_in_flight
    with ThreadPoolExecutor(max_workers=workers) as pool:
        done = list(pool.map(runner.run, jobs))

    seen: set = set()
    semantic: list[Finding] = []
    for job in done:
        for f in job.findings:
            if f.key not in seen:  # one finding per (rule, function)
                seen.add(f.key)
                semantic.append(f)
    uncertain = sorted({u for job in done for u in job.uncertain},
                       key=lambda u: (u.function or "", u.rule_id, u.reason))
    findings = tuple(sorted(static + semantic, key=Finding.sort_key))

    model_name = gateway.config.model or ("mock" if gateway.is_mock else "")
    return AuditReport(
        path=path,
        sha256=hashlib.sha256(source.encode("utf-8")).hexdigest(),
        ruleset=rules.erc_id,
        model=model_name,
        temperature=gateway.config.temperature,
        findings=findings,
        uncertain=tuple(uncertain),
        prompts=sum(j.prompts for j in done),
        in_tokens=sum(j.in_tokens for j in done),
        out_tokens=sum(j.out_tokens for j in done),
        warnings=tuple(f"line {w.line}: {w.message}" if w.line else w.message for w in warnings),
    )

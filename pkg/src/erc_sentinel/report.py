"""Audit results, their text/JSON renderings, and report diffs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import RulesetMismatch
from .rules.model import IMPACTS

SCHEMA = "erc-sentinel/report/v1"


@dataclass(frozen=True)
class Finding:
    rule_id: str
    impact: str
    content_category: str
    contract: str
    function: str | None
    line: int | None
    explanation: str
    source: str  # "static" for DECL rules, "llm" otherwise
    rule_text: str = ""
    stage_trace: tuple[str, str] | None = None  # (condition verdict, action verdict)

    @property
    def key(self) -> tuple[str, str, str]:
        return (self.rule_id, self.contract, self.function or "")

    def sort_key(self):
        return (self.line or 0, self.function or "", self.rule_id)


@dataclass(frozen=True)
class Uncertain:
    rule_id: str
    function: str | None
    reason: str


@dataclass(frozen=True)
class AuditReport:
    path: str
    sha256: str
    ruleset: str
    model: str
    temperature: float
    findings: tuple[Finding, ...]
    uncertain: tuple[Uncertain, ...] = ()
    prompts: int = 0
    in_tokens: int = 0
    out_tokens: int = 0
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def summary(self) -> dict[str, int]:
        counts = {impact: 0 for impact in IMPACTS}
        for f in self.findings:
            counts[f.impact] += 1
        return counts

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "contract": {"path": self.path, "sha256": self.sha256},
            "ruleset": self.ruleset,
            "model": self.model,
            "summary": self.summary,
            "findings": [
                {
                    "rule_id": f.rule_id,
                    "impact": f.impact,
                    "category": f.content_category,
                    "contract": f.contract,
                    "function": f.function,
                    "line": f.line,
                    "explanation": f.explanation,
                    "source": f.source,
                }
                for f in self.findings
            ],
            "uncertain": [{"rule_id": u.rule_id, "function": u.function, "reason": u.reason} for u in self.uncertain],
            "usage": {"prompts": self.prompts, "in_tokens": self.in_tokens, "out_tokens": self.out_tokens},
        }


def _render_text(report: AuditReport) -> str:
    s = report.summary
    out = [
        f"Audit of {report.path} against {report.ruleset}",
        f"sha256 {report.sha256}",
        f"Findings: {len(report.findings)} (high {s['high']}, medium {s['medium']}, low {s['low']})",
    ]
    for impact in IMPACTS:
        group = [f for f in report.findings if f.impact == impact]
        if not group:
            continue
        out.append("")
        out.append(f"== {impact.upper()} ==")
        for f in group:
            where = f.contract + (f".{f.function}" if f.function else "") + (f" line {f.line}" if f.line else "")
            out.append(f"[{f.rule_id}] {where} ({f.content_category}, {f.source})")
            if f.rule_text:
                out.append(f"  rule: {f.rule_text.strip()}")
            for line in f.explanation.strip().splitlines() or [""]:
                out.append(f"  {line}")
    if report.uncertain:
        out.append("")
        out.append("== UNCERTAIN ==")
        for u in report.uncertain:
            out.append(f"[{u.rule_id}] {u.function or '-'}: {u.reason}")
    out.append("")
    out.append(f"Prompts: {report.prompts}, input tokens ~{report.in_tokens}, output tokens ~{report.out_tokens}")
    return "\n".join(out) + "\n"


def render_report(report: AuditReport, fmt: str = "text") -> str:
    if fmt == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=False) + "\n"
    if fmt == "text":
        return _render_text(report)
    raise ValueError(f"unknown report format {fmt!r}")


def diff_reports(a: AuditReport, b: AuditReport) -> tuple[list[tuple], list[tuple]]:
    """Finding keys ``(rule_id, contract, function)`` added in ``b`` and removed from ``a``."""
    if a.ruleset != b.ruleset:
        raise RulesetMismatch(f"cannot compare reports for {a.ruleset} and {b.ruleset}")
    ka = {f.key for f in a.findings}
    kb = {f.key for f in b.findings}
    return sorted(kb - ka), sorted(ka - kb)

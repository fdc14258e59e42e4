"""Per-function code slices: the lines an auditor needs to judge one public function."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .callgraph import ordered_related_code
from .model import ContractModel, FunctionDef

# Reason precedence when a line qualifies more than once (comment-only lines
# are always "comment").
REASONS = ("anchor-fn", "callee", "field", "contract-header", "closing-brace", "comment")


@dataclass(frozen=True)
class CodeSlice:
    anchor: FunctionDef
    lines: tuple[int, ...]
    reasons: dict[int, str] = field(compare=False)
    rendered: str
    contract: str  # contract the slice was computed for (anchor owner or audit context)

    def __len__(self) -> int:
        return len(self.lines)

    def dump(self) -> str:
        """Debug rendering: a header line, then ``<orig-line-no>|<text>`` per line."""
        header = f"// slice: {self.anchor.owner}.{self.anchor.name} ({len(self.lines)} lines)"
        body = [f"{n}|{text}" for n, text in zip(self.lines, self.rendered.split("\n"), strict=False)]
        return "\n".join([header, *body])

    def to_json(self) -> str:
        payload = {
            "contract": self.anchor.owner,
            "function": self.anchor.name,
            "lines": [{"line": n, "reason": self.reasons[n]} for n in self.lines],
        }
        return json.dumps(payload, indent=2)


def _span(span: tuple[int, int]) -> range:
    return range(span[0], span[1] + 1)


def slice_public_function(model: ContractModel, fn: FunctionDef, context: str | None = None) -> CodeSlice:
    """Slice ``fn`` with its transitive callees, touched fields, headers and comments.

    ``context`` names the most-derived contract being audited, so calls from
    an inherited function bind to that contract's overrides.
    """
    if fn.visibility not in ("public", "external"):
        raise ValueError(f"{fn.qualname} is not a public function")

    candidates: dict[str, set[int]] = {r: set() for r in REASONS}
    comment_lines = model.comment_lines
    header_owners: list[str] = []

    def add_function(f: FunctionDef, reason: str) -> None:
        candidates[reason].update(_span(f.span))
        if f.leading_comment_span:
            candidates["comment"].update(_span(f.leading_comment_span))
        if f.owner not in header_owners:
            header_owners.append(f.owner)

    if fn.getter_of is not None:
        candidates["anchor-fn"].update(_span(fn.span))
        header_owners.append(fn.owner)
        callees, fields = [], []
    else:
        callees, fields = ordered_related_code(model, fn, context)
        add_function(fn, "anchor-fn")
        for callee in callees:
            add_function(callee, "callee")
    for fd in fields:
        candidates["field"].update(_span(fd.span))
        if fd.owner not in header_owners:
            header_owners.append(fd.owner)

    for name in header_owners:
        decl = model.contract(name)
        if decl is None:
            continue
        candidates["contract-header"].update(_span(decl.header_span))
        candidates["closing-brace"].add(decl.span[1])

    reasons: dict[int, str] = {}
    for reason in REASONS:
        for line in candidates[reason]:
            reasons.setdefault(line, reason)
    for line in list(reasons):
        if line in comment_lines:
            reasons[line] = "comment"

    lines = tuple(sorted(reasons))
    rendered = "\n".join(model.source_lines[n - 1] for n in lines)
    return CodeSlice(anchor=fn, lines=lines, reasons=reasons, rendered=rendered, contract=context or fn.owner)

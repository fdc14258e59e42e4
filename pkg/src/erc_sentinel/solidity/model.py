"""Parsed representation of a single Solidity file.

Line numbers are 1-based and spans are inclusive ``(first, last)`` pairs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

Span = tuple[int, int]


@dataclass(frozen=True)
class ContractDecl:
    name: str
    kind: str  # contract | interface | library | abstract
    parents: tuple[str, ...]
    header_span: Span
    span: Span  # header through closing brace
    using_for: tuple[tuple[str, str], ...] = ()  # (library, target type or "*")


@dataclass(frozen=True)
class CallSite:
    """A call-shaped expression inside a function body or header.

    ``qualifier`` is None for bare calls, ``"this"``/``"super"`` for those
    receivers, a contract/library name for ``Name.f(...)``, and ``"."`` for
    any other member call (``expr.f(...)``), which can only bind through a
    ``using ... for`` directive.
    """

    name: str
    arity: int
    line: int
    qualifier: str | None = None


@dataclass(frozen=True)
class Param:
    type: str
    name: str | None
    indexed: bool = False


@dataclass(frozen=True, eq=False)
class FunctionDef:
    name: str
    owner: str
    kind: str  # function | constructor | fallback | receive | modifier
    visibility: str  # public | external | internal | private
    params: tuple[Param, ...]
    returns: tuple[Param, ...]
    modifiers: tuple[str, ...]  # header invocations that are not keywords
    state_mutability: str | None
    span: Span  # signature through closing brace (or ';')
    leading_comment_span: Span | None = None
    has_body: bool = True
    virtual: bool = False
    calls: tuple[CallSite, ...] = ()
    identifiers: tuple[tuple[str, int], ...] = ()  # candidate field reads/writes (name, line)
    emits: tuple[tuple[str, int], ...] = ()  # (event name, line)
    getter_of: str | None = None  # set for synthesized public-variable getters

    @property
    def arity(self) -> int:
        return len(self.params)

    @property
    def body_span(self) -> Span:
        return self.span

    @property
    def qualname(self) -> str:
        return f"{self.owner}.{self.name}"

    def __repr__(self) -> str:
        return f"<FunctionDef {self.qualname}/{self.arity} lines {self.span[0]}-{self.span[1]}>"


@dataclass(frozen=True, eq=False)
class FieldDef:
    name: str
    owner: str
    type: str
    visibility: str
    decl_line: int
    span: Span
    constant: bool = False

    def __repr__(self) -> str:
        return f"<FieldDef {self.owner}.{self.name} line {self.decl_line}>"


@dataclass(frozen=True)
class EventDef:
    name: str
    owner: str | None
    params: tuple[Param, ...]
    decl_line: int
    anonymous: bool = False


@dataclass(frozen=True)
class ModelWarning:
    line: int | None
    kind: str  # unsupported-construct | unresolved-call | ambiguous-call | unknown-parent
    message: str


@dataclass(frozen=True, eq=False)
class ContractModel:
    source_lines: tuple[str, ...]
    contracts: tuple[ContractDecl, ...]
    functions: tuple[FunctionDef, ...]
    modifiers: tuple[FunctionDef, ...]
    fields: tuple[FieldDef, ...]
    events: tuple[EventDef, ...]
    pragma: str | None = None
    comment_lines: frozenset[int] = frozenset()  # lines holding only comment text
    type_names: frozenset[str] = frozenset()  # structs, enums, contracts, UDVTs
    warnings: tuple[ModelWarning, ...] = field(default=())

    def contract(self, name: str) -> ContractDecl | None:
        return next((c for c in self.contracts if c.name == name), None)

    def functions_of(self, contract: str) -> list[FunctionDef]:
        return [f for f in self.functions if f.owner == contract]

    def find_functions(self, name: str, contract: str | None = None) -> list[FunctionDef]:
        return [f for f in self.functions if f.name == name and (contract is None or f.owner == contract)]

    def fields_of(self, contract: str) -> list[FieldDef]:
        return [f for f in self.fields if f.owner == contract]

    def events_of(self, contract: str) -> list[EventDef]:
        return [e for e in self.events if e.owner == contract]

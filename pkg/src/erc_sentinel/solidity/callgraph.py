"""Call resolution and related-code computation over a :class:`ContractModel`.

Calls resolve by name and arity along the inheritance linearization of the
calling function's contract (or of an explicit ``context`` contract, the
most-derived contract under audit), so overrides win. Calls on other
addresses are not related code and are dropped; calls that look internal but
match nothing become warnings.
"""

from __future__ import annotations

from collections import deque
from dataclasses import replace
from functools import lru_cache

from .model import ContractModel, FieldDef, FunctionDef, ModelWarning
from .signature import getter_signature


class _Resolver:
    def __init__(self, model: ContractModel):
        self.model = model
        self.contracts = {c.name: c for c in model.contracts}
        self.functions: dict[str, list[FunctionDef]] = {}
        for f in model.functions:
            self.functions.setdefault(f.owner, []).append(f)
        self.modifiers: dict[str, list[FunctionDef]] = {}
        for m in model.modifiers:
            self.modifiers.setdefault(m.owner, []).append(m)
        self.fields: dict[str, list[FieldDef]] = {}
        for fd in model.fields:
            self.fields.setdefault(fd.owner, []).append(fd)
        self.event_names = {e.name for e in model.events}
        self._lin: dict[str, list[str]] = {}
        self._direct: dict[tuple[int, str | None], tuple[list[FunctionDef], list[FieldDef]]] = {}
        self.warnings: list[ModelWarning] = []

    # -- inheritance -----------------------------------------------------------

    def linearization(self, name: str) -> list[str]:
        """C3 linearization, most derived first; unknown parents are skipped."""
        if name in self._lin:
            return self._lin[name]
        self._lin[name] = [name]  # guards against inheritance cycles
        decl = self.contracts.get(name)
        parents = [p for p in decl.parents if p in self.contracts] if decl else []
        # Solidity lists bases from "most base-like" to "most derived".
        seqs = [list(self.linearization(p)) for p in reversed(parents)] + [list(reversed(parents))]
        result = [name]
        while True:
            seqs = [s for s in seqs if s]
            if not seqs:
                break
            for seq in seqs:
                head = seq[0]
                if not any(head in s[1:] for s in seqs):
                    break
            else:
                # Inconsistent hierarchy: fall back to depth-first order.
                for s in seqs:
                    result.extend(x for x in s if x not in result)
                break
            result.append(head)
            for s in seqs:
                if s and s[0] == head:
                    s.pop(0)
        self._lin[name] = result
        return result

    def scope(self, fn: FunctionDef, context: str | None) -> str:
        if context and context in self.contracts and fn.owner in self.linearization(context):
            return context
        return fn.owner

    # -- lookups ---------------------------------------------------------------

    def _lookup(self, chain: list[str], name: str, arity: int, table: dict) -> list[FunctionDef]:
        for k in chain:
            found = [f for f in table.get(k, ()) if f.name == name and (arity < 0 or f.arity == arity)]
            if found:
                return found
        return []

    def _field(self, chain: list[str], name: str) -> FieldDef | None:
        for k in chain:
            for fd in self.fields.get(k, ()):
                if fd.name == name:
                    return fd
        return None

    def _implementations(self, decl: FunctionDef, context: str | None) -> list[FunctionDef]:
        """Bodied overrides of a body-less declaration."""
        if context and context in self.contracts:
            found = [f for f in self._lookup(self.linearization(context), decl.name, decl.arity, self.functions)
                     if f.has_body]
            if found:
                return found
        impls = []
        for c in self.model.contracts:
            if c.name != decl.owner and decl.owner in self.linearization(c.name):
                impls.extend(f for f in self.functions.get(c.name, ())
                             if f.name == decl.name and f.arity == decl.arity and f.has_body)
        return impls

    def _using_libraries(self, chain: list[str]) -> list[str]:
        libs = []
        for k in chain:
            decl = self.contracts.get(k)
            if decl:
                libs.extend(lib for lib, _ in decl.using_for if lib not in libs)
        return libs

    # -- resolution ------------------------------------------------------------

    def direct(self, fn: FunctionDef, context: str | None = None) -> tuple[list[FunctionDef], list[FieldDef]]:
        """Direct callees (modifiers included) and public fields reached through getter calls."""
        key = (id(fn), context)
        if key in self._direct:
            return self._direct[key]
        scope = self.scope(fn, context)
        chain = self.linearization(scope)
        callees: list[FunctionDef] = []
        getter_fields: list[FieldDef] = []

        def add(cands: list[FunctionDef], line: int, label: str) -> None:
            for c in cands:
                if not c.has_body and c.kind != "modifier":
                    impls = self._implementations(c, context)
                    if len(impls) == 1:
                        c = impls[0]
                    else:
                        why = "no in-file override" if not impls else f"{len(impls)} candidate overrides"
                        self.warnings.append(ModelWarning(
                            line, "unresolved-call", f"{fn.qualname}: virtual call {label} dropped ({why})"))
                        continue
                if c not in callees:
                    callees.append(c)

        for call in fn.calls:
            label = f"{call.name}/{call.arity}"
            if call.qualifier in (None, "this"):
                cands = self._lookup(chain, call.name, call.arity, self.functions)
                if cands:
                    if len(cands) > 1:
                        self.warnings.append(ModelWarning(
                            call.line, "ambiguous-call", f"{fn.qualname}: {label} matches {len(cands)} overloads"))
                    add(cands, call.line, label)
                    continue
                fd = self._field(chain, call.name)
                if fd is not None and fd.visibility == "public" and call.arity == len(getter_signature(fd.type)[0]):
                    if fd not in getter_fields:
                        getter_fields.append(fd)
                    continue
                if call.name in self.model.type_names or call.name in self.event_names:
                    continue  # type conversion, struct constructor, or old-style emit
                self.warnings.append(ModelWarning(call.line, "unresolved-call", f"{fn.qualname}: {label} not found"))
            elif call.qualifier == "super":
                lin = self.linearization(scope)
                idx = lin.index(fn.owner) if fn.owner in lin else 0
                add(self._lookup(lin[idx + 1:], call.name, call.arity, self.functions), call.line, label)
            elif call.qualifier == ".":
                for lib in self._using_libraries(chain):
                    cands = self._lookup([lib], call.name, call.arity + 1, self.functions)
                    if cands:
                        add(cands, call.line, label)
                        break
            elif call.qualifier in self.contracts:
                target = self.contracts[call.qualifier]
                cands = self._lookup(self.linearization(target.name), call.name, call.arity, self.functions)
                if target.kind == "library" or call.qualifier in chain:
                    add(cands, call.line, label)
                # Name.f() on a non-base contract type is an external call.

        for mod_name in fn.modifiers:
            mods = self._lookup(chain, mod_name, -1, self.modifiers)
            for m in mods[:1]:
                if m.has_body:
                    if m not in callees:
                        callees.append(m)
                else:
                    impls = [x for x in self._lookup(self.linearization(context or scope), mod_name, -1, self.modifiers)
                             if x.has_body]
                    if impls and impls[0] not in callees:
                        callees.append(impls[0])

        self._direct[key] = (callees, getter_fields)
        return self._direct[key]

    def fields_of(self, fn: FunctionDef, context: str | None = None) -> list[FieldDef]:
        chain = self.linearization(self.scope(fn, context))
        found: list[FieldDef] = []
        for name, _line in fn.identifiers:
            fd = self._field(chain, name)
            if fd is not None and fd not in found:
                found.append(fd)
        for fd in self.direct(fn, context)[1]:
            if fd not in found:
                found.append(fd)
        return found


@lru_cache(maxsize=64)
def _resolver(model: ContractModel) -> _Resolver:
    return _Resolver(model)


def linearization(model: ContractModel, contract: str) -> list[str]:
    return list(_resolver(model).linearization(contract))


def direct_callees(model: ContractModel, fn: FunctionDef, context: str | None = None) -> set[FunctionDef]:
    """Functions and modifiers ``fn`` invokes directly, resolved in-file."""
    return set(_resolver(model).direct(fn, context)[0])


def _closure(model: ContractModel, fn: FunctionDef, context: str | None) -> list[FunctionDef]:
    """Functions reachable from ``fn`` over one or more call edges, in BFS order."""
    r = _resolver(model)
    seen: list[FunctionDef] = []
    queue = deque([fn])
    visited = set()
    while queue:
        cur = queue.popleft()
        for callee in r.direct(cur, context)[0]:
            if callee not in visited:
                visited.add(callee)
                seen.append(callee)
                queue.append(callee)
    return seen


def related_code(
    model: ContractModel, fn: FunctionDef, context: str | None = None
) -> tuple[set[FunctionDef], set[FieldDef]]:
    """Transitive callees of ``fn`` and every contract field they or ``fn`` touch.

    Recursion is fine: the closure is a fixpoint, and ``fn`` appears among its
    own callees only when it sits on a call cycle.
    """
    r = _resolver(model)
    callees = _closure(model, fn, context)
    fields: set[FieldDef] = set()
    for g in [fn, *callees]:
        fields.update(r.fields_of(g, context))
    return set(callees), fields


def ordered_related_code(
    model: ContractModel, fn: FunctionDef, context: str | None = None
) -> tuple[list[FunctionDef], list[FieldDef]]:
    """Same as :func:`related_code` but in deterministic discovery order."""
    r = _resolver(model)
    callees = _closure(model, fn, context)
    fields: list[FieldDef] = []
    for g in [fn, *callees]:
        for fd in r.fields_of(g, context):
            if fd not in fields:
                fields.append(fd)
    return callees, fields


def resolution_warnings(model: ContractModel) -> list[ModelWarning]:
    """Warnings from resolving every function in its own contract scope."""
    r = _Resolver(model)
    for fn in (*model.functions, *model.modifiers):
        r.direct(fn)
    seen, out = set(), []
    for w in r.warnings:
        if w not in seen:
            seen.add(w)
            out.append(w)
    return out


def with_resolution_warnings(model: ContractModel) -> ContractModel:
    return replace(model, warnings=model.warnings + tuple(resolution_warnings(model)))

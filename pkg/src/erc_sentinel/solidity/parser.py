"""Structural Solidity parser.

This is not a full grammar. It recognizes every top-level and contract-level
declaration, records line spans, and collects per-function facts (call
sites with arity, identifier uses, event emissions) that the call-graph and
slicing code needs. Statements inside bodies are only tokenized.
"""

from __future__ import annotations

import re

from ..errors import SoliditySyntaxError
from .lexer import COMMENT, IDENT, NUMBER, STRING, Token, tokenize
from .model import (
    CallSite,
    ContractDecl,
    ContractModel,
    EventDef,
    FieldDef,
    FunctionDef,
    ModelWarning,
    Param,
)
from .signature import normalize_type

VISIBILITY = {"public", "external", "internal", "private"}
MUTABILITY = {"pure", "view", "payable", "constant", "nonpayable"}
_FN_KEYWORDS = {"function", "constructor", "fallback", "receive", "modifier"}
_CONTRACT_KEYWORDS = {"contract", "interface", "library", "abstract"}
_LOCATIONS = {"memory", "storage", "calldata"}
_ELEMENTARY = re.compile(r"^(u?int\d*|bytes\d*|byte|address|bool|string|u?fixed(\d+x\d+)?|var)$")
# Call-shaped builtins and statements that never resolve to user functions.
_NOT_CALLS = {
    "require", "assert", "revert", "keccak256", "sha256", "sha3", "ripemd160", "ecrecover",
    "addmod", "mulmod", "selfdestruct", "suicide", "blockhash", "gasleft", "type", "payable",
    "return", "returns", "if", "while", "for", "new", "delete", "emit", "catch", "try", "unchecked",
    "mapping", "function", "this", "super", "do", "else",
}
_NON_FIELD_WORDS = {
    "msg", "block", "tx", "abi", "now", "this", "super", "true", "false", "return", "returns", "if",
    "else", "for", "while", "do", "break", "continue", "emit", "new", "delete", "memory", "storage",
    "calldata", "public", "private", "internal", "external", "pure", "view", "payable", "constant",
    "immutable", "unchecked", "assembly", "try", "catch", "wei", "gwei", "ether", "szabo", "finney",
    "seconds", "minutes", "hours", "days", "weeks", "years", "indexed", "mapping", "throw", "var",
}


def _is_elementary(word: str) -> bool:
    return bool(_ELEMENTARY.match(word))


def _join(tokens: list[Token]) -> str:
    out = ""
    for t in tokens:
        if out and (t.kind in (IDENT, NUMBER, STRING)) and (out[-1].isalnum() or out[-1] in "_$"):
            out += " "
        out += t.text
    return out


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.lines = tuple(source.split("\n"))
        if self.lines and self.lines[-1] == "" and source.endswith("\n"):
            self.lines = self.lines[:-1]
        all_tokens = tokenize(source)
        self.toks = [t for t in all_tokens if t.kind != COMMENT]
        code_lines = {ln for t in self.toks for ln in range(t.line, t.end_line + 1)}
        comment_lines = {ln for t in all_tokens if t.kind == COMMENT for ln in range(t.line, t.end_line + 1)}
        self.comment_lines = frozenset(comment_lines - code_lines)
        self.first_on_line: dict[int, int] = {}
        for idx, t in enumerate(self.toks):
            self.first_on_line.setdefault(t.line, idx)
        self.match = self._match_brackets()

        self.contracts: list[ContractDecl] = []
        self.functions: list[FunctionDef] = []
        self.modifiers: list[FunctionDef] = []
        self.fields: list[FieldDef] = []
        self.events: list[EventDef] = []
        self.type_names: set[str] = set()
        self.warnings: list[ModelWarning] = []
        self.pragma: str | None = None
        # Raw function records; facts are filled in after every type name is known.
        self._pending: list[dict] = []

    # -- helpers -------------------------------------------------------------

    def _match_brackets(self) -> dict[int, int]:
        pairs = {"(": ")", "[": "]", "{": "}"}
        stack: list[int] = []
        match: dict[int, int] = {}
        for i, t in enumerate(self.toks):
            if t.kind != "punct":
                continue
            if t.text in pairs:
                stack.append(i)
            elif t.text in (")", "]", "}"):
                if not stack:
                    raise SoliditySyntaxError(t.line, f"unmatched {t.text!r}")
                j = stack.pop()
                if pairs[self.toks[j].text] != t.text:
                    raise SoliditySyntaxError(t.line, f"expected {pairs[self.toks[j].text]!r} before {t.text!r}")
                match[j] = i
                match[i] = j
        if stack:
            t = self.toks[stack[-1]]
            raise SoliditySyntaxError(t.line, f"unclosed {t.text!r}")
        return match

    def _tok(self, i: int) -> Token:
        if i >= len(self.toks):
            last = self.toks[-1].line if self.toks else 1
            raise SoliditySyntaxError(last, "unexpected end of file")
        return self.toks[i]

    def _expect_ident(self, i: int, what: str) -> str:
        t = self._tok(i)
        if t.kind != IDENT:
            raise SoliditySyntaxError(t.line, f"expected {what}, found {t.text!r}")
        return t.text

    def _skip_to_semicolon(self, i: int) -> int:
        """Index of the ';' ending the construct starting at i (brackets skipped)."""
        while True:
            t = self._tok(i)
            if t.is_(";"):
                return i
            if t.kind == "punct" and t.text in "([{":
                i = self.match[i]
            i += 1

    def _leading_comment(self, line: int) -> tuple[int, int] | None:
        l, blanks = line - 1, 0
        while l >= 1 and l not in self.comment_lines and not self.lines[l - 1].strip():
            blanks += 1
            l -= 1
        if blanks > 1 or l < 1 or l not in self.comment_lines:
            return None
        end = l
        while l - 1 >= 1 and (l - 1) in self.comment_lines:
            l -= 1
        return (l, end)

    def _params(self, open_i: int) -> tuple[Param, ...]:
        close = self.match[open_i]
        out, cur = [], []
        i = open_i + 1
        while i < close:
            t = self.toks[i]
            if t.is_(","):
                out.append(cur)
                cur = []
                i += 1
                continue
            if t.kind == "punct" and t.text in "([{":
                j = self.match[i]
                cur.extend(self.toks[i:j + 1])
                i = j + 1
                continue
            cur.append(t)
            i += 1
        if cur or out:
            out.append(cur)
        params = []
        for toks in out:
            if not toks:
                raise SoliditySyntaxError(self.toks[open_i].line, "empty parameter")
            indexed = any(t.is_("indexed") for t in toks)
            words = [t for t in toks if not (t.kind == IDENT and t.text in _LOCATIONS | {"indexed"})]
            name = None
            if len(words) >= 2 and words[-1].kind == IDENT and words[-1].text != "payable":
                name = words[-1].text
                words = words[:-1]
            params.append(Param(normalize_type(_join(words)), name, indexed))
        return tuple(params)

    # -- top level -----------------------------------------------------------

    def parse(self) -> ContractModel:
        i = 0
        while i < len(self.toks):
            t = self.toks[i]
            if t.is_("pragma"):
                end = self._skip_to_semicolon(i)
                if self._tok(i + 1).is_("solidity"):
                    start = self.toks[i + 2].offset
                    self.pragma = self.source[start:self.toks[end].offset].strip()
                i = end + 1
            elif t.kind == IDENT and t.text in _CONTRACT_KEYWORDS:
                i = self._contract(i)
            elif t.is_("struct", "enum"):
                self.type_names.add(self._expect_ident(i + 1, "type name"))
                i = self.match[self._find(i, "{")] + 1
            elif t.is_("type"):
                self.type_names.add(self._expect_ident(i + 1, "type name"))
                i = self._skip_to_semicolon(i) + 1
            elif t.is_("function"):
                self.warnings.append(ModelWarning(t.line, "unsupported-construct", "free function skipped"))
                i = self._skip_function(i)
            elif t.is_(";"):
                i += 1
            elif t.kind == IDENT:
                # import, using, error, event, file-level constants
                i = self._skip_to_semicolon(i) + 1
            else:
                raise SoliditySyntaxError(t.line, f"unexpected {t.text!r} at file level")
        self._resolve_pending()
        return ContractModel(
            source_lines=self.lines,
            contracts=tuple(self.contracts),
            functions=tuple(f for f in self.functions),
            modifiers=tuple(self.modifiers),
            fields=tuple(self.fields),
            events=tuple(self.events),
            pragma=self.pragma,
            comment_lines=self.comment_lines,
            type_names=frozenset(self.type_names),
            warnings=tuple(self.warnings),
        )

    def _find(self, i: int, text: str) -> int:
        while not self._tok(i).is_(text):
            if self._tok(i).is_(";", "}"):
                raise SoliditySyntaxError(self._tok(i).line, f"expected {text!r}")
            i += 1
        return i

    def _skip_function(self, i: int) -> int:
        while True:
            t = self._tok(i)
            if t.is_(";"):
                return i + 1
            if t.is_("{"):
                return self.match[i] + 1
            if t.kind == "punct" and t.text in "([":
                i = self.match[i]
            i += 1

    def _contract(self, i: int) -> int:
        start_tok = self.toks[i]
        kind = start_tok.text
        if kind == "abstract":
            i += 1
            if not self._tok(i).is_("contract"):
                raise SoliditySyntaxError(self._tok(i).line, "expected 'contract' after 'abstract'")
        name = self._expect_ident(i + 1, "contract name")
        self.type_names.add(name)
        i += 2
        parents: list[str] = []
        if self._tok(i).is_("is"):
            i += 1
            while not self._tok(i).is_("{"):
                t = self._tok(i)
                if t.kind == IDENT:
                    qual = t.text
                    while self._tok(i + 1).is_(".") and self._tok(i + 2).kind == IDENT:
                        qual = self._tok(i + 2).text
                        i += 2
                    parents.append(qual)
                    i += 1
                    if self._tok(i).is_("("):
                        i = self.match[i] + 1
                elif t.is_(","):
                    i += 1
                else:
                    raise SoliditySyntaxError(t.line, f"unexpected {t.text!r} in inheritance list")
        if not self._tok(i).is_("{"):
            raise SoliditySyntaxError(self._tok(i).line, "expected '{' after contract header")
        open_i, close_i = i, self.match[i]
        header_span = (start_tok.line, self.toks[open_i].line)
        using: list[tuple[str, str]] = []

        j = open_i + 1
        while j < close_i:
            j = self._member(j, name, kind, using)
        self.contracts.append(ContractDecl(
            name=name,
            kind=kind,
            parents=tuple(parents),
            header_span=header_span,
            span=(start_tok.line, self.toks[close_i].line),
            using_for=tuple(using),
        ))
        return close_i + 1

    # -- contract members ----------------------------------------------------

    def _member(self, i: int, contract: str, ckind: str, using: list) -> int:
        t = self.toks[i]
        if t.is_(";"):
            return i + 1
        if t.kind == IDENT and t.text in _FN_KEYWORDS:
            return self._function(i, contract, ckind)
        if t.is_("event"):
            name = self._expect_ident(i + 1, "event name")
            if not self._tok(i + 2).is_("("):
                raise SoliditySyntaxError(t.line, "expected '(' after event name")
            params = self._params(i + 2)
            end = self._skip_to_semicolon(i)
            anonymous = any(x.is_("anonymous") for x in self.toks[self.match[i + 2]:end])
            self.events.append(EventDef(name, contract, params, t.line, anonymous))
            return end + 1
        if t.is_("struct", "enum"):
            self.type_names.add(self._expect_ident(i + 1, "type name"))
            return self.match[self._find(i, "{")] + 1
        if t.is_("using"):
            end = self._skip_to_semicolon(i)
            toks = self.toks[i + 1:end]
            for_i = next((k for k, x in enumerate(toks) if x.is_("for")), None)
            if for_i is None:
                raise SoliditySyntaxError(t.line, "expected 'for' in using directive")
            target = _join(toks[for_i + 1:]) or "*"
            target = target.replace(" global", "")
            libs = [x.text for x in toks[:for_i] if x.kind == IDENT]
            for lib in libs:
                using.append((lib, target))
            return end + 1
        if t.is_("error", "type"):
            if t.is_("type"):
                self.type_names.add(self._expect_ident(i + 1, "type name"))
            return self._skip_to_semicolon(i) + 1
        if t.kind == IDENT:
            return self._state_variable(i, contract)
        raise SoliditySyntaxError(t.line, f"unexpected {t.text!r} in contract body")

    def _state_variable(self, i: int, contract: str) -> int:
        end = self._skip_to_semicolon(i)
        toks = self.toks[i:end]
        if any(x.is_("{") for x in toks):
            raise SoliditySyntaxError(toks[0].line, "unexpected block in state variable declaration")
        eq = next((i + k for k, x in enumerate(toks) if x.is_("=")), end)
        visibility, constant = "internal", False
        type_toks: list[Token] = []
        k = i
        while k < eq:
            x = self.toks[k]
            if x.kind == IDENT and x.text in VISIBILITY:
                visibility = x.text
            elif x.is_("constant", "immutable"):
                constant = True
            elif x.is_("override"):
                if self.toks[k + 1].is_("("):
                    k = self.match[k + 1]
            elif x.kind == "punct" and x.text in "([":
                type_toks.extend(self.toks[k:self.match[k] + 1])
                k = self.match[k]
            else:
                type_toks.append(x)
            k += 1
        if not type_toks or type_toks[-1].kind != IDENT:
            raise SoliditySyntaxError(toks[0].line if toks else self._tok(i).line, "malformed state variable")
        name = type_toks.pop().text
        if not type_toks:
            raise SoliditySyntaxError(toks[0].line, f"state variable {name!r} has no type")
        self.fields.append(FieldDef(
            name=name,
            owner=contract,
            type=normalize_type(_join(type_toks)),
            visibility=visibility,
            decl_line=toks[0].line,
            span=(toks[0].line, self.toks[end].line),
            constant=constant,
        ))
        return end + 1

    def _function(self, i: int, contract: str, ckind: str) -> int:
        kw = self.toks[i]
        kind = kw.text
        j = i + 1
        if kind in ("function", "modifier"):
            if self._tok(j).is_("("):
                name, kind = "fallback", "fallback"
            else:
                name = self._expect_ident(j, "function name")
                j += 1
        else:
            name = kind
        if kind == "function" and name == contract:
            kind = "constructor"
        params: tuple[Param, ...] = ()
        if self._tok(j).is_("("):
            params = self._params(j)
            j = self.match[j] + 1
        elif kind != "modifier":
            raise SoliditySyntaxError(self._tok(j).line, f"expected '(' after {name}")

        visibility = None
        mutability = None
        virtual = False
        returns: tuple[Param, ...] = ()
        header_mods: list[tuple[str, int, int | None]] = []  # (name, token index, args open index)
        while True:
            t = self._tok(j)
            if t.is_("{", ";"):
                break
            if t.kind == IDENT and t.text in VISIBILITY:
                visibility = t.text
            elif t.kind == IDENT and t.text in MUTABILITY:
                mutability = t.text
            elif t.is_("virtual"):
                virtual = True
            elif t.is_("override"):
                if self._tok(j + 1).is_("("):
                    j = self.match[j + 1]
            elif t.is_("returns"):
                if not self._tok(j + 1).is_("("):
                    raise SoliditySyntaxError(t.line, "expected '(' after returns")
                returns = self._params(j + 1)
                j = self.match[j + 1]
            elif t.kind == IDENT:
                qual = t.text
                k = j
                while self._tok(k + 1).is_(".") and self._tok(k + 2).kind == IDENT:
                    qual = self._tok(k + 2).text
                    k += 2
                args = k + 1 if self._tok(k + 1).is_("(") else None
                header_mods.append((qual, j, args))
                j = self.match[args] if args is not None else k
            elif t.kind == "punct" and t.text in "([":
                j = self.match[j]
            else:
                raise SoliditySyntaxError(t.line, f"unexpected {t.text!r} in function header")
            j += 1

        has_body = self.toks[j].is_("{")
        end = self.match[j] if has_body else j
        if visibility is None:
            if ckind == "interface":
                visibility = "external"
            elif kind == "modifier":
                visibility = "internal"
            elif kind in ("fallback", "receive"):
                visibility = "external"
            else:
                visibility = "public"
        if kind == "constructor" and contract == name:
            name = "constructor"
        record = dict(
            name=name,
            owner=contract,
            kind=kind,
            visibility=visibility,
            params=params,
            returns=returns,
            state_mutability=mutability,
            span=(kw.line, self.toks[end].line),
            leading_comment_span=self._leading_comment(kw.line) if self.first_on_line[kw.line] == i else None,
            has_body=has_body,
            virtual=virtual,
            header_mods=header_mods,
            body=(j, end) if has_body else None,
        )
        self._pending.append(record)
        return end + 1

    # -- body facts ------------------------------------------------------------

    def _arity(self, open_i: int) -> int:
        close = self.match[open_i]
        if close == open_i + 1:
            return 0
        inner_start = open_i + 1
        if self.toks[inner_start].is_("{") and self.match[inner_start] == close - 1:
            open_i, close = inner_start, close - 1  # named arguments
        count, i = 1, open_i + 1
        while i < close:
            t = self.toks[i]
            if t.kind == "punct" and t.text in "([{":
                i = self.match[i]
            elif t.is_(","):
                count += 1
            i += 1
        return count

    def _is_type_end(self, t: Token | None) -> bool:
        if t is None:
            return False
        if t.is_("]"):
            return True
        if t.kind != IDENT:
            return False
        return t.text in _LOCATIONS or t.text == "payable" or _is_elementary(t.text) or t.text in self.type_names

    def _facts(self, start: int, end: int, locals_: set[str], calls: list, idents: list, emits: list) -> None:
        """Collect call sites, identifier uses and emits from tokens in (start, end)."""
        toks = self.toks
        i = start + 1
        while i < end:
            t = toks[i]
            if t.is_("assembly"):
                self.warnings.append(ModelWarning(
                    t.line, "unsupported-construct", "inline assembly is kept verbatim but not analyzed"))
                k = i + 1
                while k < end and not toks[k].is_("{"):
                    k = self.match[k] + 1 if toks[k].is_("(") else k + 1
                i = self.match[k] + 1 if k < end else k
                continue
            if t.kind != IDENT:
                i += 1
                continue
            prev = toks[i - 1] if i - 1 > start else None
            nxt = toks[i + 1] if i + 1 < end else None
            if prev is not None and prev.is_("."):
                recv = toks[i - 2] if i - 2 > start else None
                before_recv = toks[i - 3] if i - 3 > start else None
                if nxt is not None and nxt.is_("("):
                    if recv is not None and recv.is_("this", "super"):
                        qual = recv.text
                    elif recv is not None and recv.kind == IDENT and recv.text in self.type_names and not (
                            before_recv is not None and before_recv.is_(".")):
                        qual = recv.text
                    else:
                        qual = "."
                    calls.append(CallSite(t.text, self._arity(i + 1), t.line, qual))
                elif recv is not None and recv.is_("this"):
                    idents.append((t.text, t.line))
                i += 1
                continue
            if t.is_("emit"):
                k = i + 1
                name = None
                while k < end and toks[k].kind == IDENT:
                    name = toks[k].text
                    if k + 1 < end and toks[k + 1].is_("."):
                        k += 2
                    else:
                        break
                if name is not None:
                    emits.append((name, t.line))
                i = k + 1
                continue
            if nxt is not None and nxt.is_("("):
                word = t.text
                if word not in _NOT_CALLS and not _is_elementary(word) and not (prev is not None and prev.is_("new")):
                    calls.append(CallSite(word, self._arity(i + 1), t.line, None))
                i += 1
                continue
            if nxt is not None and nxt.is_("=", ";", ",", ")") and self._is_type_end(prev) and t.text not in self.type_names:
                locals_.add(t.text)
                i += 1
                continue
            if t.text not in locals_ and t.text not in _NON_FIELD_WORDS and not _is_elementary(t.text):
                idents.append((t.text, t.line))
            i += 1

    def _resolve_pending(self) -> None:
        event_names = {e.name for e in self.events}
        fn_names = {r["name"] for r in self._pending if r["kind"] == "function"}
        for r in self._pending:
            locals_ = {p.name for p in r["params"] + r["returns"] if p.name}
            calls: list[CallSite] = []
            idents: list[tuple[str, int]] = []
            emits: list[tuple[str, int]] = []
            modifiers = []
            for mod_name, _tok_i, args in r["header_mods"]:
                modifiers.append(mod_name)
                if args is not None:
                    self._facts(args, self.match[args], locals_, calls, idents, emits)
            if r["body"] is not None:
                self._facts(r["body"][0], r["body"][1], locals_, calls, idents, emits)
            # Pre-0.5 contracts fire events with call syntax.
            kept = []
            for c in calls:
                if c.qualifier is None and c.name in event_names and c.name not in fn_names:
                    emits.append((c.name, c.line))
                else:
                    kept.append(c)
            fn = FunctionDef(
                name=r["name"],
                owner=r["owner"],
                kind=r["kind"],
                visibility=r["visibility"],
                params=r["params"],
                returns=r["returns"],
                modifiers=tuple(modifiers),
                state_mutability=r["state_mutability"],
                span=r["span"],
                leading_comment_span=r["leading_comment_span"],
                has_body=r["has_body"],
                virtual=r["virtual"],
                calls=tuple(kept),
                identifiers=tuple(idents),
                emits=tuple(sorted(emits, key=lambda e: e[1])),
            )
            (self.modifiers if r["kind"] == "modifier" else self.functions).append(fn)


def parse_contract(source: str) -> ContractModel:
    """Parse one Solidity file into a :class:`ContractModel`.

    Raises :class:`~erc_sentinel.errors.SoliditySyntaxError` on unbalanced
    brackets, unterminated literals, or declarations that cannot be read.
    Inline assembly is kept as raw lines and reported in ``model.warnings``.
    """
    from .callgraph import with_resolution_warnings

    return with_resolution_warnings(_Parser(source).parse())

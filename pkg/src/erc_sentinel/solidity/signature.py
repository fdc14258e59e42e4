"""Parsing of standalone function/event declaration text and type normalization."""

from __future__ import annotations

import re
from dataclasses import dataclass

_LOCATIONS = {"memory", "storage", "calldata"}
_ALIASES = {"uint": "uint256", "int": "int256", "byte": "bytes1", "ufixed": "ufixed128x18", "fixed": "fixed128x18"}

_DECL_RE = re.compile(
    r"^\s*(?P<kind>function|event)\s+(?P<name>[A-Za-z_$][\w$]*)\s*\((?P<params>.*?)\)(?P<rest>.*?);?\s*$",
    re.S,
)
_RETURNS_RE = re.compile(r"\breturns\s*\((?P<ret>.*)\)", re.S)


def normalize_type(text: str) -> str:
    """Canonical form of a Solidity type: aliases expanded, locations dropped.

    >>> normalize_type("uint")
    'uint256'
    >>> normalize_type("string memory")
    'string'
    >>> normalize_type("mapping (address=>uint)")
    'mapping(address=>uint256)'
    """
    text = re.sub(r"\s+", " ", text.strip())
    words = [w for w in text.split(" ") if w not in _LOCATIONS]
    if words[:2] == ["address", "payable"]:
        words = ["address"] + words[2:]
    text = " ".join(words)
    text = re.sub(r"\s*(=>|\(|\)|\[|\])\s*", r"\1", text)

    def alias(m: re.Match) -> str:
        return _ALIASES.get(m.group(0), m.group(0))

    return re.sub(r"\b[a-z]+\b", alias, text)


def split_top_level(text: str, sep: str = ",") -> list[str]:
    """Split on ``sep`` outside of brackets; empty input gives an empty list."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur)
    if tail.strip() or parts:
        parts.append(tail)
    return [p.strip() for p in parts]


@dataclass(frozen=True)
class DeclParam:
    type: str
    name: str | None
    indexed: bool = False


@dataclass(frozen=True)
class Declaration:
    kind: str  # "function" | "event"
    name: str
    params: tuple[DeclParam, ...]
    returns: tuple[str, ...] = ()

    @property
    def param_types(self) -> tuple[str, ...]:
        return tuple(p.type for p in self.params)


_IDENT = re.compile(r"[A-Za-z_$][\w$]*")


def parse_param(text: str) -> DeclParam:
    words = [w for w in text.replace("\n", " ").split() if w not in _LOCATIONS]
    if not words:
        raise ValueError("empty parameter")
    indexed = "indexed" in words
    words = [w for w in words if w != "indexed"]
    name = None
    if len(words) >= 2 and _IDENT.fullmatch(words[-1]) and words[-1] != "payable":
        name = words.pop()
    return DeclParam(normalize_type(" ".join(words)), name, indexed)


def parse_declaration(text: str) -> Declaration:
    """Parse ``function f(uint a) returns (bool)`` or ``event E(address indexed a)``.

    Raises ValueError when the text is not a function or event declaration.
    """
    m = _DECL_RE.match(text.strip())
    if not m:
        raise ValueError(f"not a function or event declaration: {text!r}")
    params = tuple(parse_param(p) for p in split_top_level(m.group("params")))
    returns: tuple[str, ...] = ()
    if m.group("kind") == "function":
        rm = _RETURNS_RE.search(m.group("rest"))
        if rm:
            returns = tuple(parse_param(p).type for p in split_top_level(rm.group("ret")))
    return Declaration(m.group("kind"), m.group("name"), params, returns)


def getter_signature(type_text: str) -> tuple[tuple[str, ...], str]:
    """Parameter types and return type of the getter for a public state variable.

    >>> getter_signature("mapping(address=>mapping(address=>uint256))")
    (('address', 'address'), 'uint256')
    >>> getter_signature("uint256[]")
    (('uint256',), 'uint256')
    """
    t = normalize_type(type_text)
    params: list[str] = []
    while True:
        if t.startswith("mapping("):
            depth, arrow = 0, None
            for k, ch in enumerate(t):
                if ch == "(":
                    depth += 1
                elif ch == ")":
                    depth -= 1
                elif depth == 1 and t.startswith("=>", k) and arrow is None:
                    arrow = k
            key = t[len("mapping("):arrow]
            params.append(key.split(" ")[0])
            t = t[arrow + 2:-1]
            continue
        m = re.match(r"^(.*)\[[^\[\]]*\]$", t)
        if m:
            params.append("uint256")
            t = m.group(1)
            continue
        return tuple(params), t

"""Line-aware tokenizer for Solidity source."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import SoliditySyntaxError

IDENT, NUMBER, STRING, PUNCT, COMMENT = "ident", "number", "string", "punct", "comment"

_PUNCT = sorted(
    """>>>= <<= >>= >>> ** == != <= >= && || ++ -- += -= *= /= %= |= &= ^= << >> => -> :=
    ( ) [ ] { } ; , . ? : = + - * / % ! ~ & | ^ < > @""".split(),
    key=len,
    reverse=True,
)
_IDENT_RE = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
_NUMBER_RE = re.compile(r"0[xX][0-9a-fA-F_]*|(?:\d[\d_]*)?\.?\d[\d_]*(?:[eE][-+]?\d+)?")


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int  # 1-based line of the first character
    end_line: int  # line of the last character
    offset: int = 0  # index of the first character in the source

    def is_(self, *texts: str) -> bool:
        return self.kind in (IDENT, PUNCT) and self.text in texts


def tokenize(source: str) -> list[Token]:
    """Tokens in source order, comments included (kind ``comment``)."""
    tokens: list[Token] = []
    i, line, n = 0, 1, len(source)
    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            i += 1
            continue
        if ch in " \t\r\f\v":
            i += 1
            continue
        if source.startswith("//", i):
            j = source.find("\n", i)
            j = n if j == -1 else j
            tokens.append(Token(COMMENT, source[i:j], line, line, i))
            i = j
            continue
        if source.startswith("/*", i):
            j = source.find("*/", i + 2)
            if j == -1:
                raise SoliditySyntaxError(line, "unterminated block comment")
            text = source[i:j + 2]
            end = line + text.count("\n")
            tokens.append(Token(COMMENT, text, line, end, i))
            line, i = end, j + 2
            continue
        m = _IDENT_RE.match(source, i)
        if m:
            word = m.group(0)
            # hex"..", unicode".." literals
            if word in ("hex", "unicode") and m.end() < n and source[m.end()] in "\"'":
                start_line = line
                i, line = _scan_string(source, m.end(), line)
                tokens.append(Token(STRING, source[m.start():i], start_line, line, m.start()))
                continue
            tokens.append(Token(IDENT, word, line, line, i))
            i = m.end()
            continue
        if ch in "\"'":
            start, start_line = i, line
            i, line = _scan_string(source, i, line)
            tokens.append(Token(STRING, source[start:i], start_line, line, start))
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            m = _NUMBER_RE.match(source, i)
            tokens.append(Token(NUMBER, m.group(0), line, line, i))
            i = m.end()
            continue
        for p in _PUNCT:
            if source.startswith(p, i):
                tokens.append(Token(PUNCT, p, line, line, i))
                i += len(p)
                break
        else:
            raise SoliditySyntaxError(line, f"unexpected character {ch!r}")
    return tokens


def _scan_string(source: str, i: int, line: int) -> tuple[int, int]:
    quote = source[i]
    i += 1
    while i < len(source):
        ch = source[i]
        if ch == "\\":
            i += 2
            continue
        if ch == "\n":
            raise SoliditySyntaxError(line, "unterminated string literal")
        if ch == quote:
            return i + 1, line
        i += 1
    raise SoliditySyntaxError(line, "unterminated string literal")

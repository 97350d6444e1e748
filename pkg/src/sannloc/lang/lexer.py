from __future__ import annotations

import re
from dataclasses import dataclass

KEYWORDS = frozenset(
    {"if", "else", "while", "for", "return", "true", "false", "int", "boolean", "String", "char"}
)

# Longest operators first so `&&` wins over `&`, `<=` over `<`, etc.
OPERATORS = (
    "&&", "||", "==", "!=", "<=", ">=", "++", "--", "+=", "-=", "*=", "/=", "%=",
    "&", "|", "<", ">", "=", "+", "-", "*", "/", "%", "!",
    "(", ")", "{", "}", "[", "]", ";", ",", ".",
)

_TOKEN_RE = re.compile(
    rb"""
    (?P<ws>[ \t\r\n\f]+)
  | (?P<line_comment>//[^\n]*)
  | (?P<block_comment>/\*(?:.|\n)*?\*/)
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<int>[0-9]+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<char>'(?:[^'\\\n]|\\.)')
  | (?P<op>"""
    + b"|".join(re.escape(op.encode()) for op in OPERATORS)
    + rb")",
    re.VERBOSE,
)


class LexError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte {offset}")
        self.offset = offset


@dataclass(frozen=True, slots=True)
class Token:
    type: str  # "ident", "keyword", "int", "string", "char", "op", "eof"
    text: str
    start: int
    end: int


def tokenize(source: str | bytes) -> list[Token]:
    """Split source into tokens; offsets are UTF-8 byte offsets."""
    data = source.encode("utf-8") if isinstance(source, str) else source
    tokens: list[Token] = []
    pos = 0
    n = len(data)
    while pos < n:
        m = _TOKEN_RE.match(data, pos)
        if m is None:
            if data.startswith(b"/*", pos):
                raise LexError("unterminated block comment", pos)
            if data[pos:pos + 1] in (b'"', b"'"):
                raise LexError("unterminated literal", pos)
            raise LexError(f"unknown character {data[pos:pos + 1]!r}", pos)
        kind = m.lastgroup
        end = m.end()
        if kind not in ("ws", "line_comment", "block_comment"):
            text = data[pos:end].decode("utf-8")
            if kind == "ident" and text in KEYWORDS:
                kind = "keyword"
            tokens.append(Token(kind, text, pos, end))
        pos = end
    tokens.append(Token("eof", "", n, n))
    return tokens

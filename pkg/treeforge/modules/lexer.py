"""
Shared tokenizer for every line-oriented notation treeforge reads:
tree specifications, Base-L/Proc-L sources, trace expressions and
co-simulation scenarios.
"""

import re
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence

from .errors import ParseError, Span

__all__ = ["Token", "TokenStream", "tokenize", "IDENT", "INT", "REAL", "OP", "EOF"]

IDENT = "IDENT"
INT = "INT"
REAL = "REAL"
OP = "OP"
EOF = "EOF"

# longest first
OPERATORS: Sequence[str] = (
    ":=", "==", "->", "<>", "<=", ">=", "::", "[]", "<-",
    "&", "*", "+", "-", "/", "=", "<", ">", "(", ")", ",", ":", ";", "|",
    "[", "]", "{", "}", "?",
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int

    @property
    def span(self) -> Span:
        return Span(self.line, self.column, len(self.text))

    def __repr__(self) -> str:
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.column})"


def _build_pattern(comment: str) -> "re.Pattern[str]":
    ops = "|".join(re.escape(op) for op in OPERATORS)
    return re.compile(
        rf"""
        (?P<comment>{re.escape(comment)}[^\n]*)
        | (?P<newline>\n)
        | (?P<space>[ \t\r\f]+)
        | (?P<real>\d+\.\d+(?:[eE][+-]?\d+)?)
        | (?P<int>\d+)
        | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
        | (?P<op>{ops})
        """,
        re.VERBOSE,
    )


_PATTERNS = {}


def tokenize(source: str, comment: str = "--") -> List[Token]:
    """
    Split source text into tokens, dropping whitespace and comments.

    :param source: The text to tokenize.
    :param comment: Line-comment prefix of the notation.
    :return: Tokens followed by a single EOF token.
    :raises ParseError: On a character no token can start with.
    """
    pattern = _PATTERNS.get(comment)
    if pattern is None:
        pattern = _PATTERNS[comment] = _build_pattern(comment)

    tokens: List[Token] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(source):
        match = pattern.match(source, pos)
        if match is None:
            raise ParseError(
                f"unexpected character {source[pos]!r}",
                Span(line, pos - line_start + 1, 1),
            )
        kind = match.lastgroup
        text = match.group()
        column = pos - line_start + 1
        if kind == "newline":
            line += 1
            line_start = match.end()
        elif kind == "real":
            tokens.append(Token(REAL, text, line, column))
        elif kind == "int":
            tokens.append(Token(INT, text, line, column))
        elif kind == "ident":
            tokens.append(Token(IDENT, text, line, column))
        elif kind == "op":
            tokens.append(Token(OP, text, line, column))
        pos = match.end()
    tokens.append(Token(EOF, "", line, pos - line_start + 1))
    return tokens


class TokenStream:
    """Cursor over a token list with the usual peek/expect helpers."""

    def __init__(self, tokens: List[Token], source: str = ""):
        self.tokens = tokens
        self.source = source
        self.pos = 0

    @classmethod
    def from_source(cls, source: str, comment: str = "--") -> "TokenStream":
        return cls(tokenize(source, comment), source)

    def peek(self, offset: int = 0) -> Token:
        index = min(self.pos + offset, len(self.tokens) - 1)
        return self.tokens[index]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        if token.kind != EOF:
            self.pos += 1
        return token

    def at(self, *texts: str) -> bool:
        token = self.peek()
        return token.kind in (OP, IDENT) and token.text in texts

    def at_kind(self, kind: str) -> bool:
        return self.peek().kind == kind

    def at_eof(self) -> bool:
        return self.peek().kind == EOF

    def accept(self, *texts: str) -> Optional[Token]:
        if self.at(*texts):
            return self.advance()
        return None

    def expect(self, text: str) -> Token:
        token = self.peek()
        if token.kind in (OP, IDENT) and token.text == text:
            return self.advance()
        raise self.error(f"expected '{text}'")

    def expect_ident(self, what: str = "identifier", reserved: Iterable[str] = ()) -> Token:
        token = self.peek()
        if token.kind != IDENT or token.text in reserved:
            raise self.error(f"expected {what}")
        return self.advance()

    def error(self, message: str, token: Optional[Token] = None) -> ParseError:
        token = token or self.peek()
        found = "end of input" if token.kind == EOF else repr(token.text)
        return ParseError(f"{message}, found {found}", token.span)

    def rest_of_line(self) -> str:
        """Consume the tokens on the current line and return their raw source text."""
        first = self.peek()
        if first.kind == EOF:
            return ""
        line = first.line
        last = first
        while self.peek().kind != EOF and self.peek().line == line:
            last = self.advance()
        source_line = self.source.split("\n")[line - 1]
        return source_line[first.column - 1 : last.column - 1 + len(last.text)]

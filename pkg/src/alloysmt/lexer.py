"""Hand-written lexer for the Alloy subset."""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import LexError

KEYWORDS = frozenset(
    [
        "sig", "abstract", "extends", "in", "fact", "pred", "fun", "assert",
        "check", "run", "all", "some", "one", "lone", "no", "set", "not",
        "and", "or", "implies", "for",
    ]
)

# Recognized so the parser can name the unsupported construct instead of
# emitting a generic syntax error.
OUT_OF_SCOPE_KEYWORDS = frozenset(
    [
        "module", "open", "let", "disj", "but", "univ", "iden", "none",
        "Int", "int", "seq", "else", "iff", "sum", "exactly", "expect",
        "enum", "var", "steps", "always", "eventually",
    ]
)

# Multi-char operators first so maximal munch works by ordered scan.
OPERATORS = [
    "||", "&&", "++", "<:", ":>", "->", "=>", "!=",
    "{", "}", "(", ")", "[", "]", ":", ",", ".", "+", "-", "&", "^", "*",
    "=", "|", "!", "~", "#", "@", "<", ">",
]

OUT_OF_SCOPE_OPERATORS = frozenset(["||", "&&", "++", "<:", ":>", "~", "#", "@", "<", ">"])


@dataclass(frozen=True)
class Token:
    kind: str  # keyword text, operator text, "ident", "num", or "eof"
    text: str
    line: int
    col: int

    def __repr__(self) -> str:
        return f"Token({self.kind!r}, {self.text!r}, {self.line}:{self.col})"


@dataclass
class _Scanner:
    src: str
    pos: int = 0
    line: int = 1
    col: int = 1
    tokens: list[Token] = field(default_factory=list)

    def peek(self, k: int = 0) -> str:
        i = self.pos + k
        return self.src[i] if i < len(self.src) else ""

    def advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos < len(self.src):
                if self.src[self.pos] == "\n":
                    self.line += 1
                    self.col = 1
                else:
                    self.col += 1
                self.pos += 1


def _is_ident_start(c: str) -> bool:
    return c.isalpha() or c == "_"


def _is_ident_char(c: str) -> bool:
    return c.isalnum() or c in "_'"


def tokenize(source: str) -> list[Token]:
    """Turn source text into tokens; comments are discarded, every token carries a position."""
    s = _Scanner(source)
    while s.pos < len(s.src):
        c = s.peek()
        if c in " \t\r\n":
            s.advance()
            continue
        if c == "-" and s.peek(1) == "-" or c == "/" and s.peek(1) == "/":
            while s.pos < len(s.src) and s.peek() != "\n":
                s.advance()
            continue
        if c == "/" and s.peek(1) == "*":
            start_line, start_col = s.line, s.col
            s.advance(2)
            while s.pos < len(s.src) and not (s.peek() == "*" and s.peek(1) == "/"):
                s.advance()
            if s.pos >= len(s.src):
                raise LexError("unterminated block comment", start_line, start_col)
            s.advance(2)
            continue
        line, col = s.line, s.col
        if _is_ident_start(c):
            start = s.pos
            while s.pos < len(s.src) and _is_ident_char(s.peek()):
                s.advance()
            text = s.src[start : s.pos]
            if text in KEYWORDS or text in OUT_OF_SCOPE_KEYWORDS:
                s.tokens.append(Token(text, text, line, col))
            else:
                s.tokens.append(Token("ident", text, line, col))
            continue
        if c.isdigit():
            start = s.pos
            while s.pos < len(s.src) and s.peek().isdigit():
                s.advance()
            s.tokens.append(Token("num", s.src[start : s.pos], line, col))
            continue
        for op in OPERATORS:
            if s.src.startswith(op, s.pos):
                s.advance(len(op))
                s.tokens.append(Token(op, op, line, col))
                break
        else:
            raise LexError(f"illegal character {c!r}", line, col)
    s.tokens.append(Token("eof", "", s.line, s.col))
    return s.tokens

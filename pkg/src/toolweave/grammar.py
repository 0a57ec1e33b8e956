"""Parser and serializer for the platform-keyed call text format.

This is the bit-exact contract for evaluator inputs. The accepted grammar:

    solution : '{' entry (',' entry)* '}'
    entry    : IDENT ':' '[' call (',' call)* ']'
    call     : IDENT '(' (arg (',' arg)*)? ')'
    arg      : IDENT '=' literal
    literal  : STRING | NUMBER | BOOL | NONE | list | map
    list     : '[' (literal (',' literal)*)? ']'
    map      : '{' ((IDENT | STRING) ':' literal
                    (',' (IDENT | STRING) ':' literal)*)? '}'

    IDENT    : [A-Za-z_][A-Za-z0-9_]*
    STRING   : single- or double-quoted, backslash escapes
    NUMBER   : [+-]? digits ('.' digits)? ([eE] [+-]? digits)?
    BOOL     : True | False | true | false
    NONE     : None | null

Whitespace is insignificant outside strings. Any prose before the opening
'{' or after the closing '}' fails the parse: a sample wrapped in
explanatory text is format-incorrect by contract.

Serialization emits one canonical form: single-quoted strings, ``True`` /
``False`` / ``None``, one space after each comma, no spaces around ``=``.
``parse_solution(serialize_solution(s))`` reconstructs ``s`` exactly.
"""

from __future__ import annotations

import re

from .model import Solution, ToolCall, Value

IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_NUMBER_RE = re.compile(r"[+-]?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")

# Literal nesting beyond this raises ParseError instead of overflowing the
# interpreter stack on adversarial input.
MAX_NESTING = 64

_ESCAPES = {"\\": "\\", "'": "'", '"': '"', "n": "\n", "t": "\t", "r": "\r"}
_REVERSE_ESCAPES = {"\\": "\\\\", "'": "\\'", "\n": "\\n", "\t": "\\t", "\r": "\\r"}


class ParseError(Exception):
    """Input deviates from the call grammar; the sample is format-incorrect."""

    def __init__(self, position: int, expected: str, found: str):
        self.position = position
        self.expected = expected
        self.found = found
        super().__init__(f"at offset {position}: expected {expected}, found {found!r}")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.depth = 0

    # -- low-level helpers -------------------------------------------------

    def error(self, expected: str) -> ParseError:
        snippet = self.text[self.pos : self.pos + 12]
        if not snippet:
            snippet = "<end of input>"
        return ParseError(self.pos, expected, snippet)

    def skip_ws(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos].isspace():
            self.pos += 1

    def peek(self) -> str:
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def expect(self, ch: str) -> None:
        self.skip_ws()
        if self.peek() != ch:
            raise self.error(f"'{ch}'")
        self.pos += 1

    def ident(self, what: str) -> str:
        self.skip_ws()
        m = IDENT_RE.match(self.text, self.pos)
        if not m:
            raise self.error(what)
        self.pos = m.end()
        return m.group()

    # -- grammar productions -----------------------------------------------

    def solution(self) -> Solution:
        self.skip_ws()
        if self.peek() != "{":
            raise self.error("'{' opening the solution")
        self.pos += 1
        calls: list[ToolCall] = []
        while True:
            calls.extend(self.entry())
            self.skip_ws()
            if self.peek() == ",":
                self.pos += 1
                continue
            break
        self.expect("}")
        self.skip_ws()
        if self.pos != len(self.text):
            raise self.error("end of input")
        return Solution(calls=tuple(calls))

    def entry(self) -> list[ToolCall]:
        platform = self.ident("platform name")
        self.expect(":")
        self.expect("[")
        calls = [self.call(platform)]
        while True:
            self.skip_ws()
            if self.peek() == ",":
                self.pos += 1
                calls.append(self.call(platform))
            else:
                break
        self.expect("]")
        return calls

    def call(self, platform: str) -> ToolCall:
        function = self.ident("function name")
        self.expect("(")
        args: dict[str, Value] = {}
        self.skip_ws()
        if self.peek() != ")":
            while True:
                start = self.pos
                name = self.ident("argument name")
                if name in args:
                    raise ParseError(start, "a distinct argument name", name)
                self.expect("=")
                args[name] = self.literal()
                self.skip_ws()
                if self.peek() == ",":
                    self.pos += 1
                    self.skip_ws()
                else:
                    break
        self.expect(")")
        return ToolCall(platform=platform, function=function, args=args)

    def literal(self) -> Value:
        self.skip_ws()
        if self.depth >= MAX_NESTING:
            raise self.error("a literal nested less deeply")
        ch = self.peek()
        if ch in ("'", '"'):
            return self.string()
        if ch == "[":
            return self.list_literal()
        if ch == "{":
            return self.map_literal()
        if ch.isdigit() or ch in "+-":
            return self.number()
        word = IDENT_RE.match(self.text, self.pos)
        if word:
            w = word.group()
            if w in ("True", "true"):
                self.pos = word.end()
                return True
            if w in ("False", "false"):
                self.pos = word.end()
                return False
            if w in ("None", "null"):
                self.pos = word.end()
                return None
        raise self.error("a literal")

    def string(self) -> str:
        quote = self.peek()
        self.pos += 1
        out: list[str] = []
        while True:
            if self.pos >= len(self.text):
                raise self.error(f"closing {quote}")
            ch = self.text[self.pos]
            if ch == quote:
                self.pos += 1
                return "".join(out)
            if ch == "\\":
                self.pos += 1
                if self.pos >= len(self.text):
                    raise self.error("an escape character")
                esc = self.text[self.pos]
                out.append(_ESCAPES.get(esc, esc))
                self.pos += 1
            else:
                out.append(ch)
                self.pos += 1

    def number(self) -> int | float:
        m = _NUMBER_RE.match(self.text, self.pos)
        if not m:
            raise self.error("a number")
        self.pos = m.end()
        token = m.group()
        if "." in token or "e" in token or "E" in token:
            return float(token)
        return int(token)

    def list_literal(self) -> list[Value]:
        self.depth += 1
        self.pos += 1  # '['
        items: list[Value] = []
        self.skip_ws()
        if self.peek() != "]":
            while True:
                items.append(self.literal())
                self.skip_ws()
                if self.peek() == ",":
                    self.pos += 1
                else:
                    break
        self.expect("]")
        self.depth -= 1
        return items

    def map_literal(self) -> dict[str, Value]:
        self.depth += 1
        self.pos += 1  # '{'
        out: dict[str, Value] = {}
        self.skip_ws()
        if self.peek() != "}":
            while True:
                self.skip_ws()
                start = self.pos
                if self.peek() in ("'", '"'):
                    key = self.string()
                else:
                    key = self.ident("a map key")
                if key in out:
                    raise ParseError(start, "a distinct map key", key)
                self.expect(":")
                out[key] = self.literal()
                self.skip_ws()
                if self.peek() == ",":
                    self.pos += 1
                else:
                    break
        self.expect("}")
        self.depth -= 1
        return out


def parse_solution(text: str) -> Solution:
    """Parse model output into a Solution; raises ParseError on any deviation."""
    return _Parser(text).solution()


def _quote(s: str) -> str:
    out = []
    for ch in s:
        out.append(_REVERSE_ESCAPES.get(ch, ch))
    return "'" + "".join(out) + "'"


def _check_ident(name: str, role: str) -> str:
    if not IDENT_RE.fullmatch(name):
        raise ValueError(f"{role} {name!r} is not serializable (must be an identifier)")
    return name


def serialize_value(v: Value) -> str:
    if isinstance(v, bool):
        return "True" if v else "False"
    if v is None:
        return "None"
    if isinstance(v, str):
        return _quote(v)
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, list):
        return "[" + ", ".join(serialize_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{_quote(k)}: {serialize_value(x)}" for k, x in v.items()) + "}"
    raise TypeError(f"not a Value: {type(v).__name__}")


def serialize_solution(solution: Solution) -> str:
    """Canonical text form; the inverse of parse_solution for well-formed input."""
    entries: list[tuple[str, list[ToolCall]]] = []
    for call in solution.calls:
        _check_ident(call.platform, "platform")
        if entries and entries[-1][0] == call.platform:
            entries[-1][1].append(call)
        else:
            entries.append((call.platform, [call]))
    rendered = []
    for platform, calls in entries:
        parts = []
        for call in calls:
            _check_ident(call.function, "function")
            args = ", ".join(
                f"{_check_ident(name, 'argument')}={serialize_value(value)}"
                for name, value in call.args.items()
            )
            parts.append(f"{call.function}({args})")
        rendered.append(f"{platform}:[" + ", ".join(parts) + "]")
    return "{" + ", ".join(rendered) + "}"

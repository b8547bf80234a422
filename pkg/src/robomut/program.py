"""Robot command DSL: AST, parser, unparser, validator and site addressing.

A program is a sequence of ``send("verb/arg/...")`` commands, ``if read(...)``
conditionals and ``repeat N do`` loops::

    send("moveto/x/@box.0.x")
    send("pick")
    if read("color") = "red" then
      send("turn/90")
    else
      send("turn/270")
    end
    send("release")

The grammar accepts any verb text; the vocabulary is enforced by
:func:`validate_program` so that naive string mutants stay representable.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass
from typing import Callable, Iterator, Optional, Sequence, Union

__all__ = [
    "Number", "Probe", "Word", "Arg", "Command", "If", "Repeat", "Statement",
    "Program", "SiteId", "Violation", "ParseError",
    "VERBS", "AXES", "COMPARATORS",
    "parse_program", "parse_payload", "unparse_program", "format_payload",
    "format_number", "validate_program", "iter_sites", "node_at",
    "replace_statement", "replace_node", "is_numeric_channel",
    "channels_read", "program_hash",
]

# verb -> argument signature; "axis", "num" (Number or Probe), "name"
VERBS: dict[str, tuple[str, ...]] = {
    "pick": (),
    "release": (),
    "move": ("axis", "num"),
    "moveto": ("axis", "num"),
    "lift": ("num",),
    "drop": ("num",),
    "turn": ("num",),
    "turnleft": ("num",),
    "turnright": ("num",),
    "wait": ("num",),
    "goto": ("name",),
}
AXES = ("x", "y", "z")
COMPARATORS = ("=", "!=", "<", ">")

_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_NUMBER_RE = re.compile(_NUMBER + r"\Z")
_CHANNEL = r"[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z0-9_]+)*"
_PROBE_RE = re.compile(
    r"(?P<neg>-?)@(?P<ch>" + _CHANNEL + r")(?:(?P<sign>[+-])(?P<off>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?))?\Z"
)
_CHANNEL_RE = re.compile(
    r"(?:color|robot\.(?:x|y|z|angle)|box\.(\d+)\.(?:x|y|z)|distance\.(\d+)\.(?:x|y|z))\Z"
)


class ParseError(ValueError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{line}:{column}: {message}")
        self.line = line
        self.column = column


# ---------------------------------------------------------------- AST nodes


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Probe:
    """Sensor reading used as an argument: ``±read(channel) + offset``."""

    channel: str
    offset: float = 0.0
    negated: bool = False


@dataclass(frozen=True)
class Word:
    """Bare text argument: an axis, a location name, or garbage from a naive edit."""

    text: str


Arg = Union[Number, Probe, Word]


@dataclass(frozen=True)
class Command:
    verb: str
    args: tuple[Arg, ...] = ()


@dataclass(frozen=True)
class If:
    channel: str
    cmp: str
    literal: Union[str, float]
    then: tuple["Statement", ...] = ()
    orelse: tuple["Statement", ...] = ()


@dataclass(frozen=True)
class Repeat:
    count: int
    body: tuple["Statement", ...] = ()


Statement = Union[Command, If, Repeat]


@dataclass(frozen=True)
class Program:
    statements: tuple[Statement, ...] = ()

    def __len__(self) -> int:
        return len(self.statements)


@dataclass(frozen=True, order=True)
class SiteId:
    """Address of an AST node: child indices from the root plus the node kind.

    Statement paths alternate statement index and branch index, e.g. ``(2, 1, 0)``
    is the first statement of the else-branch of top-level statement 2.  An
    argument site appends the argument index to its command's path.
    """

    path: tuple[int, ...]
    kind: str  # "command" | "condition" | "argument"

    def __str__(self) -> str:
        return ".".join(map(str, self.path)) + ":" + self.kind

    @classmethod
    def parse(cls, text: str) -> "SiteId":
        path, _, kind = text.partition(":")
        return cls(tuple(int(p) for p in path.split(".")) if path else (), kind or "command")


@dataclass(frozen=True)
class Violation:
    site: SiteId
    code: str
    message: str


# ---------------------------------------------------------------- formatting


def format_number(value: float) -> str:
    value = float(value)
    if math.isfinite(value) and value == int(value) and abs(value) < 1e16:
        return str(int(value))
    return repr(value)


def _format_arg(arg: Arg) -> str:
    if isinstance(arg, Number):
        return format_number(arg.value)
    if isinstance(arg, Probe):
        text = ("-" if arg.negated else "") + "@" + arg.channel
        if arg.offset:
            off = format_number(arg.offset)
            text += off if off.startswith("-") else "+" + off
        return text
    return arg.text


def format_payload(cmd: Command) -> str:
    return "/".join([cmd.verb, *(_format_arg(a) for a in cmd.args)])


def _format_literal(lit: Union[str, float]) -> str:
    return f'"{lit}"' if isinstance(lit, str) else format_number(lit)


def _unparse_block(stmts: Sequence[Statement], indent: int, out: list[str]) -> None:
    pad = "  " * indent
    for stmt in stmts:
        if isinstance(stmt, Command):
            out.append(f'{pad}send("{format_payload(stmt)}")')
        elif isinstance(stmt, If):
            out.append(f'{pad}if read("{stmt.channel}") {stmt.cmp} {_format_literal(stmt.literal)} then')
            _unparse_block(stmt.then, indent + 1, out)
            if stmt.orelse:
                out.append(f"{pad}else")
                _unparse_block(stmt.orelse, indent + 1, out)
            out.append(f"{pad}end")
        else:
            out.append(f"{pad}repeat {stmt.count} do")
            _unparse_block(stmt.body, indent + 1, out)
            out.append(f"{pad}end")


def unparse_program(program: Program) -> str:
    """Canonical text form; ``parse_program(unparse_program(p)) == p``."""
    lines: list[str] = []
    _unparse_block(program.statements, 0, lines)
    return "".join(line + "\n" for line in lines)


def program_hash(program: Program) -> str:
    return hashlib.sha256(unparse_program(program).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------- parsing


def _classify_part(text: str) -> Arg:
    if _NUMBER_RE.match(text) and math.isfinite(float(text)):
        return Number(float(text))
    m = _PROBE_RE.match(text)
    if m:
        offset = float(m.group("off")) if m.group("off") else 0.0
        if not math.isfinite(offset):
            return Word(text)
        if m.group("sign") == "-":
            offset = -offset
        return Probe(m.group("ch"), offset, bool(m.group("neg")))
    return Word(text)


def parse_payload(payload: str) -> Command:
    """Split a ``send`` payload into a command.  Total: never raises."""
    verb, *parts = payload.split("/")
    return Command(verb, tuple(_classify_part(p) for p in parts))


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<string>"[^"\n]*")
  | (?P<badstring>"[^"\n]*)
  | (?P<number>""" + _NUMBER + r"""(?![A-Za-z0-9_.]))
  | (?P<badnumber>[+-]?[0-9.][A-Za-z0-9_.]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>!=|=|<|>|\(|\))
  | (?P<other>.)
    """,
    re.VERBOSE,
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(source: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, line_start = 1, 0
    for m in _TOKEN_RE.finditer(source):
        kind, text = m.lastgroup, m.group()
        col = m.start() - line_start + 1
        if kind == "nl":
            line, line_start = line + 1, m.end()
        elif kind in ("ws", "comment"):
            continue
        elif kind == "badstring":
            raise ParseError("unterminated string", line, col)
        elif kind == "badnumber":
            raise ParseError(f"bad number {text!r}", line, col)
        elif kind == "other":
            raise ParseError(f"unexpected character {text!r}", line, col)
        else:
            toks.append(_Tok(kind, text, line, col))
    toks.append(_Tok("eof", "", line, len(source) - line_start + 1))
    return toks


class _Parser:
    def __init__(self, source: str):
        self.toks = _tokenize(source)
        self.pos = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.pos]

    def error(self, message: str, tok: Optional[_Tok] = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col)

    def take(self, kind: str, text: Optional[str] = None) -> _Tok:
        tok = self.tok
        if tok.kind != kind or (text is not None and tok.text != text):
            want = repr(text) if text else kind
            got = repr(tok.text) if tok.text else tok.kind
            raise self.error(f"expected {want}, got {got}")
        self.pos += 1
        return tok

    def at_keyword(self, *words: str) -> bool:
        return self.tok.kind == "ident" and self.tok.text in words

    def block(self, terminators: tuple[str, ...]) -> tuple[Statement, ...]:
        stmts = []
        while not (self.tok.kind == "eof" or self.at_keyword(*terminators)):
            stmts.append(self.statement())
        return tuple(stmts)

    def statement(self) -> Statement:
        tok = self.tok
        if self.at_keyword("send"):
            self.pos += 1
            self.take("op", "(")
            payload = self.take("string").text[1:-1]
            self.take("op", ")")
            return parse_payload(payload)
        if self.at_keyword("if"):
            return self.if_block()
        if self.at_keyword("repeat"):
            self.pos += 1
            count_tok = self.take("number")
            if not re.fullmatch(r"[+-]?\d+", count_tok.text):
                raise self.error(f"repeat count must be an integer, got {count_tok.text!r}", count_tok)
            self.take("ident", "do")
            body = self.block(("end",))
            self.expect_end(tok)
            return Repeat(int(count_tok.text), body)
        raise self.error(f"unexpected {tok.text or tok.kind!r}")

    def if_block(self) -> If:
        start = self.take("ident", "if")
        self.take("ident", "read")
        self.take("op", "(")
        channel = self.take("string").text[1:-1]
        self.take("op", ")")
        cmp_tok = self.take("op")
        if cmp_tok.text not in COMPARATORS:
            raise self.error(f"expected comparator, got {cmp_tok.text!r}", cmp_tok)
        if self.tok.kind == "string":
            literal: Union[str, float] = self.take("string").text[1:-1]
        else:
            num = self.take("number")
            literal = float(num.text)
            if not math.isfinite(literal):
                raise self.error(f"bad number {num.text!r}", num)
        self.take("ident", "then")
        then = self.block(("else", "end"))
        orelse: tuple[Statement, ...] = ()
        if self.at_keyword("else"):
            self.pos += 1
            orelse = self.block(("end",))
        self.expect_end(start)
        return If(channel, cmp_tok.text, literal, then, orelse)

    def expect_end(self, opener: _Tok) -> None:
        if self.tok.kind == "eof":
            raise self.error(f"block opened at {opener.line}:{opener.col} is never closed")
        self.take("ident", "end")

    def program(self) -> Program:
        stmts = self.block(())
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        return Program(stmts)


def parse_program(source: str) -> Program:
    """Parse DSL text into a :class:`Program`.

    Raises :class:`ParseError` (with line and column) on unbalanced blocks,
    malformed numbers outside payloads, or unexpected tokens.
    """
    return _Parser(source).program()


# ---------------------------------------------------------------- sites


def _children(stmt: Statement) -> tuple[tuple[Statement, ...], ...]:
    if isinstance(stmt, If):
        return (stmt.then, stmt.orelse)
    if isinstance(stmt, Repeat):
        return (stmt.body,)
    return ()


def _walk(stmts: Sequence[Statement], prefix: tuple[int, ...]) -> Iterator[tuple[SiteId, object]]:
    for i, stmt in enumerate(stmts):
        path = prefix + (i,)
        yield SiteId(path, "command"), stmt
        if isinstance(stmt, Command):
            for j, arg in enumerate(stmt.args):
                if isinstance(arg, (Number, Probe)):
                    yield SiteId(path + (j,), "argument"), arg
        elif isinstance(stmt, If):
            yield SiteId(path, "condition"), stmt
        for b, branch in enumerate(_children(stmt)):
            yield from _walk(branch, path + (b,))


def iter_sites(program: Program, kind: Optional[str] = None) -> Iterator[tuple[SiteId, object]]:
    """Yield ``(site, node)`` pairs in depth-first document order."""
    for site, node in _walk(program.statements, ()):
        if kind is None or site.kind == kind:
            yield site, node


def _statement_at(stmts: Sequence[Statement], path: Sequence[int]) -> Statement:
    stmt = stmts[path[0]]
    if len(path) == 1:
        return stmt
    return _statement_at(_children(stmt)[path[1]], path[2:])


def node_at(program: Program, site: SiteId):
    """Resolve a site to its node; raises ``LookupError`` for dangling sites."""
    try:
        if site.kind == "argument":
            cmd = _statement_at(program.statements, site.path[:-1])
            arg = cmd.args[site.path[-1]]  # type: ignore[union-attr]
            if not isinstance(arg, (Number, Probe)):
                raise LookupError(site)
            return arg
        stmt = _statement_at(program.statements, site.path)
    except (IndexError, AttributeError) as exc:
        raise LookupError(str(site)) from exc
    if site.kind == "condition" and not isinstance(stmt, If):
        raise LookupError(str(site))
    return stmt


def _edit(stmts: tuple[Statement, ...], path: Sequence[int],
          fn: Callable[[Statement], tuple[Statement, ...]]) -> tuple[Statement, ...]:
    i = path[0]
    if len(path) == 1:
        return stmts[:i] + fn(stmts[i]) + stmts[i + 1:]
    stmt = stmts[i]
    branch = path[1]
    if isinstance(stmt, If):
        if branch == 0:
            new: Statement = If(stmt.channel, stmt.cmp, stmt.literal, _edit(stmt.then, path[2:], fn), stmt.orelse)
        else:
            new = If(stmt.channel, stmt.cmp, stmt.literal, stmt.then, _edit(stmt.orelse, path[2:], fn))
    elif isinstance(stmt, Repeat):
        new = Repeat(stmt.count, _edit(stmt.body, path[2:], fn))
    else:
        raise LookupError(path)
    return stmts[:i] + (new,) + stmts[i + 1:]


def replace_statement(program: Program, path: Sequence[int],
                      fn: Callable[[Statement], tuple[Statement, ...]]) -> Program:
    """Return a copy of ``program`` where the statement at ``path`` is replaced by ``fn(stmt)``."""
    return Program(_edit(program.statements, tuple(path), fn))


def replace_node(program: Program, site: SiteId, new) -> Program:
    """Replace the node addressed by ``site`` (statement, condition or argument)."""
    if site.kind == "argument":
        j = site.path[-1]

        def swap_arg(cmd: Statement) -> tuple[Statement, ...]:
            args = list(cmd.args)  # type: ignore[union-attr]
            args[j] = new
            return (Command(cmd.verb, tuple(args)),)  # type: ignore[union-attr]

        return replace_statement(program, site.path[:-1], swap_arg)
    return replace_statement(program, site.path, lambda _s: (new,))


# ---------------------------------------------------------------- validation


def is_numeric_channel(channel: str) -> bool:
    return bool(_CHANNEL_RE.match(channel)) and channel != "color"


def _channel_problem(channel: str, box_ids: Optional[set[int]]) -> Optional[str]:
    m = _CHANNEL_RE.match(channel)
    if not m:
        return f"unknown channel {channel!r}"
    box = m.group(1) or m.group(2)
    if box is not None and box_ids is not None and int(box) not in box_ids:
        return f"channel {channel!r} names unknown box {box}"
    return None


def validate_program(program: Program, scenario=None) -> list[Violation]:
    """Static checks: verbs, arity, argument kinds, channels, repeat counts.

    With a scenario, box ids and location names are also checked.  An empty
    list means the program is executable.
    """
    box_ids = {b.id for b in scenario.boxes} if scenario is not None else None
    locations = set(scenario.locations) if scenario is not None else None
    out: list[Violation] = []

    for site, node in iter_sites(program, "command"):
        if isinstance(node, Repeat):
            if node.count < 1:
                out.append(Violation(site, "RepeatCount", f"repeat count must be >= 1, got {node.count}"))
            continue
        if isinstance(node, If):
            csite = SiteId(site.path, "condition")
            problem = _channel_problem(node.channel, box_ids)
            if problem:
                out.append(Violation(csite, "UnknownChannel", problem))
            elif (node.channel == "color") != isinstance(node.literal, str):
                out.append(Violation(csite, "LiteralKind",
                                     f"literal {node.literal!r} does not match channel {node.channel!r}"))
            continue
        cmd: Command = node  # type: ignore[assignment]
        sig = VERBS.get(cmd.verb)
        if sig is None:
            out.append(Violation(site, "UnknownVerb", f"unknown verb {cmd.verb!r}"))
            continue
        if len(cmd.args) != len(sig):
            out.append(Violation(site, "Arity", f"{cmd.verb} takes {len(sig)} argument(s), got {len(cmd.args)}"))
            continue
        for j, (want, arg) in enumerate(zip(sig, cmd.args)):
            asite = SiteId(site.path + (j,), "argument")
            if want == "axis":
                if not (isinstance(arg, Word) and arg.text in AXES):
                    out.append(Violation(site, "BadArgument", f"{cmd.verb}: expected axis, got {_format_arg(arg)!r}"))
            elif want == "name":
                if not isinstance(arg, Word) or not arg.text:
                    out.append(Violation(site, "BadArgument", f"{cmd.verb}: expected name, got {_format_arg(arg)!r}"))
                elif locations is not None and arg.text not in locations:
                    out.append(Violation(site, "UnknownLocation", f"unknown location {arg.text!r}"))
            elif isinstance(arg, Probe):
                problem = _channel_problem(arg.channel, box_ids)
                if problem:
                    out.append(Violation(asite, "UnknownChannel", problem))
                elif arg.channel == "color":
                    out.append(Violation(asite, "BadArgument", "color is not a numeric channel"))
            elif isinstance(arg, Number):
                if cmd.verb in ("turn", "wait") and arg.value < 0:
                    out.append(Violation(asite, "NegativeValue", f"{cmd.verb} does not accept negative values"))
            else:
                out.append(Violation(site, "BadArgument", f"{cmd.verb}: expected number, got {arg.text!r}"))
    return out


def channels_read(program: Program) -> list[str]:
    """Channels read by conditions and probes, in order of first appearance."""
    seen: list[str] = []
    for _site, node in iter_sites(program):
        ch = None
        if isinstance(node, If):
            ch = node.channel
        elif isinstance(node, Probe):
            ch = node.channel
        if ch is not None and ch not in seen:
            seen.append(ch)
    return seen

"""Concrete syntax for circuits, monitors, predicates and temporal formulas,
plus the line-oriented trace and report formats.

File grammar::

    file    := item*
    item    := circuit | monitor
    circuit := "circuit" NAME ("width" INT)? "{" body "}"
    monitor := "monitor" NAME "on" NAME ("width" INT)? "{" body "}"
    body    := (decl | wire | assign)* "output" names? ";" ("init" expr ";")?
    decl    := "reg" NAME ("[" INT "]")? ("=" value)? ";"
             | "mem" NAME "[" INT "]" ("width" INT)? ";"
    wire    := "wire" NAME "=" expr ";"
    assign  := NAME "<=" expr ";"
             | NAME "[" expr "]" "<=" expr ("hold" expr)? ";"

``reg x[4]`` declares a 4-bit register; ``mem m[16]`` declares 16 cells.
A file holding only a body (no ``circuit`` header) is read as one circuit
named ``main``.  Expression precedence follows C, with ``->`` and ``<->``
binding looser than ``||`` and ``?:`` loosest of all.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .ir import (
    BOT,
    ArrayRead,
    Assignment,
    Binary,
    BitSelect,
    Circuit,
    Const,
    Expr,
    Ite,
    Ref,
    RegisterDecl,
    Unary,
    Wire,
    untag,
)
from .logic.formula import (
    Always,
    And,
    Atom,
    BoundedFuture,
    Formula,
    Iff,
    Implies,
    Next,
    Not,
    Or,
)
from .simulator import TraceDump
from .transforms import Monitor


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int, source: str = "<input>"):
        self.message, self.line, self.col, self.source = message, line, col, source
        super().__init__(f"{source}:{line}:{col}: {message}")


# --------------------------------------------------------------------------
# lexer


# Keywords are contextual (the running example has a register called
# ``reg``); only ``bot`` is reserved everywhere.
KEYWORDS = frozenset({"bot"})

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|//[^\n]*|\#[^\n]*|/\*.*?\*/)
  | (?P<int>0[xX][0-9a-fA-F]+|0[bB][01]+|[0-9]+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.[0-9]+)*)
  | (?P<op><->|->|<<|>>|<=|>=|==|!=|&&|\|\||[-+*/%&|^~!<>?:()\[\]{};,=])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True, slots=True)
class Token:
    kind: str  # "int" | "name" | "op" | "eof"
    text: str
    line: int
    col: int


def tokenize(src: str, source: str = "<input>") -> list[Token]:
    out: list[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(src)
    while pos < n:
        m = _TOKEN.match(src, pos)
        if m is None:
            ch = src[pos]
            raise ParseError(f"unexpected character {ch!r}", line, pos - line_start + 1, source)
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            out.append(Token(kind, text, line, pos - line_start + 1))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


def _int(text: str) -> int:
    return int(text, 0) if text[:2].lower() in ("0x", "0b") else int(text)


# --------------------------------------------------------------------------
# parser

# binding power of binary operators; higher binds tighter
_BINARY_PREC = {
    "<->": 2,
    "->": 3,
    "||": 4,
    "&&": 5,
    "|": 6,
    "^": 7,
    "&": 8,
    "==": 9, "!=": 9,
    "<": 10, "<=": 10, ">": 10, ">=": 10,
    "<<": 11, ">>": 11,
    "+": 12, "-": 12,
    "*": 13, "/": 13, "%": 13,
}
_RIGHT_ASSOC = {"->"}
_UNARY_PREC = 14
_TERNARY_PREC = 1


@dataclass
class _Temporal(Expr):
    """Placeholder node for a temporal operator met while parsing a formula."""

    kind: str
    body: Expr
    k: int = 0

    def children(self):
        return (self.body,)


@dataclass
class Module:
    """Everything defined in one source file."""

    circuits: dict[str, Circuit] = field(default_factory=dict)
    monitors: dict[str, Monitor] = field(default_factory=dict)

    def circuit(self, name: str | None = None) -> Circuit:
        if name is None:
            if len(self.circuits) != 1:
                raise KeyError(f"file defines {len(self.circuits)} circuits; pick one by name")
            return next(iter(self.circuits.values()))
        try:
            return self.circuits[name]
        except KeyError:
            raise KeyError(f"no circuit named {name}") from None

    def monitor(self, name: str) -> Monitor:
        try:
            return self.monitors[name]
        except KeyError:
            raise KeyError(f"no monitor named {name}") from None


class _Parser:
    def __init__(self, src: str, source: str, *, allow_tags: bool, temporal: bool = False):
        self.toks = tokenize(src, source)
        self.i = 0
        self.source = source
        self.allow_tags = allow_tags
        self.temporal = temporal

    # token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(message, tok.line, tok.col, self.source)

    def at(self, text: str) -> bool:
        t = self.tok
        return t.text == text and t.kind in ("op", "name")

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def expect_int(self) -> int:
        t = self.tok
        if t.kind != "int":
            raise self.error(f"expected an integer, found {t.text or 'end of input'!r}")
        self.i += 1
        return _int(t.text)

    def name(self, *, declaring: bool = False) -> str:
        t = self.tok
        if t.kind != "name" or t.text in KEYWORDS:
            raise self.error(f"expected a name, found {t.text or 'end of input'!r}")
        if declaring and not self.allow_tags and untag(t.text)[1] is not None:
            raise self.error(f"name {t.text} uses the reserved copy suffix")
        self.i += 1
        return t.text

    # expressions ---------------------------------------------------------

    def expr(self, min_prec: int = 0) -> Expr:
        lhs = self.unary()
        while True:
            t = self.tok
            if t.kind == "op" and t.text == "?" and min_prec <= _TERNARY_PREC:
                self.i += 1
                then = self.expr()
                self.expect(":")
                other = self.expr(_TERNARY_PREC)
                lhs = Ite(lhs, then, other)
                continue
            prec = _BINARY_PREC.get(t.text) if t.kind == "op" else None
            if prec is None or prec < min_prec:
                return lhs
            self.i += 1
            rhs = self.expr(prec if t.text in _RIGHT_ASSOC else prec + 1)
            lhs = Binary(t.text, lhs, rhs)

    def unary(self) -> Expr:
        t = self.tok
        if t.kind == "op" and t.text in ("-", "~", "!"):
            self.i += 1
            return Unary(t.text, self.unary())
        if self.temporal and t.kind == "name" and t.text in ("X", "G", "F"):
            nxt = self.peek()
            if t.text == "F" and nxt.text == "<=":
                self.i += 2
                k = self.expect_int()
                if k < 1:
                    raise self.error("bounded future needs a bound of at least 1", t)
                return _Temporal("F", self.unary(), k)
            if t.text in ("X", "G") and self._starts_operand(nxt):
                self.i += 1
                return _Temporal(t.text, self.unary())
        return self.postfix(self.primary())

    @staticmethod
    def _starts_operand(t: Token) -> bool:
        return t.kind in ("int", "name") or t.text in ("(", "-", "~", "!")

    def primary(self) -> Expr:
        t = self.tok
        if t.kind == "int":
            self.i += 1
            return Const(_int(t.text))
        if t.kind == "name" and t.text == "bot":
            self.i += 1
            return Const(BOT)
        if t.kind == "op" and t.text == "(":
            self.i += 1
            inner = self.expr()
            self.expect(")")
            return inner
        if t.kind == "name" and t.text not in KEYWORDS:
            self.i += 1
            if self.at("["):
                return self.bracket(t.text, t)
            return Ref(t.text)
        raise self.error(f"expected an expression, found {t.text or 'end of input'!r}")

    def bracket(self, name: str | None, start: Token, base: Expr | None = None) -> Expr:
        self.expect("[")
        first = self.expr()
        if self.accept(":"):
            lo = self.expr()
            self.expect("]")
            return BitSelect(base if base is not None else Ref(name), first, lo)
        self.expect("]")
        if name is None:
            raise self.error("only a named memory can be indexed", start)
        return ArrayRead(name, first)

    def postfix(self, e: Expr) -> Expr:
        while self.at("["):
            e = self.bracket(None, self.tok, e)
        return e

    # circuits ------------------------------------------------------------

    def file(self) -> Module:
        mod = Module()
        if self.tok.kind != "eof" and not (self.at("circuit") or self.at("monitor")):
            c = self.body("main", 8)
            if self.tok.kind != "eof":
                raise self.error(f"unexpected {self.tok.text!r} after circuit body")
            mod.circuits[c.name] = c
            return mod
        while self.tok.kind != "eof":
            start = self.tok
            if self.accept("circuit"):
                name = self.name()
                width = self.expect_int() if self.accept("width") else 8
                self.expect("{")
                c = self.body(name, width)
                self.expect("}")
                if name in mod.circuits or name in mod.monitors:
                    raise self.error(f"{name} is defined twice", start)
                mod.circuits[name] = c
            elif self.accept("monitor"):
                name = self.name()
                self.expect("on")
                base = self.name()
                width = self.expect_int() if self.accept("width") else None
                self.expect("{")
                if width is None:
                    width = mod.circuits[base].width if base in mod.circuits else 8
                c = self.body(name, width)
                self.expect("}")
                if name in mod.circuits or name in mod.monitors:
                    raise self.error(f"{name} is defined twice", start)
                mod.monitors[name] = Monitor(c, base)
            else:
                raise self.error(f"expected 'circuit' or 'monitor', found {self.tok.text!r}")
        return mod

    def _section(self, word: str) -> bool:
        """``word`` starts a declaration or section rather than an assignment."""
        if not (self.tok.kind == "name" and self.tok.text == word):
            return False
        nxt = self.peek()
        return not (nxt.kind == "op" and nxt.text in ("<=", "["))

    def body(self, name: str, width: int) -> Circuit:
        decls: list[RegisterDecl] = []
        wires: list[Wire] = []
        assigns: list[Assignment] = []
        while not self._section("output"):
            t = self.tok
            if t.kind == "eof" or self.at("}"):
                raise self.error("expected 'output' section")
            if self._section("reg"):
                self.i += 1
                rname = self.name(declaring=True)
                rwidth = width
                if self.accept("["):
                    rwidth = self.expect_int()
                    self.expect("]")
                reset = None
                if self.accept("="):
                    reset = BOT if self.accept("bot") else self.expect_int()
                self.expect(";")
                decls.append(RegisterDecl(rname, rwidth, None, reset))
            elif self._section("mem"):
                self.i += 1
                rname = self.name(declaring=True)
                self.expect("[")
                length = self.expect_int()
                self.expect("]")
                rwidth = self.expect_int() if self.accept("width") else width
                self.expect(";")
                decls.append(RegisterDecl(rname, rwidth, length))
            elif self._section("wire"):
                self.i += 1
                wname = self.name(declaring=True)
                self.expect("=")
                wires.append(Wire(wname, self.expr()))
                self.expect(";")
            else:
                target = self.name()
                index = hold = None
                if self.accept("["):
                    index = self.expr()
                    self.expect("]")
                self.expect("<=")
                rhs = self.expr()
                if index is not None and self.accept("hold"):
                    hold = self.expr()
                self.expect(";")
                assigns.append(Assignment(target, rhs, index, hold))
        self.expect("output")
        outputs: list[str] = []
        if not self.at(";"):
            outputs.append(self.name())
            while self.accept(","):
                outputs.append(self.name())
        self.expect(";")
        init = None
        if self.accept("init"):
            init = self.expr()
            self.expect(";")
        return Circuit(name, width, tuple(decls), tuple(wires), tuple(assigns), tuple(outputs), init)


def parse_file(src: str, source: str = "<input>", *, allow_tags: bool = False) -> Module:
    return _Parser(src, source, allow_tags=allow_tags).file()


def parse_circuit(src: str, source: str = "<input>", *, name: str | None = None, allow_tags: bool = False) -> Circuit:
    """Parse one circuit; ``name`` picks it out of a multi-item file."""
    return parse_file(src, source, allow_tags=allow_tags).circuit(name)


def parse_expr(src: str, over: Circuit | None = None, source: str = "<expr>") -> Expr:
    p = _Parser(src, source, allow_tags=True)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r} after expression")
    if over is not None:
        _resolve(e, over, source)
    return e


def _resolve(e: Expr, over: Circuit, source: str) -> None:
    from .ir import referenced_names

    missing = sorted(n for n in referenced_names(e) if not over.declared(n))
    if missing:
        raise ParseError(f"unresolved identifier {missing[0]}", 1, 1, source)


def parse_formula(src: str, over: Circuit | None = None, source: str = "<formula>") -> Formula:
    """Parse a temporal formula; subterms without temporal operators are atoms."""
    p = _Parser(src, source, allow_tags=True, temporal=True)
    e = p.expr()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r} after formula")
    f = _lift(e, p)
    if over is not None:
        from .logic.formula import atoms

        for a in atoms(f):
            _resolve(a, over, source)
    return f


def _has_temporal(e: Expr) -> bool:
    return isinstance(e, _Temporal) or any(_has_temporal(c) for c in e.children())


def _lift(e: Expr, p: _Parser) -> Formula:
    if not _has_temporal(e):
        return Atom(e)
    if isinstance(e, _Temporal):
        body = _lift(e.body, p)
        if e.kind == "X":
            return Next(body)
        if e.kind == "G":
            return Always(body)
        return BoundedFuture(e.k, body)
    if isinstance(e, Unary) and e.op == "!":
        return Not(_lift(e.arg, p))
    if isinstance(e, Binary):
        lhs, rhs = _lift(e.lhs, p), _lift(e.rhs, p)
        if e.op == "&&":
            return And((lhs, rhs))
        if e.op == "||":
            return Or((lhs, rhs))
        if e.op == "->":
            return Implies(lhs, rhs)
        if e.op == "<->":
            return Iff(lhs, rhs)
    raise ParseError("temporal operators may only appear under boolean connectives", 1, 1, p.source)


# --------------------------------------------------------------------------
# printer


def _value(v) -> str:
    return "bot" if v is BOT else str(v)


def print_expr(e: Expr, prec: int = 0) -> str:
    if isinstance(e, Const):
        return _value(e.value)
    if isinstance(e, Ref):
        return e.name
    if isinstance(e, ArrayRead):
        return f"{e.name}[{print_expr(e.index)}]"
    if isinstance(e, BitSelect):
        return f"{print_expr(e.arg, _UNARY_PREC + 1)}[{print_expr(e.hi)}:{print_expr(e.lo)}]"
    if isinstance(e, Unary):
        s = e.op + print_expr(e.arg, _UNARY_PREC)
        return s if prec <= _UNARY_PREC else f"({s})"
    if isinstance(e, Binary):
        p = _BINARY_PREC[e.op]
        if e.op in _RIGHT_ASSOC:
            s = f"{print_expr(e.lhs, p + 1)} {e.op} {print_expr(e.rhs, p)}"
        else:
            s = f"{print_expr(e.lhs, p)} {e.op} {print_expr(e.rhs, p + 1)}"
        return s if prec <= p else f"({s})"
    if isinstance(e, Ite):
        s = f"{print_expr(e.cond, _TERNARY_PREC + 1)} ? {print_expr(e.then)} : {print_expr(e.other, _TERNARY_PREC)}"
        return s if prec <= _TERNARY_PREC else f"({s})"
    raise TypeError(f"not an expression: {e!r}")


def print_formula(f: Formula, prec: int = 0) -> str:
    if isinstance(f, Atom):
        return print_expr(f.expr, _UNARY_PREC + 1) if prec > _UNARY_PREC else print_expr(f.expr, prec)
    if isinstance(f, Next):
        s = "X " + print_formula(f.body, _UNARY_PREC + 1)
    elif isinstance(f, Always):
        s = "G " + print_formula(f.body, _UNARY_PREC + 1)
    elif isinstance(f, BoundedFuture):
        s = f"F<={f.k} " + print_formula(f.body, _UNARY_PREC + 1)
    elif isinstance(f, Not):
        s = "!" + print_formula(f.body, _UNARY_PREC + 1)
    else:
        if isinstance(f, (And, Or)):
            op = "&&" if isinstance(f, And) else "||"
            p = _BINARY_PREC[op]
            s = f" {op} ".join(print_formula(g, p + 1) for g in f.parts)
        elif isinstance(f, Implies):
            p = _BINARY_PREC["->"]
            s = f"{print_formula(f.lhs, p + 1)} -> {print_formula(f.rhs, p)}"
        else:
            p = _BINARY_PREC["<->"]
            s = f"{print_formula(f.lhs, p)} <-> {print_formula(f.rhs, p + 1)}"
        return s if prec <= p else f"({s})"
    return s if prec <= _UNARY_PREC else f"({s})"


def _body_lines(c: Circuit, indent: str = "  ") -> list[str]:
    lines = []
    for d in c.decls:
        if d.is_array:
            w = "" if d.width == c.width else f" width {d.width}"
            lines.append(f"{indent}mem {d.name}[{d.length}]{w};")
        else:
            w = "" if d.width == c.width else f"[{d.width}]"
            r = "" if d.reset is None else f" = {_value(d.reset)}"
            lines.append(f"{indent}reg {d.name}{w}{r};")
    for w in c.wires:
        lines.append(f"{indent}wire {w.name} = {print_expr(w.expr)};")
    for a in c.assigns:
        lhs = a.target if a.index is None else f"{a.target}[{print_expr(a.index)}]"
        hold = "" if a.hold is None else f" hold {print_expr(a.hold)}"
        lines.append(f"{indent}{lhs} <= {print_expr(a.expr)}{hold};")
    lines.append(f"{indent}output{' ' if c.outputs else ''}{', '.join(c.outputs)};")
    if c.init is not None:
        lines.append(f"{indent}init {print_expr(c.init)};")
    return lines


def print_circuit(c: Circuit) -> str:
    return "\n".join([f"circuit {c.name} width {c.width} {{"] + _body_lines(c) + ["}"]) + "\n"


def print_monitor(m: Monitor) -> str:
    c = m.circuit
    head = f"monitor {c.name} on {m.base} width {c.width} {{"
    return "\n".join([head] + _body_lines(c) + ["}"]) + "\n"


def print_module(mod: Module) -> str:
    parts = [print_circuit(c) for c in mod.circuits.values()]
    parts += [print_monitor(m) for m in mod.monitors.values()]
    return "\n".join(parts)


# --------------------------------------------------------------------------
# traces


def _fmt_cell(v) -> str:
    if isinstance(v, tuple):
        return "[" + ",".join(_value(x) for x in v) + "]"
    return _value(v)


def _parse_cell(text: str, where: str):
    if text.startswith("[") and text.endswith("]"):
        inner = text[1:-1]
        return tuple(_parse_cell(x, where) for x in inner.split(",")) if inner else ()
    if text == "bot":
        return BOT
    try:
        return _int(text)
    except ValueError:
        raise ValueError(f"{where}: malformed value {text!r}") from None


def dump_trace(t: TraceDump) -> str:
    lines = [f"trace role={t.role}"]
    for cycle, rec in t.rows:
        fields = " ".join(f"{k}={_fmt_cell(v)}" for k, v in rec)
        lines.append(f"cycle={cycle}" + (f" {fields}" if fields else ""))
    return "\n".join(lines) + "\n"


def load_trace(text: str) -> TraceDump:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("trace role="):
        raise ValueError("line 1: expected 'trace role=...' header")
    role = lines[0][len("trace role="):]
    rows = []
    last = -1
    for no, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if not parts[0].startswith("cycle="):
            raise ValueError(f"line {no}: expected cycle=<n>")
        try:
            cycle = int(parts[0][6:])
        except ValueError:
            raise ValueError(f"line {no}: malformed cycle number") from None
        if cycle <= last:
            raise ValueError(f"line {no}: cycles must increase")
        last = cycle
        rec = []
        for p in parts[1:]:
            key, sep, val = p.partition("=")
            if not sep or not key:
                raise ValueError(f"line {no}: expected name=value, found {p!r}")
            rec.append((key, _parse_cell(val, f"line {no}")))
        rows.append((cycle, tuple(rec)))
    return TraceDump(tuple(rows), role)


def dump_fields(fields: Iterable[tuple[str, object]]) -> str:
    """``key=value`` lines; values are printed with ``str`` except ``BOT``."""
    return "".join(f"{k}={_fmt_cell(v) if not isinstance(v, str) else v}\n" for k, v in fields)


def load_fields(text: str) -> list[tuple[str, str]]:
    out = []
    for ln in text.splitlines():
        if not ln.strip():
            continue
        k, sep, v = ln.partition("=")
        if not sep:
            raise ValueError(f"malformed line {ln!r}")
        out.append((k, v))
    return out


def format_valuation(mu: Mapping) -> str:
    return " ".join(f"{k}={_fmt_cell(v)}" for k, v in mu.items())


def iter_columns(t: TraceDump, names: Iterable[str]) -> Iterator[tuple]:
    for _, rec in t.rows:
        d = dict(rec)
        yield tuple(d[n] for n in names)

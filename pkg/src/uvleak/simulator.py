"""Cycle semantics of uVlog circuits.

``eval_expr``/``step`` are the reference interpreter.  ``compiled(c)`` turns a
circuit into generated Python closures with identical behaviour; the oracles
use it because they simulate millions of cycles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .ir import (
    BOT,
    ArrayRead,
    Binary,
    BitSelect,
    Bottom,
    Circuit,
    Const,
    Expr,
    Ite,
    Ref,
    Unary,
)

Valuation = dict  # register name -> Value, or tuple of Values for arrays


# --------------------------------------------------------------------------
# operators


def apply_unary(op: str, a, mask: int):
    if a is BOT:
        return BOT
    if op == "-":
        return (-a) & mask
    if op == "~":
        return (~a) & mask
    if op == "!":
        return 1 if a == 0 else 0
    raise ValueError(f"unknown unary operator {op}")


def apply_binary(op: str, a, b, width: int):
    if a is BOT or b is BOT:
        return BOT
    mask = (1 << width) - 1
    if op == "+":
        return (a + b) & mask
    if op == "-":
        return (a - b) & mask
    if op == "*":
        return (a * b) & mask
    if op == "/":
        return BOT if b == 0 else a // b
    if op == "%":
        return BOT if b == 0 else a % b
    if op == "&":
        return a & b
    if op == "|":
        return a | b
    if op == "^":
        return a ^ b
    if op == "<<":
        return (a << b) & mask if b < width else 0
    if op == ">>":
        return a >> b if b < width else 0
    if op == "==":
        return int(a == b)
    if op == "!=":
        return int(a != b)
    if op == "<":
        return int(a < b)
    if op == "<=":
        return int(a <= b)
    if op == ">":
        return int(a > b)
    if op == ">=":
        return int(a >= b)
    if op == "&&":
        return int(a != 0 and b != 0)
    if op == "||":
        return int(a != 0 or b != 0)
    if op == "->":
        return int(a == 0 or b != 0)
    if op == "<->":
        return int((a != 0) == (b != 0))
    raise ValueError(f"unknown binary operator {op}")


def bit_select(a, hi, lo, width: int):
    if a is BOT or hi is BOT or lo is BOT or lo > hi or hi >= width:
        return BOT
    return (a >> lo) & ((1 << (hi - lo + 1)) - 1)


def truncate(v, width: int):
    return v if v is BOT else v & ((1 << width) - 1)


# --------------------------------------------------------------------------
# reference interpreter


def eval_expr(e: Expr, mu: Mapping, c: Circuit, _wires: dict | None = None):
    """Value of ``e`` in state ``mu`` of circuit ``c``."""
    if _wires is None:
        _wires = {}
    return _eval(e, mu, c, _wires)


def _eval(e, mu, c, wcache):
    if isinstance(e, Const):
        return e.value if e.value is BOT else e.value & c.mask
    if isinstance(e, Ref):
        name = e.name
        if name in c.wire_map:
            if name not in wcache:
                wcache[name] = _eval(c.wire_map[name], mu, c, wcache)
            return wcache[name]
        return mu[name]
    if isinstance(e, Binary):
        return apply_binary(e.op, _eval(e.lhs, mu, c, wcache), _eval(e.rhs, mu, c, wcache), c.width)
    if isinstance(e, Unary):
        return apply_unary(e.op, _eval(e.arg, mu, c, wcache), c.mask)
    if isinstance(e, Ite):
        cond = _eval(e.cond, mu, c, wcache)
        if cond is BOT:
            return BOT
        return _eval(e.then if cond != 0 else e.other, mu, c, wcache)
    if isinstance(e, ArrayRead):
        idx = _eval(e.index, mu, c, wcache)
        cells = mu[e.name]
        if idx is BOT or idx >= len(cells):
            return BOT
        return cells[idx]
    if isinstance(e, BitSelect):
        return bit_select(
            _eval(e.arg, mu, c, wcache),
            _eval(e.hi, mu, c, wcache),
            _eval(e.lo, mu, c, wcache),
            c.width,
        )
    raise TypeError(f"not an expression: {e!r}")


def truthy(v) -> bool:
    """Predicate reading of a value: defined and nonzero (``BOT`` is false)."""
    return v is not BOT and v != 0


def satisfies(mu: Mapping, phi: Expr, c: Circuit) -> bool:
    return truthy(eval_expr(phi, mu, c))


def step(c: Circuit, mu: Mapping) -> Valuation:
    """One clock cycle: every right-hand side reads the pre-state."""
    wires: dict = {}
    nxt = dict(mu)
    for a in c.assigns:
        decl = c.registers[a.target]
        if a.index is None:
            nxt[a.target] = truncate(_eval(a.expr, mu, c, wires), decl.width)
            continue
        if a.hold is not None and truthy(_eval(a.hold, mu, c, wires)):
            continue
        idx = _eval(a.index, mu, c, wires)
        cells = mu[a.target]
        if idx is BOT or idx >= len(cells):
            continue
        data = truncate(_eval(a.expr, mu, c, wires), decl.width)
        nxt[a.target] = cells[:idx] + (data,) + cells[idx + 1:]
    return nxt


def run(c: Circuit, mu: Mapping, n: int) -> Valuation:
    out = dict(mu)
    for _ in range(n):
        out = step(c, out)
    return out


def project(mu: Mapping, c: Circuit) -> dict:
    """Output record of state ``mu``: output name -> value."""
    wires: dict = {}
    return {o: _eval(Ref(o), mu, c, wires) for o in c.outputs}


# --------------------------------------------------------------------------
# valuations


def make_valuation(
    c: Circuit,
    values: Mapping[str, object] | None = None,
    *,
    fill=0,
) -> Valuation:
    """A total valuation for ``c``.

    Scalars default to their declared reset value (or ``fill``); arrays may
    be given as a sequence (missing tail cells take ``fill``) or a mapping
    from index to value.
    """
    values = dict(values or {})
    mu: Valuation = {}
    for d in c.decls:
        given = values.pop(d.name, None)
        if d.is_array:
            cells = [fill] * d.length
            if isinstance(given, Mapping):
                for k, v in given.items():
                    cells[int(k)] = v
            elif given is not None:
                for k, v in enumerate(given):
                    if k < d.length:
                        cells[k] = v
            mu[d.name] = tuple(truncate(v, d.width) for v in cells)
        else:
            if given is None:
                given = d.reset if d.reset is not None else fill
            mu[d.name] = truncate(given, d.width)
    if values:
        raise KeyError(f"not registers of {c.name}: {sorted(values)}")
    return mu


def restrict(mu: Mapping, names: Iterable[str]) -> dict:
    return {n: mu[n] for n in names if n in mu}


# --------------------------------------------------------------------------
# traces


@dataclass(frozen=True)
class TraceDump:
    """Sequence of (cycle, output record) rows.

    ``role`` is ``"full"`` or ``"filtered(<predicate>)"``; filtered dumps keep
    the original cycle numbers.
    """

    rows: tuple[tuple[int, tuple[tuple[str, object], ...]], ...] = ()
    role: str = "full"

    def column(self, name: str) -> list:
        return [dict(r)[name] for _, r in self.rows]

    def records(self) -> list[dict]:
        return [dict(r) for _, r in self.rows]

    @property
    def cycles(self) -> list[int]:
        return [cyc for cyc, _ in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def _row(cycle: int, record: Mapping) -> tuple:
    return (cycle, tuple(record.items()))


def trace_prefix(c: Circuit, mu: Mapping, n: int) -> TraceDump:
    fast = compiled(c)
    rows = []
    cur = dict(mu)
    for i in range(n):
        rows.append(_row(i, fast.project(cur)))
        if i + 1 < n:
            cur = fast.step(cur)
    return TraceDump(tuple(rows))


def filtered_trace_prefix(
    c: Circuit, mu: Mapping, phi: Expr, n: int, *, label: str | None = None
) -> TraceDump:
    fast = compiled(c)
    pred = fast.predicate(phi)
    rows = []
    cur = dict(mu)
    for i in range(n):
        if pred(cur):
            rows.append(_row(i, fast.project(cur)))
        if i + 1 < n:
            cur = fast.step(cur)
    if label is None:
        from .textio import print_expr

        label = print_expr(phi)
    return TraceDump(tuple(rows), role=f"filtered({label})")


# --------------------------------------------------------------------------
# generated fast path


@dataclass
class CompiledCircuit:
    circuit: Circuit
    step: Callable[[Mapping], Valuation]
    project: Callable[[Mapping], dict]
    _predicates: dict = field(default_factory=dict)

    def predicate(self, phi: Expr) -> Callable[[Mapping], bool]:
        fn = self._predicates.get(phi)
        if fn is None:
            fn = self._predicates[phi] = _compile_values(self.circuit, {"_p": phi}, as_predicate=True)
        return fn

    def values(self, exprs: Mapping[str, Expr]) -> Callable[[Mapping], dict]:
        return _compile_values(self.circuit, exprs)

    def run(self, mu: Mapping, n: int) -> Valuation:
        cur = dict(mu)
        for _ in range(n):
            cur = self.step(cur)
        return cur


_COMPILED: dict[int, tuple[Circuit, CompiledCircuit]] = {}


def compiled(c: Circuit) -> CompiledCircuit:
    hit = _COMPILED.get(id(c))
    if hit is not None and hit[0] is c:
        return hit[1]
    cc = CompiledCircuit(c, _compile_step(c), _compile_values(c, {o: Ref(o) for o in c.outputs}))
    if len(_COMPILED) > 256:
        _COMPILED.clear()
    _COMPILED[id(c)] = (c, cc)
    return cc


class _Gen:
    """Emits Python expression source for uVlog expressions.

    Wires are hoisted into statements computed once per call in dependency
    order, so each wire is evaluated at most once per cycle.
    """

    def __init__(self, c: Circuit):
        self.c = c
        self.counter = 0
        self.wire_vars = {name: f"w_{i}" for i, name in enumerate(c.wire_order)}
        self.reg_vars = {name: f"r_{i}" for i, name in enumerate(c.registers)}

    def tmp(self) -> str:
        self.counter += 1
        return f"_t{self.counter}"

    def expr(self, e: Expr) -> str:
        c = self.c
        if isinstance(e, Const):
            return "BOT" if e.value is BOT else str(e.value & c.mask)
        if isinstance(e, Ref):
            if e.name in self.wire_vars:
                return self.wire_vars[e.name]
            return self.reg_vars[e.name]
        if isinstance(e, Unary):
            a = self.tmp()
            inner = self.expr(e.arg)
            body = {
                "-": f"(-{a}) & {c.mask}",
                "~": f"(~{a}) & {c.mask}",
                "!": f"(1 if {a} == 0 else 0)",
            }[e.op]
            return f"(BOT if ({a} := {inner}) is BOT else {body})"
        if isinstance(e, Binary) and e.op in ("&&", "||"):
            # long conjunctions (candidate pools) would otherwise nest past
            # what the Python parser accepts, so flatten them into one call
            parts = _flatten(e, e.op)
            if len(parts) > 2:
                fn = "_all" if e.op == "&&" else "_any"
                return f"{fn}({', '.join(self.expr(x) for x in parts)})"
        if isinstance(e, Binary):
            a, b = self.tmp(), self.tmp()
            lhs, rhs = self.expr(e.lhs), self.expr(e.rhs)
            w, m = c.width, c.mask
            body = {
                "+": f"({a} + {b}) & {m}",
                "-": f"({a} - {b}) & {m}",
                "*": f"({a} * {b}) & {m}",
                "/": f"(BOT if {b} == 0 else {a} // {b})",
                "%": f"(BOT if {b} == 0 else {a} % {b})",
                "&": f"({a} & {b})",
                "|": f"({a} | {b})",
                "^": f"({a} ^ {b})",
                "<<": f"((({a} << {b}) & {m}) if {b} < {w} else 0)",
                ">>": f"(({a} >> {b}) if {b} < {w} else 0)",
                "==": f"int({a} == {b})",
                "!=": f"int({a} != {b})",
                "<": f"int({a} < {b})",
                "<=": f"int({a} <= {b})",
                ">": f"int({a} > {b})",
                ">=": f"int({a} >= {b})",
                "&&": f"int({a} != 0 and {b} != 0)",
                "||": f"int({a} != 0 or {b} != 0)",
                "->": f"int({a} == 0 or {b} != 0)",
                "<->": f"int(({a} != 0) == ({b} != 0))",
            }[e.op]
            return f"(BOT if ({a} := {lhs}) is BOT or ({b} := {rhs}) is BOT else {body})"
        if isinstance(e, Ite):
            t = self.tmp()
            cond = self.expr(e.cond)
            return f"(BOT if ({t} := {cond}) is BOT else ({self.expr(e.then)} if {t} else {self.expr(e.other)}))"
        if isinstance(e, ArrayRead):
            t = self.tmp()
            arr = self.reg_vars[e.name]
            n = c.registers[e.name].length
            idx = self.expr(e.index)
            return f"(BOT if ({t} := {idx}) is BOT or {t} >= {n} else {arr}[{t}])"
        if isinstance(e, BitSelect):
            a, h, lo = self.tmp(), self.tmp(), self.tmp()
            return (
                f"(BOT if ({a} := {self.expr(e.arg)}) is BOT or ({h} := {self.expr(e.hi)}) is BOT"
                f" or ({lo} := {self.expr(e.lo)}) is BOT or {lo} > {h} or {h} >= {c.width}"
                f" else ({a} >> {lo}) & ((1 << ({h} - {lo} + 1)) - 1))"
            )
        raise TypeError(f"not an expression: {e!r}")

    def prologue(self, needed_wires: Iterable[str] | None = None) -> list[str]:
        lines = [f"    {v} = mu[{name!r}]" for name, v in self.reg_vars.items()]
        wanted = set(self.c.wire_order if needed_wires is None else needed_wires)
        for name in self.c.wire_order:
            if name in wanted:
                lines.append(f"    {self.wire_vars[name]} = {self.expr(self.c.wire_map[name])}")
        return lines


def _needed_wires(c: Circuit, exprs: Iterable[Expr]) -> set[str]:
    from .ir import referenced_names

    todo = []
    for e in exprs:
        todo.extend(referenced_names(e) & c.wire_map.keys())
    seen: set[str] = set()
    while todo:
        w = todo.pop()
        if w in seen:
            continue
        seen.add(w)
        todo.extend(referenced_names(c.wire_map[w]) & c.wire_map.keys())
    return seen


def _flatten(e: Expr, op: str) -> list[Expr]:
    out, todo = [], [e]
    while todo:
        x = todo.pop()
        if isinstance(x, Binary) and x.op == op:
            todo += [x.rhs, x.lhs]
        else:
            out.append(x)
    return out


def _all(*vals):
    return BOT if any(v is BOT for v in vals) else int(all(v != 0 for v in vals))


def _any(*vals):
    return BOT if any(v is BOT for v in vals) else int(any(v != 0 for v in vals))


def _exec(src: str, name: str):
    ns: dict = {"BOT": BOT, "Bottom": Bottom, "_all": _all, "_any": _any}
    exec(compile(src, f"<uvleak:{name}>", "exec"), ns)
    return ns["fn"]


def _compile_step(c: Circuit):
    g = _Gen(c)
    exprs = []
    for a in c.assigns:
        exprs += [x for x in (a.expr, a.index, a.hold) if x is not None]
    lines = ["def fn(mu):"] + g.prologue(_needed_wires(c, exprs)) + ["    nxt = dict(mu)"]
    for a in c.assigns:
        decl = c.registers[a.target]
        wmask = (1 << decl.width) - 1
        if a.index is None:
            t = g.tmp()
            lines.append(f"    nxt[{a.target!r}] = BOT if ({t} := {g.expr(a.expr)}) is BOT else {t} & {wmask}")
            continue
        arr = g.reg_vars[a.target]
        indent = "    "
        if a.hold is not None:
            h = g.tmp()
            lines.append(f"    {h} = {g.expr(a.hold)}")
            lines.append(f"    if {h} is BOT or {h} == 0:")
            indent = "        "
        i, d = g.tmp(), g.tmp()
        lines.append(f"{indent}{i} = {g.expr(a.index)}")
        lines.append(f"{indent}if {i} is not BOT and {i} < {decl.length}:")
        lines.append(f"{indent}    {d} = {g.expr(a.expr)}")
        lines.append(f"{indent}    {d} = BOT if {d} is BOT else {d} & {wmask}")
        lines.append(f"{indent}    nxt[{a.target!r}] = {arr}[:{i}] + ({d},) + {arr}[{i} + 1:]")
    lines.append("    return nxt")
    return _exec("\n".join(lines), c.name + ".step")


def _compile_values(c: Circuit, exprs: Mapping[str, Expr], *, as_predicate: bool = False):
    g = _Gen(c)
    lines = ["def fn(mu):"] + g.prologue(_needed_wires(c, exprs.values()))
    if as_predicate:
        (e,) = exprs.values()
        t = g.tmp()
        lines.append(f"    {t} = {g.expr(e)}")
        lines.append(f"    return {t} is not BOT and {t} != 0")
    else:
        items = ", ".join(f"{k!r}: {g.expr(v)}" for k, v in exprs.items())
        lines.append(f"    return {{{items}}}")
    return _exec("\n".join(lines), c.name + ".values")

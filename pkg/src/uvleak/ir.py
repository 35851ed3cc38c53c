"""Abstract syntax, value domain and well-formedness checks for uVlog circuits.

A circuit is a set of register assignments, a set of wires and a list of
outputs.  Values are fixed-width unsigned integers (arithmetic modulo
``2**width``) plus a single undefined value ``BOT``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Union


class Bottom:
    """The undefined value.  There is exactly one instance, ``BOT``."""

    _instance: "Bottom | None" = None

    def __new__(cls) -> "Bottom":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "bot"

    def __reduce__(self):
        return (Bottom, ())


BOT = Bottom()

Value = Union[int, Bottom]
# array registers hold one Value per cell
Contents = Union[Value, tuple]

COPY_SEP = "."

UNARY_OPS = ("-", "~", "!")
BINARY_OPS = (
    "+", "-", "*", "/", "%",
    "&", "|", "^", "<<", ">>",
    "==", "!=", "<", "<=", ">", ">=",
    "&&", "||", "->", "<->",
)
BOOLEAN_OPS = frozenset({"==", "!=", "<", "<=", ">", ">=", "&&", "||", "->", "<->", "!"})


# --------------------------------------------------------------------------
# expressions


class Expr:
    """Base class of expression nodes."""

    __slots__ = ()

    def children(self) -> tuple["Expr", ...]:
        return ()


@dataclass(frozen=True, slots=True)
class Const(Expr):
    value: Value


@dataclass(frozen=True, slots=True)
class Ref(Expr):
    name: str


@dataclass(frozen=True, slots=True)
class Unary(Expr):
    op: str
    arg: Expr

    def children(self):
        return (self.arg,)


@dataclass(frozen=True, slots=True)
class Binary(Expr):
    op: str
    lhs: Expr
    rhs: Expr

    def children(self):
        return (self.lhs, self.rhs)


@dataclass(frozen=True, slots=True)
class Ite(Expr):
    cond: Expr
    then: Expr
    other: Expr

    def children(self):
        return (self.cond, self.then, self.other)


@dataclass(frozen=True, slots=True)
class BitSelect(Expr):
    """``arg[hi:lo]``, Verilog order, both bounds inclusive."""

    arg: Expr
    hi: Expr
    lo: Expr

    def children(self):
        return (self.arg, self.hi, self.lo)


@dataclass(frozen=True, slots=True)
class ArrayRead(Expr):
    name: str
    index: Expr

    def children(self):
        return (self.index,)


TRUE = Const(1)
FALSE = Const(0)


def walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(node.children())


def referenced_names(e: Expr) -> set[str]:
    """Names of registers, wires and arrays appearing directly in ``e``."""
    out: set[str] = set()
    for node in walk(e):
        if isinstance(node, Ref):
            out.add(node.name)
        elif isinstance(node, ArrayRead):
            out.add(node.name)
    return out


def rename(e: Expr, mapping: Mapping[str, str] | None = None, *, fn=None) -> Expr:
    """Rename identifiers in ``e`` through ``mapping`` (or the callable ``fn``)."""
    if fn is None:
        fn = lambda n: mapping.get(n, n)  # noqa: E731
    return _rename(e, fn)


def _rename(e, fn):
    if isinstance(e, Ref):
        return Ref(fn(e.name))
    if isinstance(e, Const):
        return e
    if isinstance(e, ArrayRead):
        return ArrayRead(fn(e.name), _rename(e.index, fn))
    if isinstance(e, Unary):
        return Unary(e.op, _rename(e.arg, fn))
    if isinstance(e, Binary):
        return Binary(e.op, _rename(e.lhs, fn), _rename(e.rhs, fn))
    if isinstance(e, Ite):
        return Ite(_rename(e.cond, fn), _rename(e.then, fn), _rename(e.other, fn))
    if isinstance(e, BitSelect):
        return BitSelect(_rename(e.arg, fn), _rename(e.hi, fn), _rename(e.lo, fn))
    raise TypeError(f"not an expression: {e!r}")


def substitute(e: Expr, env: Mapping[str, Expr]) -> Expr:
    """Replace ``Ref(name)`` by ``env[name]``; array reads are left alone."""
    if isinstance(e, Ref):
        return env.get(e.name, e)
    if isinstance(e, Const):
        return e
    if isinstance(e, ArrayRead):
        return ArrayRead(e.name, substitute(e.index, env))
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.arg, env))
    if isinstance(e, Binary):
        return Binary(e.op, substitute(e.lhs, env), substitute(e.rhs, env))
    if isinstance(e, Ite):
        return Ite(substitute(e.cond, env), substitute(e.then, env), substitute(e.other, env))
    if isinstance(e, BitSelect):
        return BitSelect(substitute(e.arg, env), substitute(e.hi, env), substitute(e.lo, env))
    raise TypeError(f"not an expression: {e!r}")


# small constructors used throughout the engine


def eq(a: Expr, b: Expr) -> Expr:
    return Binary("==", a, b)


def conj(parts: Iterable[Expr]) -> Expr:
    parts = list(parts)
    if not parts:
        return TRUE
    out = parts[0]
    for p in parts[1:]:
        out = Binary("&&", out, p)
    return out


def implies(a: Expr, b: Expr) -> Expr:
    return Binary("->", a, b)


def iff(a: Expr, b: Expr) -> Expr:
    return Binary("<->", a, b)


def neg(a: Expr) -> Expr:
    return Unary("!", a)


# --------------------------------------------------------------------------
# circuits


@dataclass(frozen=True)
class RegisterDecl:
    name: str
    width: int
    length: int | None = None  # array length; None for scalars
    reset: int | None = None  # value used when building a default valuation

    @property
    def is_array(self) -> bool:
        return self.length is not None


@dataclass(frozen=True)
class Wire:
    name: str
    expr: Expr


@dataclass(frozen=True)
class Assignment:
    """``target <= expr`` or ``target[index] <= expr``.

    ``hold`` is only used on array writes: while it is satisfied the write is
    suppressed and neither index nor data are evaluated.
    """

    target: str
    expr: Expr
    index: Expr | None = None
    hold: Expr | None = None


@dataclass(frozen=True)
class Circuit:
    name: str = "main"
    width: int = 8
    decls: tuple[RegisterDecl, ...] = ()
    wires: tuple[Wire, ...] = ()
    assigns: tuple[Assignment, ...] = ()
    outputs: tuple[str, ...] = ()
    init: Expr | None = None

    @cached_property
    def registers(self) -> dict[str, RegisterDecl]:
        return {d.name: d for d in self.decls}

    @cached_property
    def wire_map(self) -> dict[str, Expr]:
        return {w.name: w.expr for w in self.wires}

    @cached_property
    def assign_map(self) -> dict[str, Assignment]:
        return {a.target: a for a in self.assigns}

    @property
    def mask(self) -> int:
        return (1 << self.width) - 1

    @property
    def init_predicate(self) -> Expr:
        return TRUE if self.init is None else self.init

    def declared(self, name: str) -> bool:
        return name in self.registers or name in self.wire_map

    @cached_property
    def wire_order(self) -> tuple[str, ...]:
        """Wires in dependency order (dependencies first).  Assumes acyclicity."""
        order: list[str] = []
        state: dict[str, int] = {}
        wm = self.wire_map

        for root in wm:
            if root in state:
                continue
            stack = [(root, iter(sorted(referenced_names(wm[root]) & wm.keys())))]
            state[root] = 1
            while stack:
                name, deps = stack[-1]
                nxt = next(deps, None)
                if nxt is None:
                    stack.pop()
                    state[name] = 2
                    order.append(name)
                elif nxt not in state:
                    state[nxt] = 1
                    stack.append((nxt, iter(sorted(referenced_names(wm[nxt]) & wm.keys()))))
        return tuple(order)

    def inline(self, e: Expr) -> Expr:
        """Expand wire references in ``e`` (recursively)."""
        cache = self._inline_cache
        return _inline(e, self.wire_map, cache)

    @cached_property
    def _inline_cache(self) -> dict:
        return {}


def _inline(e, wires, cache):
    if isinstance(e, Ref):
        if e.name in wires:
            hit = cache.get(e.name)
            if hit is None:
                hit = cache[e.name] = _inline(wires[e.name], wires, cache)
            return hit
        return e
    if isinstance(e, Const):
        return e
    if isinstance(e, ArrayRead):
        return ArrayRead(e.name, _inline(e.index, wires, cache))
    if isinstance(e, Unary):
        return Unary(e.op, _inline(e.arg, wires, cache))
    if isinstance(e, Binary):
        return Binary(e.op, _inline(e.lhs, wires, cache), _inline(e.rhs, wires, cache))
    if isinstance(e, Ite):
        return Ite(*(_inline(x, wires, cache) for x in (e.cond, e.then, e.other)))
    if isinstance(e, BitSelect):
        return BitSelect(*(_inline(x, wires, cache) for x in (e.arg, e.hi, e.lo)))
    raise TypeError(e)


# --------------------------------------------------------------------------
# well-formedness


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.location}: {self.message}"


@dataclass
class Diagnostics:
    items: list[Diagnostic] = field(default_factory=list)

    def error(self, location: str, message: str) -> None:
        self.items.append(Diagnostic("error", location, message))

    def __bool__(self) -> bool:
        return bool(self.items)

    def __iter__(self):
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def messages(self) -> list[str]:
        return [d.message for d in self.items]

    def __str__(self) -> str:
        return "\n".join(str(d) for d in self.items)


class IllFormedCircuit(ValueError):
    def __init__(self, circuit: Circuit, diagnostics: Diagnostics):
        self.circuit = circuit
        self.diagnostics = diagnostics
        super().__init__(f"circuit {circuit.name} is ill-formed:\n{diagnostics}")


def validate(circuit: Circuit, *, base: Circuit | None = None) -> Diagnostics:
    """Check the well-formedness invariants of ``circuit``.

    With ``base`` given, identifiers declared in ``base`` are also in scope
    (used for monitors, which read the circuit they monitor).
    """
    diags = Diagnostics()
    where = circuit.name

    if circuit.width < 1:
        diags.error(where, f"width {circuit.width} must be at least 1")

    seen: set[str] = set()
    for d in circuit.decls:
        if d.name in seen:
            diags.error(where, f"duplicate declaration of {d.name}")
        seen.add(d.name)
        if d.width < 1:
            diags.error(d.name, f"register {d.name} has width {d.width} < 1")
        if d.width > circuit.width:
            diags.error(d.name, f"register {d.name} is wider ({d.width}) than the circuit ({circuit.width})")
        if d.length is not None and d.length < 1:
            diags.error(d.name, f"array {d.name} has length {d.length} < 1")

    wire_names: set[str] = set()
    for w in circuit.wires:
        if w.name in wire_names:
            diags.error(w.name, f"duplicate left-hand side {w.name}")
        elif w.name in circuit.registers:
            diags.error(w.name, f"wire {w.name} clashes with a register of the same name")
        wire_names.add(w.name)

    scope_regs = dict(base.registers) if base is not None else {}
    scope_regs.update(circuit.registers)
    scope_wires = set(base.wire_map) if base is not None else set()
    scope_wires |= wire_names

    targets: set[str] = set()
    for a in circuit.assigns:
        if a.target in targets or a.target in wire_names:
            diags.error(a.target, f"duplicate left-hand side {a.target}")
        targets.add(a.target)
        decl = circuit.registers.get(a.target)
        if decl is None:
            if a.target in scope_wires:
                diags.error(a.target, f"assignment to wire {a.target}")
            else:
                diags.error(a.target, f"assignment to undeclared register {a.target}")
        elif decl.is_array and a.index is None:
            diags.error(a.target, f"array {a.target} assigned without an index")
        elif not decl.is_array and a.index is not None:
            diags.error(a.target, f"scalar register {a.target} assigned with an index")
        if a.hold is not None and a.index is None:
            diags.error(a.target, f"hold guard on scalar assignment to {a.target}")

    def check_expr(e: Expr, loc: str) -> None:
        for node in walk(e):
            if isinstance(node, Ref):
                if node.name in scope_wires:
                    continue
                decl = scope_regs.get(node.name)
                if decl is None:
                    diags.error(loc, f"undeclared identifier {node.name}")
                elif decl.is_array:
                    diags.error(loc, f"array {node.name} used without an index")
            elif isinstance(node, ArrayRead):
                decl = scope_regs.get(node.name)
                if decl is None:
                    diags.error(loc, f"undeclared identifier {node.name}")
                elif not decl.is_array:
                    diags.error(loc, f"indexed read of scalar register {node.name}")
            elif isinstance(node, Unary) and node.op not in UNARY_OPS:
                diags.error(loc, f"unknown unary operator {node.op}")
            elif isinstance(node, Binary) and node.op not in BINARY_OPS:
                diags.error(loc, f"unknown binary operator {node.op}")

    for w in circuit.wires:
        check_expr(w.expr, w.name)
    for a in circuit.assigns:
        check_expr(a.expr, a.target)
        if a.index is not None:
            check_expr(a.index, a.target)
        if a.hold is not None:
            check_expr(a.hold, a.target)
    if circuit.init is not None:
        check_expr(circuit.init, "init")

    for o in circuit.outputs:
        if o not in scope_regs and o not in scope_wires:
            diags.error("output", f"output {o} is not a declared register or wire")
    if len(set(circuit.outputs)) != len(circuit.outputs):
        diags.error("output", "duplicate output")

    cycle = _find_wire_cycle(circuit)
    if cycle:
        diags.error(cycle[0], "combinational cycle " + "→".join(cycle))
    return diags


def _find_wire_cycle(circuit: Circuit) -> list[str] | None:
    wm = circuit.wire_map
    deps = {n: sorted(referenced_names(e) & wm.keys()) for n, e in wm.items()}
    colour: dict[str, int] = {}
    for root in wm:
        if root in colour:
            continue
        path = [root]
        iters = [iter(deps[root])]
        colour[root] = 1
        while iters:
            nxt = next(iters[-1], None)
            if nxt is None:
                colour[path.pop()] = 2
                iters.pop()
                continue
            c = colour.get(nxt, 0)
            if c == 1:
                return path[path.index(nxt):] + [nxt]
            if c == 0:
                colour[nxt] = 1
                path.append(nxt)
                iters.append(iter(deps[nxt]))
    return None


def check(circuit: Circuit, *, base: Circuit | None = None) -> Circuit:
    """Return ``circuit`` unchanged, raising :class:`IllFormedCircuit` if invalid."""
    diags = validate(circuit, base=base)
    if diags:
        raise IllFormedCircuit(circuit, diags)
    return circuit


def read_write_sets(circuit: Circuit) -> tuple[frozenset[str], frozenset[str]]:
    """Registers read by some right-hand side, and registers assigned."""
    reads: set[str] = set()
    exprs: list[Expr] = [w.expr for w in circuit.wires]
    for a in circuit.assigns:
        exprs.append(a.expr)
        if a.index is not None:
            exprs.append(a.index)
        if a.hold is not None:
            exprs.append(a.hold)
    for e in exprs:
        for name in referenced_names(e):
            if name not in circuit.wire_map:
                reads.add(name)
    writes = {a.target for a in circuit.assigns}
    return frozenset(reads), frozenset(writes)


def vars_of(circuit: Circuit) -> frozenset[str]:
    reads, writes = read_write_sets(circuit)
    return reads | writes


def check_partition(circuit: Circuit, arch: Iterable[str], uarch: Iterable[str]) -> Diagnostics:
    """Check that ``arch`` and ``uarch`` partition the declared registers."""
    diags = Diagnostics()
    arch, uarch = set(arch), set(uarch)
    for r in sorted(arch & uarch):
        diags.error(r, f"register {r} is both architectural and microarchitectural")
    for r in sorted(set(circuit.registers) - arch - uarch):
        diags.error(r, f"register {r} is neither architectural nor microarchitectural")
    for r in sorted((arch | uarch) - set(circuit.registers)):
        diags.error(r, f"{r} is not a declared register")
    return diags


# --------------------------------------------------------------------------
# copy tags


def tag(name: str, copy: int) -> str:
    return f"{name}{COPY_SEP}{copy}"


def untag(name: str) -> tuple[str, int | None]:
    base, sep, suffix = name.rpartition(COPY_SEP)
    if sep and suffix.isdigit():
        return base, int(suffix)
    return name, None


def tag_expr(e: Expr, copy: int) -> Expr:
    return rename(e, fn=lambda n: tag(n, copy))

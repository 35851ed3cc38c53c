"""Bit-blasting of uVlog expressions into CNF.

Every value is a pair ``(defined, bits)``: a literal that is true when the
value is not ``BOT`` plus ``width`` literals, least significant first.  The
encoding mirrors :mod:`uvleak.simulator` operator by operator, including
strict propagation of ``BOT`` and the laziness of ``?:``.

Gates are Tseitin-encoded with constant folding and structural hashing, so
each gate literal is equivalent (not merely implied) to its definition and
can be assumed either way.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..ir import (
    BOT,
    ArrayRead,
    Binary,
    BitSelect,
    Circuit,
    Const,
    Expr,
    Ite,
    Ref,
    Unary,
)


@dataclass(frozen=True, slots=True)
class SymVal:
    defined: int
    bits: tuple[int, ...]


class Gates:
    """Tseitin gate builder over a solver exposing ``new_var``/``add_clause``."""

    def __init__(self, solver):
        self.s = solver
        self.T = solver.new_var()
        solver.add_clause([self.T])
        self.F = -self.T
        self._and: dict = {}
        self._xor: dict = {}
        self._mux: dict = {}
        self._andn: dict = {}

    def fresh(self) -> int:
        return self.s.new_var()

    def const(self, b: bool) -> int:
        return self.T if b else self.F

    def and2(self, a: int, b: int) -> int:
        T, F = self.T, self.F
        if a == F or b == F or a == -b:
            return F
        if a == T or a == b:
            return b
        if b == T:
            return a
        key = (a, b) if a < b else (b, a)
        g = self._and.get(key)
        if g is None:
            g = self.fresh()
            self.s.add_clause([-g, a])
            self.s.add_clause([-g, b])
            self.s.add_clause([g, -a, -b])
            self._and[key] = g
        return g

    def or2(self, a: int, b: int) -> int:
        return -self.and2(-a, -b)

    def xor2(self, a: int, b: int) -> int:
        T, F = self.T, self.F
        if a == F:
            return b
        if b == F:
            return a
        if a == T:
            return -b
        if b == T:
            return -a
        if a == b:
            return F
        if a == -b:
            return T
        sign = 1
        if a < 0:
            a, sign = -a, -sign
        if b < 0:
            b, sign = -b, -sign
        key = (a, b) if a < b else (b, a)
        g = self._xor.get(key)
        if g is None:
            g = self.fresh()
            s = self.s
            s.add_clause([-g, a, b])
            s.add_clause([-g, -a, -b])
            s.add_clause([g, -a, b])
            s.add_clause([g, a, -b])
            self._xor[key] = g
        return g * sign

    def iff2(self, a: int, b: int) -> int:
        return -self.xor2(a, b)

    def mux(self, c: int, t: int, e: int) -> int:
        """``c ? t : e`` on single bits."""
        if c == self.T or t == e:
            return t
        if c == self.F:
            return e
        if t == self.T or t == c:
            return self.or2(c, e)
        if t == self.F or t == -c:
            return self.and2(-c, e)
        if e == self.T or e == -c:
            return self.or2(-c, t)
        if e == self.F or e == c:
            return self.and2(c, t)
        if t == -e:
            return self.iff2(c, t)
        if c < 0:
            c, t, e = -c, e, t
        key = (c, t, e)
        g = self._mux.get(key)
        if g is None:
            g = self.fresh()
            s = self.s
            s.add_clause([-g, -c, t])
            s.add_clause([-g, c, e])
            s.add_clause([g, -c, -t])
            s.add_clause([g, c, -e])
            s.add_clause([-g, t, e])
            s.add_clause([g, -t, -e])
            self._mux[key] = g
        return g

    def and_all(self, lits: Sequence[int]) -> int:
        T, F = self.T, self.F
        seen: set[int] = set()
        out: list[int] = []
        for a in lits:
            if a == F or -a in seen:
                return F
            if a == T or a in seen:
                continue
            seen.add(a)
            out.append(a)
        if not out:
            return T
        if len(out) == 1:
            return out[0]
        if len(out) == 2:
            return self.and2(out[0], out[1])
        key = tuple(sorted(out))
        g = self._andn.get(key)
        if g is None:
            g = self.fresh()
            for a in out:
                self.s.add_clause([-g, a])
            self.s.add_clause([g] + [-a for a in out])
            self._andn[key] = g
        return g

    def or_all(self, lits: Sequence[int]) -> int:
        return -self.and_all([-a for a in lits])


class BitBlaster(Gates):
    """Bit-vector operations at a fixed width plus uVlog value semantics."""

    def __init__(self, solver, width: int):
        super().__init__(solver)
        self.W = width

    # plain bit-vectors ---------------------------------------------------

    def bv_const(self, n: int, width: int | None = None) -> list[int]:
        width = self.W if width is None else width
        return [self.const(bool((n >> i) & 1)) for i in range(width)]

    def bv_fresh(self, width: int) -> list[int]:
        return [self.fresh() for _ in range(width)] + [self.F] * (self.W - width)

    def add(self, a, b, cin=None) -> list[int]:
        c = self.F if cin is None else cin
        out = []
        for x, y in zip(a, b):
            t = self.xor2(x, y)
            out.append(self.xor2(t, c))
            c = self.or2(self.and2(x, y), self.and2(c, t))
        return out

    def sub(self, a, b) -> list[int]:
        return self.add(a, [-y for y in b], self.T)

    def negate(self, a) -> list[int]:
        return self.add([-x for x in a], [self.F] * len(a), self.T)

    def mul(self, a, b) -> list[int]:
        w = len(a)
        acc = [self.F] * w
        for i, bi in enumerate(b):
            partial = [self.F] * i + [self.and2(bi, x) for x in a[: w - i]]
            acc = self.add(acc, partial)
        return acc

    def ult(self, a, b) -> int:
        lt = self.F
        for x, y in zip(a, b):
            lt = self.mux(self.xor2(x, y), y, lt)
        return lt

    def equal(self, a, b) -> int:
        return self.and_all([self.iff2(x, y) for x, y in zip(a, b)])

    def nonzero(self, a) -> int:
        return self.or_all(a)

    def select(self, c, a, b) -> list[int]:
        return [self.mux(c, x, y) for x, y in zip(a, b)]

    def udivmod(self, a, b) -> tuple[list[int], list[int]]:
        """Restoring division; results for ``b == 0`` are unconstrained garbage."""
        w = len(a)
        rem = [self.F] * (w + 1)
        bx = list(b) + [self.F]
        q = [self.F] * w
        for i in reversed(range(w)):
            rem = [a[i]] + rem[:w]
            ge = -self.ult(rem, bx)
            rem = self.select(ge, self.sub(rem, bx), rem)
            q[i] = ge
        return q, rem[:w]

    def shift(self, a, sh, left: bool) -> list[int]:
        w = len(a)
        cur = list(a)
        k = 0
        while (1 << k) < w:
            amt = 1 << k
            if left:
                moved = [self.F] * amt + cur[: w - amt]
            else:
                moved = cur[amt:] + [self.F] * amt
            cur = self.select(sh[k], moved, cur)
            k += 1
        in_range = self.ult(sh, self.bv_const(w, len(sh)))
        return [self.and2(in_range, x) for x in cur]

    # uVlog values --------------------------------------------------------

    def value_const(self, v) -> SymVal:
        if v is BOT:
            return SymVal(self.F, tuple([self.F] * self.W))
        return SymVal(self.T, tuple(self.bv_const(v & ((1 << self.W) - 1))))

    def bool_val(self, defined: int, b: int) -> SymVal:
        return SymVal(defined, (b,) + (self.F,) * (self.W - 1))

    def truthy(self, v: SymVal) -> int:
        return self.and2(v.defined, self.nonzero(v.bits))

    def truncate(self, v: SymVal, width: int) -> SymVal:
        if width >= self.W:
            return v
        return SymVal(v.defined, v.bits[:width] + (self.F,) * (self.W - width))

    def unary(self, op: str, a: SymVal) -> SymVal:
        if op == "-":
            return SymVal(a.defined, tuple(self.negate(a.bits)))
        if op == "~":
            return SymVal(a.defined, tuple(-x for x in a.bits))
        if op == "!":
            return self.bool_val(a.defined, -self.nonzero(a.bits))
        raise ValueError(f"unknown unary operator {op}")

    def binary(self, op: str, a: SymVal, b: SymVal) -> SymVal:
        d = self.and2(a.defined, b.defined)
        x, y = a.bits, b.bits
        if op == "+":
            return SymVal(d, tuple(self.add(x, y)))
        if op == "-":
            return SymVal(d, tuple(self.sub(x, y)))
        if op == "*":
            return SymVal(d, tuple(self.mul(x, y)))
        if op in ("/", "%"):
            q, r = self.udivmod(x, y)
            d = self.and2(d, self.nonzero(y))
            return SymVal(d, tuple(q if op == "/" else r))
        if op == "&":
            return SymVal(d, tuple(self.and2(p, q) for p, q in zip(x, y)))
        if op == "|":
            return SymVal(d, tuple(self.or2(p, q) for p, q in zip(x, y)))
        if op == "^":
            return SymVal(d, tuple(self.xor2(p, q) for p, q in zip(x, y)))
        if op == "<<":
            return SymVal(d, tuple(self.shift(x, y, True)))
        if op == ">>":
            return SymVal(d, tuple(self.shift(x, y, False)))
        if op == "==":
            return self.bool_val(d, self.equal(x, y))
        if op == "!=":
            return self.bool_val(d, -self.equal(x, y))
        if op == "<":
            return self.bool_val(d, self.ult(x, y))
        if op == ">":
            return self.bool_val(d, self.ult(y, x))
        if op == "<=":
            return self.bool_val(d, -self.ult(y, x))
        if op == ">=":
            return self.bool_val(d, -self.ult(x, y))
        nx, ny = self.nonzero(x), self.nonzero(y)
        if op == "&&":
            return self.bool_val(d, self.and2(nx, ny))
        if op == "||":
            return self.bool_val(d, self.or2(nx, ny))
        if op == "->":
            return self.bool_val(d, self.or2(-nx, ny))
        if op == "<->":
            return self.bool_val(d, self.iff2(nx, ny))
        raise ValueError(f"unknown binary operator {op}")

    def ite(self, c: SymVal, t: SymVal, e: SymVal) -> SymVal:
        cond = self.nonzero(c.bits)
        d = self.and2(c.defined, self.mux(cond, t.defined, e.defined))
        return SymVal(d, tuple(self.select(cond, t.bits, e.bits)))

    def array_read(self, cells: Sequence[SymVal], idx: SymVal) -> SymVal:
        hits = [self.index_hit(idx, k) for k in range(len(cells))]
        d = self.F
        bits = [self.F] * self.W
        for hit, cell in zip(hits, cells):
            d = self.or2(d, self.and2(hit, cell.defined))
            bits = [self.or2(acc, self.and2(hit, b)) for acc, b in zip(bits, cell.bits)]
        return SymVal(self.and2(idx.defined, d), tuple(bits))

    def index_hit(self, idx: SymVal, k: int) -> int:
        """``idx`` selects cell ``k`` (cells past ``2**W`` are unreachable)."""
        if k >> self.W:
            return self.F
        return self.equal(idx.bits, self.bv_const(k))

    def bit_select(self, a: SymVal, hi: SymVal, lo: SymVal) -> SymVal:
        W = self.W
        if hi.defined == self.T and lo.defined == self.T:
            h, l = _const_of(self, hi.bits), _const_of(self, lo.bits)
            if h is not None and l is not None:
                if l > h or h >= W:
                    return self.value_const(BOT)
                return SymVal(a.defined, a.bits[l : h + 1] + (self.F,) * (W - (h - l + 1)))
        ok = self.and_all(
            [a.defined, hi.defined, lo.defined, -self.ult(hi.bits, lo.bits), self.ult(hi.bits, self.bv_const(W))]
        )
        shifted = self.shift(list(a.bits), list(lo.bits), False)
        span = self.sub(hi.bits, lo.bits)  # hi - lo; mask bit j is set iff j <= hi - lo
        mask = [-self.ult(span, self.bv_const(j)) for j in range(W)]
        return SymVal(ok, tuple(self.and2(m, s) for m, s in zip(mask, shifted)))


def _const_of(g: Gates, bits: Sequence[int]) -> int | None:
    n = 0
    for i, b in enumerate(bits):
        if b == g.T:
            n |= 1 << i
        elif b != g.F:
            return None
    return n


class Unrolling:
    """Symbolic copies of a circuit's registers for cycles ``0..depth``."""

    def __init__(self, circuit: Circuit, blaster: BitBlaster):
        self.c = circuit
        self.bb = blaster
        # per cycle: register name -> SymVal, or a tuple of SymVal for arrays
        self.states: list[dict] = [self._fresh_state()]
        self._caches: list[dict] = [{}]

    def _fresh_state(self) -> dict:
        bb = self.bb
        regs: dict = {}
        for d in self.c.decls:
            if d.is_array:
                regs[d.name] = tuple(SymVal(bb.fresh(), tuple(bb.bv_fresh(d.width))) for _ in range(d.length))
            else:
                regs[d.name] = SymVal(bb.fresh(), tuple(bb.bv_fresh(d.width)))
        return regs

    @property
    def depth(self) -> int:
        return len(self.states) - 1

    def extend_to(self, depth: int) -> None:
        while self.depth < depth:
            self.states.append(self._step(self.depth))
            self._caches.append({})

    def eval(self, e: Expr, k: int) -> SymVal:
        self.extend_to(k)
        return self._eval(e, k, self._caches[k])

    def _eval(self, e: Expr, k: int, cache: dict) -> SymVal:
        hit = cache.get(id(e))
        if hit is not None and hit[0] is e:
            return hit[1]
        bb = self.bb
        if isinstance(e, Const):
            v = bb.value_const(e.value)
        elif isinstance(e, Ref):
            wire = self.c.wire_map.get(e.name)
            if wire is not None:
                key = ("wire", e.name)
                v = cache.get(key)
                if v is None:
                    v = cache[key] = self._eval(wire, k, cache)
            else:
                v = self.states[k][e.name]
        elif isinstance(e, Unary):
            v = bb.unary(e.op, self._eval(e.arg, k, cache))
        elif isinstance(e, Binary):
            v = bb.binary(e.op, self._eval(e.lhs, k, cache), self._eval(e.rhs, k, cache))
        elif isinstance(e, Ite):
            v = bb.ite(self._eval(e.cond, k, cache), self._eval(e.then, k, cache), self._eval(e.other, k, cache))
        elif isinstance(e, ArrayRead):
            v = bb.array_read(self.states[k][e.name], self._eval(e.index, k, cache))
        elif isinstance(e, BitSelect):
            v = bb.bit_select(self._eval(e.arg, k, cache), self._eval(e.hi, k, cache), self._eval(e.lo, k, cache))
        else:
            raise TypeError(f"not an expression: {e!r}")
        cache[id(e)] = (e, v)
        return v

    def _step(self, k: int) -> dict:
        bb, c = self.bb, self.c
        cache = self._caches[k]
        cur = self.states[k]
        nxt = dict(cur)
        for a in c.assigns:
            decl = c.registers[a.target]
            if a.index is None:
                nxt[a.target] = bb.truncate(self._eval(a.expr, k, cache), decl.width)
                continue
            enable = bb.T
            if a.hold is not None:
                enable = -bb.truthy(self._eval(a.hold, k, cache))
            idx = self._eval(a.index, k, cache)
            enable = bb.and2(enable, idx.defined)
            data = bb.truncate(self._eval(a.expr, k, cache), decl.width)
            cells = []
            for n, cell in enumerate(cur[a.target]):
                hit = bb.and2(enable, bb.index_hit(idx, n))
                cells.append(
                    SymVal(bb.mux(hit, data.defined, cell.defined), tuple(bb.select(hit, data.bits, cell.bits)))
                )
            nxt[a.target] = tuple(cells)
        return nxt

    def decode(self, value, k: int = 0) -> dict:
        """Concrete valuation of cycle ``k`` under the solver model ``value``."""
        out: dict = {}
        for d in self.c.decls:
            reg = self.states[k][d.name]
            if d.is_array:
                out[d.name] = tuple(_decode_val(value, v) for v in reg)
            else:
                out[d.name] = _decode_val(value, reg)
        return out


def _decode_val(value, v: SymVal):
    if not value(v.defined):
        return BOT
    n = 0
    for i, b in enumerate(v.bits):
        if value(b):
            n |= 1 << i
    return n

"""Random small circuits and formulas for property tests."""

from __future__ import annotations

import random

from uvleak.ir import ArrayRead, Assignment, Binary, BitSelect, Circuit, Const, Ite, Ref, RegisterDecl, Unary, Wire
from uvleak.logic.formula import And, Atom, BoundedFuture, Iff, Implies, Next, Not, Or

ARITH = ("+", "-", "*", "&", "|", "^", "<<", ">>", "/", "%")
COMPARE = ("==", "!=", "<", "<=", ">", ">=")
LOGIC = ("&&", "||", "->", "<->")


def random_expr(rng: random.Random, scalars, arrays, width, depth, wires=()):
    leaves = list(scalars) + list(wires)
    if depth <= 0 or rng.random() < 0.25:
        if leaves and rng.random() < 0.7:
            return Ref(rng.choice(leaves))
        return Const(rng.randrange(1 << width))
    pick = rng.random()
    sub = lambda: random_expr(rng, scalars, arrays, width, depth - 1, wires)  # noqa: E731
    if pick < 0.1:
        return Unary(rng.choice(("-", "~", "!")), sub())
    if pick < 0.55:
        return Binary(rng.choice(ARITH + COMPARE + LOGIC), sub(), sub())
    if pick < 0.75:
        return Ite(sub(), sub(), sub())
    if pick < 0.85 and arrays:
        return ArrayRead(rng.choice(arrays), sub())
    hi = rng.randrange(width)
    return BitSelect(sub(), Const(hi), Const(rng.randrange(hi + 1)))


def random_circuit(rng: random.Random, *, width=3, max_regs=2, with_array=True, name="R") -> Circuit:
    nregs = rng.randint(1, max_regs)
    scalars = [f"x{i}" for i in range(nregs)]
    arrays = ["a"] if with_array and rng.random() < 0.5 else []
    decls = [RegisterDecl(n, width) for n in scalars] + [RegisterDecl(a, width, 2) for a in arrays]
    wires = []
    if rng.random() < 0.5:
        wires.append(Wire("w0", random_expr(rng, scalars, arrays, width, 2)))
    wnames = [w.name for w in wires]
    assigns = [Assignment(n, random_expr(rng, scalars, arrays, width, 3, wnames)) for n in scalars]
    for a in arrays:
        assigns.append(
            Assignment(
                a,
                random_expr(rng, scalars, arrays, width, 2, wnames),
                index=random_expr(rng, scalars, [], 1, 1),
            )
        )
    outputs = tuple(rng.sample(scalars, rng.randint(0, len(scalars))))
    return Circuit(name, width, tuple(decls), tuple(wires), tuple(assigns), outputs)


def random_formula(rng: random.Random, c: Circuit, depth=2):
    scalars = [d.name for d in c.decls if not d.is_array]
    arrays = [d.name for d in c.decls if d.is_array]
    wires = [w.name for w in c.wires]
    if depth <= 0 or rng.random() < 0.3:
        return Atom(random_expr(rng, scalars, arrays, c.width, 2, wires))
    sub = lambda: random_formula(rng, c, depth - 1)  # noqa: E731
    pick = rng.randrange(7)
    if pick == 0:
        return Next(sub())
    if pick == 1:
        return BoundedFuture(rng.randint(1, 2), sub())
    if pick == 2:
        return Not(sub())
    if pick == 3:
        return And((sub(), sub()))
    if pick == 4:
        return Or((sub(), sub()))
    if pick == 5:
        return Iff(sub(), sub())
    return Implies(sub(), sub())

"""``uvleak`` command-line interface.

Exit codes: 0 success (valid, Satisfied, Holds, Pass), 1 a violation or an
unproved property, 2 bad usage or input, 3 a resource limit was hit.
"""

from __future__ import annotations

import argparse
import random
import sys
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import textio
from .engine import (
    ProblemError,
    VerificationProblem,
    check_isa_compliance,
    learn_inv,
    oracle_contract_satisfaction,
    oracle_leak_order,
    parse_candidates,
    verify,
    verify_4way,
)
from .engine.houdini import HoudiniStuck
from .engine.oracles import _pins
from .ir import BOT, IllFormedCircuit, validate
from .logic.sat import ResourceLimit
from .logic.validity import DomainBounds, DomainTooLarge
from .simulator import compiled, filtered_trace_prefix, make_valuation, trace_prefix
from .transforms import Monitor, NotAMonitor, check_monitor, compose, product, stuttering_product

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_LIMIT = 0, 1, 2, 3


class UsageError(Exception):
    pass


# --------------------------------------------------------------------------
# inputs


def corpus_dir() -> Path:
    return Path(str(resources.files("uvleak") / "corpus"))


def resolve_path(p: str) -> Path:
    """A path as given, or the bundled corpus file it names."""
    path = Path(p)
    if path.exists():
        return path
    parts = path.parts
    if "corpus" in parts:
        rest = parts[parts.index("corpus") + 1:]
        bundled = corpus_dir().joinpath(*rest)
        if bundled.exists():
            return bundled
    raise UsageError(f"no such file: {p}")


def load_modules(paths: Sequence[str]) -> textio.Module:
    """Parse and merge several files; a name may be repeated only with an
    identical definition."""
    merged = textio.Module()
    for p in paths:
        path = resolve_path(p)
        mod = textio.parse_file(path.read_text(), str(p))
        for table, other in ((merged.circuits, mod.circuits), (merged.monitors, mod.monitors)):
            for name, item in other.items():
                if name in table and table[name] != item:
                    raise UsageError(f"{name} is defined differently in {p} and an earlier file")
                table[name] = item
    return merged


def _circuit(mod: textio.Module, name: str | None, flag: str):
    try:
        return mod.circuit(name)
    except KeyError as err:
        raise UsageError(f"{flag}: {err.args[0]}") from None


def _monitor(mod: textio.Module, name: str, flag: str) -> Monitor:
    try:
        return mod.monitor(name)
    except KeyError as err:
        raise UsageError(f"{flag}: {err.args[0]}") from None


def parse_values(text: str) -> list[int]:
    """``0,1,2``, ``0..3`` ranges and ``0,1,2,...,10`` arithmetic runs."""
    out: list[int] = []
    items = [t.strip() for t in text.split(",") if t.strip()]
    i = 0
    while i < len(items):
        t = items[i]
        if t == "...":
            if len(out) < 2 or i + 1 >= len(items):
                raise UsageError(f"'...' needs two values before it and one after in {text!r}")
            step = out[-1] - out[-2]
            stop = textio._int(items[i + 1])
            if step == 0 or (stop - out[-1]) % step:
                raise UsageError(f"cannot continue {out[-2]},{out[-1]} up to {stop}")
            out.extend(range(out[-1] + step, stop + step, step))
            i += 2
            continue
        if ".." in t:
            lo, hi = t.split("..", 1)
            out.extend(range(textio._int(lo), textio._int(hi) + 1))
        elif t == "bot":
            out.append(BOT)
        else:
            out.append(textio._int(t))
        i += 1
    return out


def _named_values(specs: Sequence[str] | None, flag: str) -> dict[str, list]:
    out = {}
    for s in specs or ():
        name, sep, vals = s.partition(":") if ":" in s else s.partition("=")
        if not sep or not name:
            raise UsageError(f"{flag} expects NAME:VALUES, got {s!r}")
        try:
            out[name.strip()] = parse_values(vals)
        except ValueError as err:
            raise UsageError(f"{flag} {s!r}: {err}") from None
    return out


def initial_valuation(c, init_text: str | None, mems: dict, sets: dict, fill: int):
    values: dict = {}
    if init_text:
        init = textio.parse_expr(init_text, c, "--init")
        values.update(_pins(init))
    else:
        init = None
    for name, v in list(mems.items()) + list(sets.items()):
        if name not in c.registers:
            raise UsageError(f"{c.name} has no register {name}")
        d = c.registers[name]
        values[name] = v if d.is_array else v[0]
    mu = make_valuation(c, values, fill=fill)
    if init is not None and not compiled(c).predicate(init)(mu):
        raise UsageError("--init is not satisfied by the constructed initial state; pin registers with --set")
    return mu


def make_bounds(args, c) -> DomainBounds:
    values = {k: tuple(v) for k, v in _named_values(args.values, "--values").items()}
    cells = {}
    for s in args.cells or ():
        name, sep, n = s.partition("=")
        if not sep:
            raise UsageError(f"--cells expects NAME=N, got {s!r}")
        cells[name] = int(n)
    for name in list(values) + list(cells):
        if name not in c.registers:
            raise UsageError(f"{c.name} has no register {name}")
    if args.seed is not None:
        # permute every axis so enumeration (and hence the first violation
        # reported) depends on the seed alone
        rng = random.Random(args.seed)
        base = DomainBounds(values=values, free_cells=cells, allow_bot=args.allow_bot)
        pinned = _pins(c.init)
        for d in c.decls:
            if d.name in pinned and d.name not in values:
                continue
            vals = list(base.choices(c, d.name))
            rng.shuffle(vals)
            values[d.name] = tuple(vals)
    return DomainBounds(
        values=values, free_cells=cells, fill=args.fill, allow_bot=args.allow_bot, max_states=args.max_states
    )


def split_names(text: str | None) -> list[str]:
    return [t.strip() for t in (text or "").split(",") if t.strip()]


def problem_from(args, mod: textio.Module) -> VerificationProblem:
    impl = _circuit(mod, args.impl, "--impl")
    contract = _monitor(mod, args.contract, "--contract")
    attacker = _monitor(mod, args.attacker, "--attacker")
    retire = textio.parse_expr(args.retire, None, "--retire")
    if args.uarch is not None:
        uarch = frozenset(split_names(args.uarch))
    elif contract.base in mod.circuits:
        arch = mod.circuits[contract.base]
        uarch = frozenset(d.name for d in impl.decls if d.name not in arch.registers)
    else:
        raise UsageError(
            f"cannot tell architectural registers apart: pass --uarch or define {contract.base} "
            f"(the base of {contract.name})"
        )
    cands = []
    for p in args.candidates or ():
        path = resolve_path(p)
        cands += parse_candidates(path.read_text(), None, str(p))
    return VerificationProblem(impl, contract, attacker, retire, args.b, uarch, cands, not args.no_auto)


# --------------------------------------------------------------------------
# output


class Output:
    def __init__(self, args):
        self.machine = args.format == "machine"
        self.stream = open(args.out, "w") if args.out else sys.stdout

    def fields(self, items, human_title: str | None = None):
        items = list(items.items() if isinstance(items, dict) else items)
        if self.machine:
            self.stream.write(textio.dump_fields(items))
            return
        if human_title:
            self.stream.write(human_title + "\n")
        width = max((len(k) for k, _ in items), default=0)
        for k, v in items:
            self.stream.write(f"  {k.replace('_', ' '):<{width}}  {textio._fmt_cell(v) if not isinstance(v, str) else v}\n")

    def text(self, s: str):
        self.stream.write(s if s.endswith("\n") else s + "\n")

    def close(self):
        if self.stream is not sys.stdout:
            self.stream.close()


def show_valuation(out: Output, label: str, mu: dict):
    if out.machine:
        out.text(f"{label} {textio.format_valuation(mu)}")
    else:
        out.text(f"  {label}: {textio.format_valuation(mu)}")


def show_trace(out: Output, t, names: Sequence[str]):
    if out.machine:
        out.text(textio.dump_trace(t))
        return
    rows = [("cycle", *names)] + [
        (str(cyc), *(textio._fmt_cell(dict(rec)[n]) for n in names)) for cyc, rec in t.rows
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    if t.role != "full":
        out.text(f"# {t.role}")
    for r in rows:
        out.text("  ".join(cell.rjust(w) for cell, w in zip(r, widths)).rstrip())


# --------------------------------------------------------------------------
# commands


def cmd_validate(args, out: Output) -> int:
    mod = load_modules(args.files)
    bad = 0
    for name, c in mod.circuits.items():
        diags = validate(c)
        bad += bool(diags)
        out.fields({"item": name, "kind": "circuit", "result": "ok" if not diags else "ill-formed"})
        for d in diags:
            out.text(f"  {d}" if not out.machine else f"diagnostic={d}")
    for name, m in mod.monitors.items():
        base = mod.circuits.get(m.base)
        if base is None:
            diags = validate(m.circuit)
            verdict = "ok (base not loaded)" if not diags else "ill-formed"
        else:
            chk = check_monitor(m, base)
            diags = chk.diagnostics
            verdict = ("combinatorial monitor" if chk.is_combinatorial else "monitor") if chk else "not a monitor"
        bad += bool(diags)
        out.fields({"item": name, "kind": f"monitor on {m.base}", "result": verdict})
        for d in diags:
            out.text(f"  {d}" if not out.machine else f"diagnostic={d}")
    return EXIT_VIOLATION if bad else EXIT_OK


def cmd_simulate(args, out: Output) -> int:
    mod = load_modules(args.files)
    c = _circuit(mod, args.circuit, "--circuit")
    if args.monitor:
        c = compose(_monitor(mod, args.monitor, "--monitor"), c)
    mu = initial_valuation(c, args.init, _named_values(args.mem, "--mem"), _named_values(args.set, "--set"), args.fill)
    if args.show:
        from dataclasses import replace

        names = split_names(args.show)
        for n in names:
            if not c.declared(n):
                raise UsageError(f"--show: {c.name} has no register or wire {n}")
        c = replace(c, outputs=tuple(names))
    if args.filter:
        t = filtered_trace_prefix(c, mu, textio.parse_expr(args.filter, c, "--filter"), args.cycles)
    else:
        t = trace_prefix(c, mu, args.cycles)
    show_trace(out, t, c.outputs)
    return EXIT_OK


def cmd_compose(args, out: Output) -> int:
    mod = load_modules(args.files)
    c = compose(_monitor(mod, args.monitor, "--monitor"), _circuit(mod, args.circuit, "--circuit"))
    out.text(textio.print_circuit(c))
    return EXIT_OK


def cmd_product(args, out: Output) -> int:
    mod = load_modules(args.files)
    out.text(textio.print_circuit(product(_circuit(mod, args.circuit, "--circuit")).circuit))
    return EXIT_OK


def cmd_stutter(args, out: Output) -> int:
    mod = load_modules(args.files)
    c = _circuit(mod, args.circuit, "--circuit")
    phi = textio.parse_expr(args.retire, c, "--retire")
    out.text(textio.print_circuit(stuttering_product(c, phi).circuit))
    return EXIT_OK


def _report_invariants(out: Output, invariants, dropped):
    if out.machine:
        for cand in invariants:
            out.text(f"invariant={cand.provenance}:{cand.label}")
        for cand, phase, q in dropped:
            out.text(f"dropped={phase}#{q}:{cand.provenance}:{cand.label}")
        return
    out.text("learned invariants:")
    for cand in invariants:
        out.text(f"  [{cand.provenance}] {cand.label}")
    if dropped:
        out.text("dropped:")
        for cand, phase, q in dropped:
            out.text(f"  [{cand.provenance}] {cand.label}  ({phase} query {q})")


def cmd_learn_inv(args, out: Output) -> int:
    from .engine.problem import agree_on, defined, generate_candidates, tagged
    from .logic.formula import And, Atom, Implies, all_of

    mod = load_modules(args.files)
    p = problem_from(args, mod)
    p.validate()
    c, lo, _ = p.instrumented()
    sp = stuttering_product(c, p.retire)
    regs = [d.name for d in p.impl.decls]
    parts = []
    if c.init is not None:
        parts += [Atom(tagged(c.init, 1)), Atom(tagged(c.init, 2))]
    parts += [Atom(defined(c, regs, 1)), Atom(defined(c, regs, 2)), Atom(agree_on(c, sorted(p.uarch), 1, 2))]
    assumption = Implies(And((Atom(tagged(p.retire, 1)), Atom(tagged(p.retire, 2)))), Atom(agree_on(c, lo, 1, 2)))
    res = learn_inv(sp, all_of(parts), assumption, p.b, generate_candidates(p), time_limit=args.time_limit)
    out.fields(
        {
            "candidates": len(res.invariants) + len(res.dropped),
            "invariants_learned": len(res.invariants),
            "iterations_base": res.base_queries,
            "iterations_inductive": res.inductive_queries,
            "lookahead": p.b,
        }
    )
    _report_invariants(out, res.invariants, res.dropped)
    return EXIT_OK


def _emit_report(args, out: Output, r) -> int:
    out.fields(r.fields(timing=args.timing), None if out.machine else f"{r.engine} verification: {r.verdict}")
    if args.verbose or out.machine:
        _report_invariants(out, r.invariants, r.dropped)
    if r.cex is not None and args.verbose:
        out.text(textio.dump_trace(r.cex.dump()))
    if r.satisfied:
        return EXIT_OK
    return EXIT_LIMIT if r.resource_limited else EXIT_VIOLATION


def cmd_verify(args, out: Output) -> int:
    mod = load_modules(args.files)
    return _emit_report(args, out, verify(problem_from(args, mod), time_limit=args.time_limit))


def cmd_verify_4way(args, out: Output) -> int:
    mod = load_modules(args.files)
    p = problem_from(args, mod)
    arch = _circuit(mod, args.arch or p.contract.base, "--arch")
    return _emit_report(args, out, verify_4way(arch, p, time_limit=args.time_limit))


def cmd_check_isa(args, out: Output) -> int:
    mod = load_modules(args.files)
    impl = _circuit(mod, args.impl, "--impl")
    arch = _circuit(mod, args.arch, "--arch")
    phi = textio.parse_expr(args.retire, impl, "--retire")
    r = check_isa_compliance(impl, arch, phi, make_bounds(args, impl), args.horizon)
    out.fields(r.fields(), None if out.machine else f"ISA compliance ({args.horizon} cycles): {'pass' if r.passed else 'violation'}")
    if r.state is not None:
        show_valuation(out, "state", r.state)
    return EXIT_OK if r.passed else EXIT_VIOLATION


def cmd_oracle(args, out: Output) -> int:
    mod = load_modules(args.files)
    p = problem_from(args, mod)
    bounds = make_bounds(args, p.impl)
    if args.kind == "leak-order":
        r = oracle_leak_order(p.impl, p.contract, p.attacker, p.uarch, p.retire, bounds, args.horizon)
    else:
        arch = _circuit(mod, args.arch or p.contract.base, "--arch")
        r = oracle_contract_satisfaction(arch, p.impl, p.contract, p.attacker, p.uarch, bounds, args.horizon)
    out.fields(r.fields(), None if out.machine else f"{args.kind} oracle ({args.horizon} cycles): {r.verdict}")
    if r.pair:
        show_valuation(out, "first", r.pair[0])
        show_valuation(out, "second", r.pair[1])
    return EXIT_OK if r.holds else EXIT_VIOLATION


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uvleak", description="Simulate circuits and check them against leakage contracts.")
    sub = ap.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def command(name, fn, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.add_argument("files", nargs="+", help="source files (bundled corpus files may be named corpus/<file>)")
        p.add_argument("--format", choices=("human", "machine"), default="human")
        p.add_argument("--out", help="write the report here instead of standard output")
        p.add_argument("--seed", type=int, help="permute enumeration order reproducibly")
        p.set_defaults(run=fn)
        return p

    def problem_flags(p, *, b=True):
        p.add_argument("--impl", required=True)
        p.add_argument("--contract", required=True)
        p.add_argument("--attacker", required=True)
        p.add_argument("--retire", required=True, help="retirement predicate over the implementation")
        p.add_argument("--uarch", help="comma-separated microarchitectural registers (default: registers the contract's base lacks)")
        p.add_argument("--candidates", action="append", help="file of extra candidate invariants (repeatable)")
        p.add_argument("--no-auto", action="store_true", help="use only the candidates given in files")
        p.add_argument("--b", type=int, default=1, help="lookahead (default 1)")
        p.add_argument("--time-limit", type=float, help="seconds per solver call")

    def bounds_flags(p):
        p.add_argument("--horizon", type=int, default=16)
        p.add_argument("--values", action="append", help="NAME:VALUES restricts a register or every free cell")
        p.add_argument("--cells", action="append", help="NAME=N lets only the first N cells of an array vary")
        p.add_argument("--fill", type=int, default=0, help="value of the cells that do not vary")
        p.add_argument("--allow-bot", action="store_true", help="also enumerate bottom as an initial value")
        p.add_argument("--max-states", type=int, default=5_000_000)

    p = command("validate", cmd_validate, "check circuits and monitors for well-formedness")

    p = command("simulate", cmd_simulate, "print a trace prefix")
    p.add_argument("--circuit")
    p.add_argument("--monitor", help="compose this monitor onto the circuit and show its outputs")
    p.add_argument("--init", help="initial predicate; its x==c conjuncts pin registers")
    p.add_argument("--mem", action="append", help="NAME:VALUES initial array contents (repeatable)")
    p.add_argument("--set", action="append", help="NAME=VALUE initial scalar (repeatable)")
    p.add_argument("--fill", type=int, default=0)
    p.add_argument("--cycles", type=int, default=10)
    p.add_argument("--filter", help="keep only cycles where this predicate holds")
    p.add_argument("--show", help="comma-separated registers or wires to print instead of the outputs")

    p = command("compose", cmd_compose, "print a monitor composed with its circuit")
    p.add_argument("--circuit")
    p.add_argument("--monitor", required=True)

    p = command("product", cmd_product, "print the product of a circuit with itself")
    p.add_argument("--circuit")

    p = command("stutter", cmd_stutter, "print the stuttering product of a circuit")
    p.add_argument("--circuit")
    p.add_argument("--retire", required=True)

    p = command("learn-inv", cmd_learn_inv, "learn relational invariants on the stuttering product")
    problem_flags(p)

    for name, fn, help_ in (
        ("verify", cmd_verify, "prove that the attacker learns no more than the contract reveals"),
        ("verify-4way", cmd_verify_4way, "the same, against the architecture, on a four-copy product"),
    ):
        p = command(name, fn, help_)
        problem_flags(p)
        p.add_argument("--timing", action="store_true", help="report elapsed time (output then varies between runs)")
        p.add_argument("--verbose", action="store_true", help="list learned and dropped invariants")
        if name == "verify-4way":
            p.add_argument("--arch", help="architecture circuit (default: the contract's base)")

    p = command("check-isa", cmd_check_isa, "bounded test that an implementation follows its architecture")
    p.add_argument("--impl", required=True)
    p.add_argument("--arch", required=True)
    p.add_argument("--retire", required=True)
    bounds_flags(p)

    p = command("oracle", cmd_oracle, "exhaustively check indistinguishability over bounded initial states")
    p.add_argument("--kind", choices=("leak-order", "contract"), default="leak-order")
    p.add_argument("--arch", help="architecture for --kind contract (default: the contract's base)")
    problem_flags(p)
    bounds_flags(p)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exit_:
        return EXIT_USAGE if exit_.code else EXIT_OK
    out = None
    try:
        out = Output(args)
        return args.run(args, out)
    except (ResourceLimit, DomainTooLarge) as err:
        print(f"uvleak: resource limit: {err}", file=sys.stderr)
        return EXIT_LIMIT
    except (UsageError, textio.ParseError, ProblemError, NotAMonitor, IllFormedCircuit, KeyError, ValueError, OSError) as err:
        msg = err.args[0] if isinstance(err, KeyError) and err.args else err
        print(f"uvleak: {msg}", file=sys.stderr)
        return EXIT_USAGE
    except HoudiniStuck as err:
        print(f"uvleak: internal error: {err}", file=sys.stderr)
        return EXIT_USAGE
    finally:
        if out is not None:
            out.close()


if __name__ == "__main__":
    sys.exit(main())

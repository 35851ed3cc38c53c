"""The ten acceptance criteria, each at its stated time budget.

Every test records a one-line PASS/FAIL verdict that is printed in the
terminal summary (see ``conftest.pytest_terminal_summary``).
"""

from __future__ import annotations

import functools
import random
import time
from dataclasses import dataclass, replace

import pytest

from gen import random_circuit, random_formula
from uvleak.engine import (
    HOLDS,
    VIOLATION,
    VerificationProblem,
    check_isa_compliance,
    oracle_contract_satisfaction,
    oracle_leak_order,
    verify,
    verify_4way,
)
from uvleak.ir import Circuit
from uvleak.logic.formula import Implies
from uvleak.logic.validity import Counterexample, DomainBounds, check_validity
from uvleak.simulator import filtered_trace_prefix, make_valuation, trace_prefix
from uvleak.textio import parse_expr
from uvleak.transforms import compose

from conftest import ACCEPTANCE, candidates, corpus


def criterion(n: int, title: str, budget: float):
    """Record PASS/FAIL with elapsed time; a run over budget fails."""

    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kw):
            t0 = time.perf_counter()
            note = ""
            try:
                note = fn(*args, **kw) or ""
            except BaseException:
                ACCEPTANCE[n] = f"[FAIL] {n:>2}. {title} ({time.perf_counter() - t0:.1f}s)"
                raise
            took = time.perf_counter() - t0
            ok = took < budget
            extra = f"; {note}" if note else ""
            ACCEPTANCE[n] = f"[{'PASS' if ok else 'FAIL'}] {n:>2}. {title} ({took:.1f}s of {budget:g}s{extra})"
            assert ok, f"criterion {n} took {took:.1f}s, budget {budget}s"

        return run

    return wrap


RET = parse_expr("ret == 1")
SIMP_UARCH = frozenset({"st", "res", "ret"})
# 4-cell memories of 2-bit values; every other register is pinned by init
# except res, which ranges over its full width
SIMP_BOUNDS = DomainBounds(values={"m": (0, 1, 2, 3)}, free_cells={"m": 4}, allow_bot=False)
RE_UARCH = frozenset({"pcF", "ev", "ex_op", "ex_imm", "mult", "m_rd", "m_imm", "m_cnt", "we", "wb_res", "retired"})
# four instruction slots drawn from adds, fast and slow multiplies and clr;
# pipeline latches not pinned by init start at zero
RE_BOUNDS = DomainBounds(
    values={"imem": (0x00, 0x01, 0x03, 0x11, 0x13, 0x20), **{k: (0,) for k in ("ex_op", "ex_imm", "m_rd", "m_imm", "m_cnt", "wb_res")}},
    free_cells={"imem": 4},
    allow_bot=False,
)


@dataclass
class CorpusProblem:
    name: str
    files: tuple[str, ...]
    impl: str
    contract: str
    attacker: str
    retire: str
    uarch: frozenset
    bounds: DomainBounds
    horizon: int
    b: int = 1
    cand_file: str | None = None

    def problem(self, b: int | None = None) -> VerificationProblem:
        mod = corpus(*self.files)
        user = candidates(self.cand_file) if self.cand_file else ()
        return VerificationProblem(
            mod.circuit(self.impl), mod.monitor(self.contract), mod.monitor(self.attacker),
            parse_expr(self.retire), b or self.b, self.uarch, user,
        )

    def leak_order(self):
        p = self.problem()
        return oracle_leak_order(p.impl, p.contract, p.attacker, p.uarch, p.retire, self.bounds, self.horizon)


SIMP = CorpusProblem("sIMP/sLM/sAT", ("simp.uv",), "sIMP", "sLM", "sAT", "ret == 1", SIMP_UARCH, SIMP_BOUNDS, 16)
LEAKY = replace(SIMP, name="sIMP_leaky/sLM/sAT", files=("simp.uv", "mutants/leaky.uv"), impl="sIMP_leaky")
RE_O = CorpusProblem(
    "RE/RO/RATK", ("mini_re.uv",), "RE", "RO", "RATK", "retired == 1", RE_UARCH, RE_BOUNDS, 24, 2, "mini_re.cand"
)
RE_I = replace(RE_O, name="RE/RI/RATK", contract="RI")
CORPUS_PROBLEMS = [SIMP, LEAKY, RE_O, RE_I]


@functools.lru_cache(maxsize=None)
def verdict(name: str, b: int | None = None):
    prob = next(p for p in CORPUS_PROBLEMS if p.name == name)
    return verify(prob.problem(b))


@functools.lru_cache(maxsize=None)
def leak_order(name: str):
    return next(p for p in CORPUS_PROBLEMS if p.name == name).leak_order()


# ---------------------------------------------------------------------------


@criterion(1, "sISA summation trace and its even-pc filtered trace", 1)
def test_1_sisa_trace(sisa):
    mu = make_valuation(sisa, {"pc": 0, "reg": 0, "m": list(range(11))})
    assert trace_prefix(sisa, mu, 12).column("reg") == [0, 0, 1, 3, 6, 10, 15, 21, 28, 36, 45, 55]
    even = parse_expr("pc % 2 == 0", sisa)
    assert filtered_trace_prefix(sisa, mu, even, 13).column("reg") == [0, 1, 6, 15, 28, 45, 55]


@criterion(2, "sIMP trace, retirement positions, frame stability", 1)
def test_2_simp_trace(simp):
    mu = make_valuation(simp, {"m": list(range(11))})
    shown = replace(simp, outputs=("reg", "ret", "pc"))
    t = trace_prefix(shown, mu, 13)
    assert t.column("reg") == [0, 0, 0, 1, 1, 3, 3, 6, 6, 10, 10, 15, 15]
    # retirements (the underlined values): cycle 0, then every second cycle
    # from cycle 1 on, once the pipeline is through the zero immediate
    assert [i for i, r in enumerate(t.column("ret")) if r == 1] == [0, 1, 3, 5, 7, 9, 11]
    rows = list(zip(t.column("reg"), t.column("pc"), t.column("ret")))
    for i in range(1, len(rows)):
        if rows[i][2] != 1:
            assert rows[i][:2] == rows[i - 1][:2], f"architectural state moved at cycle {i}"


@criterion(3, "monitor traces sAT[sIMP] and sLM[sISA]", 1)
def test_3_monitor_traces(simp_mod):
    mu_imp = make_valuation(simp_mod.circuit("sIMP"), {"m": list(range(11))})
    at = compose(simp_mod.monitor("sAT"), simp_mod.circuit("sIMP"))
    assert trace_prefix(at, mu_imp, 7).column("pc") == [0, 1, 1, 2, 2, 3, 3]
    # Pinned to the simulator: m(0) = 0, so the first observation is 1.
    # Hand-written accounts of this run sometimes start it with 0; the
    # fixture follows the semantics (discrepancy recorded in the notes).
    lm = compose(simp_mod.monitor("sLM"), simp_mod.circuit("sISA"))
    mu_arch = make_valuation(simp_mod.circuit("sISA"), {"m": list(range(11))})
    assert trace_prefix(lm, mu_arch, 6).column("zero") == [1, 0, 0, 0, 0, 0]
    return "sLM first element pinned to simulator output 1"


@criterion(4, "contract and attacker traces of the two memory pairs", 1)
def test_4_memory_pairs(simp_mod):
    lm = compose(simp_mod.monitor("sLM"), simp_mod.circuit("sISA"))
    at = compose(simp_mod.monitor("sAT"), simp_mod.circuit("sIMP"))

    def ctr(mem):
        return trace_prefix(lm, make_valuation(lm, {"m": mem}), 6).column("zero")

    def atk(mem):
        return trace_prefix(at, make_valuation(at, {"m": mem}), 8).column("pc")

    a_up, a_low = ctr([1, 0, 2]), ctr([5, 1, 3])
    assert a_up[0] == a_low[0] and a_up[1] != a_low[1]
    assert a_up[:2] == [0, 1] and a_low[:2] == [0, 0]
    for mem in ([1, 0, 2], [5, 0, 3]):
        assert ctr(mem) == [0, 1, 0, 1, 1, 1]
        assert atk(mem) == [0, 0, 1, 2, 2, 3, 4, 5]


@criterion(5, "six-candidate Houdini run: exact learned and dropped sets, Satisfied", 10)
def test_5_six_candidates():
    p = SIMP.problem()
    p = replace(p, user_candidates=candidates("simp.cand"), auto_candidates=False, _instrumented=None)
    r = verify(p)
    assert {c.label for c in r.invariants} == {"pc", "st", "ret", "st0_ret"}
    assert {c.expr for c in r.invariants} == {
        parse_expr(s) for s in ("pc.1 == pc.2", "st.1 == st.2", "ret.1 == ret.2", "st.1 == 0 -> ret.1 == 1")
    }
    assert {c.label for c, _, _ in r.dropped} == {"res", "st1_ret"}
    assert r.satisfied
    return f"{r.solver_queries} solver queries"


@criterion(6, "soundness: every Satisfied corpus problem holds under the leak-order oracle", 300)
def test_6_soundness():
    proved = []
    for prob in CORPUS_PROBLEMS:
        if not verdict(prob.name).satisfied:
            continue
        r = leak_order(prob.name)
        assert r.verdict == HOLDS, f"{prob.name}: verify said Satisfied but the oracle found {r.pair}"
        proved.append(f"{prob.name} over {r.states} states")
    assert len(proved) >= 2
    return "; ".join(proved)


@criterion(7, "decoupling: ISA compliance and oracle agreement on sISA/sIMP", 300)
def test_7_decoupling(simp_mod):
    arch = simp_mod.circuit("sISA")
    notes = []
    for prob in (SIMP, LEAKY):
        p = prob.problem()
        assert check_isa_compliance(p.impl, arch, RET, SIMP_BOUNDS, 16).passed
        lo = leak_order(prob.name)
        cs = oracle_contract_satisfaction(arch, p.impl, p.contract, p.attacker, p.uarch, SIMP_BOUNDS, 16)
        assert lo.verdict == cs.verdict
        notes.append(f"{prob.impl} both {lo.verdict}")
    return ", ".join(notes)


@criterion(8, "negative controls and mini-RE lookahead", 1800)
def test_8_negative_controls():
    for prob in (LEAKY, RE_I):
        r = leak_order(prob.name)
        assert r.verdict == VIOLATION and r.pair is not None
        a, b = r.pair
        assert a != b
        assert all(a[n] == b[n] for n in prob.uarch)
    assert not verdict(LEAKY.name).satisfied
    for b in (1, 2, 3):
        assert not verdict(RE_I.name, b).satisfied
    minimum = next((b for b in range(1, 6) if verdict(RE_O.name, b).satisfied), None)
    assert minimum is not None, "RO never proved up to b=5"
    assert leak_order(RE_O.name).verdict == HOLDS
    return f"RE under RO first Satisfied at b={minimum}"


@criterion(9, "backend agreement on 100 random circuits and formulas", 600)
def test_9_backend_agreement():
    rng = random.Random(20240601)
    counts = {"valid": 0, "refuted": 0}
    for i in range(100):
        c = random_circuit(rng, width=2, max_regs=2)
        f = random_formula(rng, c)
        if rng.random() < 0.5:
            f = Implies(random_formula(rng, c, 1), f)
        dom = DomainBounds(allow_bot=True)
        sym = check_validity(c, f, "symbolic", dom)
        exh = check_validity(c, f, "exhaustive", dom)
        assert bool(sym) == bool(exh), f"case {i}: {c} {f}"
        if isinstance(sym, Counterexample):
            assert sym.trace.refutes(f), f"case {i}: symbolic counterexample does not replay"
            counts["refuted"] += 1
        else:
            counts["valid"] += 1
    return f"{counts['valid']} valid, {counts['refuted']} refuted"


@criterion(10, "4-way and stuttering verdicts agree; query counts recorded", 600)
def test_10_four_way(sisa):
    notes = []
    for prob, expect in ((SIMP, True), (LEAKY, False)):
        p = replace(prob.problem(), user_candidates=candidates("simp_4way.cand"), _instrumented=None)
        stutter = verify(prob.problem())
        four = verify_4way(sisa, p)
        assert stutter.satisfied == four.satisfied == expect
        notes.append(f"{prob.impl}: stuttering {stutter.solver_queries} queries, 4-way {four.solver_queries}")
    return "; ".join(notes)

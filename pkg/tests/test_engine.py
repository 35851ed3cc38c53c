import pytest

from uvleak.engine import (
    AUTO_ATTACKER_EQ,
    AUTO_FLAG_IMPL,
    AUTO_REG_EQ,
    AUTO_RET_SYNC,
    AUTO_WIRE_EQ,
    NOT_PROVED,
    SATISFIED,
    USER,
    ProblemError,
    VerificationProblem,
    generate_candidates,
    learn_inv,
    parse_candidates,
    verify,
    verify_4way,
)
from uvleak.ir import Const
from uvleak.logic.formula import Atom
from uvleak.textio import ParseError, parse_expr, parse_file
from uvleak.transforms import NotAMonitor, stuttering_product

from conftest import candidates, corpus, simp_problem

def extra_monitors():
    from uvleak.textio import print_module

    text = print_module(corpus("simp.uv")) + (
        "monitor sATres on sIMP { output pc, res; }\n"
        "monitor Nil on sIMP { output; }\n"
        "monitor Counting on sIMP { reg n; n <= n + 1; output n; }\n"
    )
    return parse_file(text)


def labels(cands):
    return {c.label for c in cands}


def test_auto_candidates_for_simp():
    cands = generate_candidates(simp_problem(cand_file=None))
    text = labels(cands)
    for want in ("pc.1 == pc.2", "st.1 == st.2", "res.1 == res.2", "ret.1 == ret.2", "m.1 == m.2"):
        assert want in text
    assert sum(c.provenance == AUTO_RET_SYNC for c in cands) == 1
    assert {c.provenance for c in cands} <= {AUTO_REG_EQ, AUTO_WIRE_EQ, AUTO_ATTACKER_EQ, AUTO_RET_SYNC, AUTO_FLAG_IMPL}
    # sIMP has no wires, so nothing comes from them
    assert not any(c.provenance == AUTO_WIRE_EQ for c in cands)


def test_wire_candidates():
    mod = parse_file(
        "circuit W { reg x; wire y = x + 1; x <= y; output x; } monitor A on W { output x; }"
    )
    p = VerificationProblem(mod.circuit("W"), mod.monitor("A"), mod.monitor("A"), Const(1))
    assert any(c.provenance == AUTO_WIRE_EQ and c.subject == "y" for c in generate_candidates(p))


def test_user_candidates_are_tagged():
    cands = candidates("simp.cand")
    assert len(cands) == 6
    st0 = next(c for c in cands if c.label == "st0_ret")
    assert st0.provenance == USER
    assert st0.expr == parse_expr("st.1 == 0 -> ret.1 == 1")


def test_candidate_file_syntax():
    cands = parse_candidates("# comment\n\n// also\nname: x.1 == x.2\nx.1 == 0 ? y.1 == 1 : 1\n")
    assert [c.label for c in cands] == ["name", "x.1 == 0 ? y.1 == 1 : 1"]
    with pytest.raises(ParseError) as err:
        parse_candidates("ok: x.1 == x.2\nbad: x.1 ==\n", source="c.cand")
    assert err.value.line == 2


def test_six_candidates_learn_exactly_four():
    r = verify(simp_problem(auto=False))
    assert labels(r.invariants) == {"pc", "st", "ret", "st0_ret"}
    assert {c.label for c, _, _ in r.dropped} == {"res", "st1_ret"}
    assert all(phase == "inductive" for _, phase, _ in r.dropped)
    assert r.verdict == SATISFIED


def test_auto_candidates_alone_prove_simp():
    assert verify(simp_problem(cand_file=None)).satisfied


def test_learn_inv_with_no_candidates(simp):
    sp = stuttering_product(simp, parse_expr("ret == 1", simp))
    res = learn_inv(sp, Atom(Const(1)), Atom(Const(1)), 1, [])
    assert res.invariants == [] and res.base_queries == 1 and res.inductive_queries == 0


def test_attacker_seeing_res_is_not_proved():
    mod = extra_monitors()
    p = simp_problem()
    p = VerificationProblem(p.impl, p.contract, mod.monitor("sATres"), p.retire, 1, p.uarch, p.user_candidates)
    assert verify(p).verdict == NOT_PROVED


def test_silent_attacker_is_satisfied():
    mod = extra_monitors()
    p = simp_problem(cand_file=None)
    p = VerificationProblem(p.impl, p.contract, mod.monitor("Nil"), p.retire, 1, p.uarch, (), True)
    assert verify(p).satisfied


def test_problem_preconditions():
    mod = extra_monitors()
    p = simp_problem()
    with pytest.raises(ProblemError):
        verify(VerificationProblem(p.impl, p.contract, p.attacker, p.retire, 0, p.uarch))
    with pytest.raises(ProblemError):
        verify(VerificationProblem(p.impl, p.contract, p.attacker, p.retire, 1, frozenset({"nope"})))
    with pytest.raises(NotAMonitor):
        verify(VerificationProblem(p.impl, p.contract, mod.monitor("Counting"), p.retire, 1, p.uarch))
    with pytest.raises(ProblemError):
        verify(VerificationProblem(p.impl, p.contract, p.attacker, parse_expr("zzz == 1"), 1, p.uarch))


def test_4way_rejects_mismatched_architecture(sisa):
    p = simp_problem()
    wrong = VerificationProblem(p.impl, p.contract, p.attacker, p.retire, 1, frozenset({"st", "res"}))
    with pytest.raises(ProblemError):
        verify_4way(sisa, wrong)


def test_leaky_mutant_is_not_proved(sisa):
    p = simp_problem("sIMP_leaky", ("simp.uv", "mutants/leaky.uv"))
    assert not verify(p).satisfied


def test_report_fields_are_stable():
    r = verify(simp_problem(auto=False))
    assert list(r.fields()) == [
        "result", "engine", "lookahead", "candidates", "invariants_learned",
        "iterations_base", "iterations_inductive", "solver_queries",
    ]
    assert "elapsed_secs" in r.fields(timing=True)


def test_exhaustive_backend_agrees_on_counter():
    mod = parse_file(
        "circuit T width 2 { reg c; reg s[1]; c <= c + 1; s <= s; output c; init c == 0; }"
        " monitor L on T { output s; } monitor A on T { output c; }"
    )
    p = VerificationProblem(mod.circuit("T"), mod.monitor("L"), mod.monitor("A"), Const(1), 1, frozenset({"c"}))
    assert verify(p).satisfied == verify(p, backend="exhaustive").satisfied == True  # noqa: E712

import random
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gen import random_circuit
from uvleak.ir import Circuit, validate, vars_of
from uvleak.logic.formula import Atom, BoundedFuture, Next
from uvleak.simulator import make_valuation, trace_prefix
from uvleak.textio import (
    ParseError,
    dump_fields,
    dump_trace,
    load_fields,
    load_trace,
    parse_circuit,
    parse_expr,
    parse_file,
    parse_formula,
    print_circuit,
    print_expr,
    print_module,
)

GOLDEN = Path(__file__).parent / "golden"


def test_parse_inline_sisa(sisa):
    c = parse_circuit(
        "circuit sISA { reg pc[4]=0; reg reg=0; mem m[16]; pc <= pc+1; reg <= reg+m[pc]; output reg;"
        " init pc==0 && reg==0; }"
    )
    assert len(c.assigns) == 2
    assert sum(d.is_array for d in c.decls) == 1
    assert c.outputs == ("reg",)
    assert c == sisa


def test_round_trip_corpus(sisa, simp):
    for c in (sisa, simp):
        assert parse_circuit(print_circuit(c)) == c


def test_sisa_golden_print(sisa):
    text = print_circuit(sisa)
    assert text == (GOLDEN / "sisa.txt").read_text()
    assert sum("<=" in line and "init" not in line for line in text.splitlines()) == 2


def test_empty_circuit_prints_only_outputs():
    assert print_circuit(Circuit(name="e")) == "circuit e width 8 {\n  output;\n}\n"


def test_simp_reparse_vars(simp):
    assert vars_of(parse_circuit(print_circuit(simp))) == {"pc", "reg", "m", "st", "res", "ret"}


def test_module_round_trip(simp_mod):
    again = parse_file(print_module(simp_mod))
    assert again.circuits == simp_mod.circuits
    assert again.monitors == simp_mod.monitors


def test_missing_expression_is_a_located_error():
    with pytest.raises(ParseError) as err:
        parse_circuit("circuit c { reg pc; pc <= ; output pc; }")
    assert (err.value.line, err.value.col) == (1, 27)


def test_formulas(sisa):
    f = parse_formula("X (pc == 1)", sisa)
    assert isinstance(f, Next) and isinstance(f.body, Atom)
    g = parse_formula("F<=3 (pc <= 3)", sisa)
    assert isinstance(g, BoundedFuture) and g.k == 3
    with pytest.raises(ParseError):
        parse_formula("G (x")


def test_unknown_identifier(sisa):
    with pytest.raises(ParseError):
        parse_expr("nope + 1", sisa)


def test_trace_dump(sisa, mu_sum):
    assert dump_trace(trace_prefix(sisa, mu_sum, 1)).splitlines()[1] == "cycle=0 reg=0"
    empty = trace_prefix(sisa, mu_sum, 0)
    assert dump_trace(empty) == "trace role=full\n"
    t = trace_prefix(sisa, mu_sum, 14)
    assert load_trace(dump_trace(t)) == t


def test_fields_round_trip():
    items = [("result", "Satisfied"), ("lookahead", "1")]
    assert load_fields(dump_fields(items)) == items


def test_printing_is_deterministic(simp):
    assert print_circuit(simp) == print_circuit(parse_circuit(print_circuit(simp)))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**32))
def test_parse_print_identity_on_random_circuits(seed):
    c = random_circuit(random.Random(seed))
    assert not validate(c)
    assert parse_circuit(print_circuit(c)) == c


@settings(max_examples=300, deadline=None)
@given(st.text(max_size=60))
def test_arbitrary_input_never_crashes(src):
    try:
        parse_file(src)
    except ParseError as err:
        assert err.line >= 1 and err.col >= 1


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_random_trace_dumps_round_trip(seed):
    rng = random.Random(seed)
    c = random_circuit(rng)
    c = Circuit(c.name, c.width, c.decls, c.wires, c.assigns, tuple(d.name for d in c.decls if not d.is_array))
    mu = make_valuation(c, {d.name: rng.randrange(8) for d in c.decls if not d.is_array})
    t = trace_prefix(c, mu, 6)
    assert load_trace(dump_trace(t)) == t


def test_print_expr_parenthesises(sisa):
    e = parse_expr("(pc + 1) * 2 == reg", sisa)
    assert parse_expr(print_expr(e), sisa) == e

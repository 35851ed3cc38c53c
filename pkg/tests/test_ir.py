import pytest

from uvleak.ir import (
    ArrayRead,
    Assignment,
    Binary,
    Circuit,
    Const,
    IllFormedCircuit,
    Ref,
    RegisterDecl,
    Wire,
    check,
    read_write_sets,
    tag,
    untag,
    validate,
    vars_of,
)


def sisa_ir():
    return Circuit(
        name="sISA",
        width=8,
        decls=(RegisterDecl("pc", 4, None, 0), RegisterDecl("reg", 8, None, 0), RegisterDecl("m", 8, 16)),
        assigns=(
            Assignment("pc", Binary("+", Ref("pc"), Const(1))),
            Assignment("reg", Binary("+", Ref("reg"), ArrayRead("m", Ref("pc")))),
        ),
        outputs=("reg",),
        init=Binary("&&", Binary("==", Ref("pc"), Const(0)), Binary("==", Ref("reg"), Const(0))),
    )


def test_sisa_is_well_formed(sisa):
    assert not validate(sisa)
    assert check(sisa) is sisa


def test_duplicate_assignment_is_reported():
    c = sisa_ir()
    bad = Circuit(name="dup", decls=c.decls, assigns=c.assigns + (Assignment("pc", Const(3)),))
    diags = validate(bad)
    assert "duplicate left-hand side pc" in diags.messages()
    with pytest.raises(IllFormedCircuit):
        check(bad)


def test_wire_cycle_is_reported():
    c = Circuit(name="loop", wires=(Wire("a", Ref("b")), Wire("b", Ref("a"))))
    msgs = validate(c).messages()
    assert any(m.startswith("combinational cycle") and "a" in m and "b" in m for m in msgs)


def test_undeclared_reference_is_reported():
    c = Circuit(name="u", decls=(RegisterDecl("x", 8),), assigns=(Assignment("x", Ref("y")),))
    assert validate(c)


def test_read_write_sets(sisa):
    assert read_write_sets(sisa) == ({"pc", "reg", "m"}, {"pc", "reg"})
    assert read_write_sets(Circuit(name="e")) == (set(), set())
    k = Circuit(name="k", decls=(RegisterDecl("x", 8),), assigns=(Assignment("x", Const(5)),))
    assert read_write_sets(k) == (set(), {"x"})


def test_vars(sisa, simp):
    assert vars_of(sisa) == {"pc", "reg", "m"}
    assert vars_of(simp) == {"pc", "reg", "m", "st", "res", "ret"}
    assert vars_of(Circuit(name="e")) == set()


def test_parsed_sisa_matches_hand_built(sisa):
    assert sisa == sisa_ir()


def test_copy_tags_round_trip():
    assert tag("pc", 2) == "pc.2"
    assert untag("pc.2") == ("pc", 2)
    assert untag("pc") == ("pc", None)

import pytest

from uvleak.cli import main, parse_values
from uvleak.textio import load_fields

SIMP = ["corpus/simp.uv", "--impl", "sIMP", "--contract", "sLM", "--attacker", "sAT"]
BOUNDS = ["--cells", "m=3", "--values", "m:0..3", "--values", "res:0,7", "--horizon", "12"]


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_simulate_summation(capsys):
    code, out, _ = run(
        capsys, "simulate", "corpus/sisa.uv", "--circuit", "sISA", "--init", "pc==0&&reg==0",
        "--mem", "m:0,1,2,...,10", "--cycles", "12", "--format", "machine",
    )
    assert code == 0
    rows = [line for line in out.splitlines() if line.startswith("cycle=")]
    assert [int(r.split("reg=")[1]) for r in rows] == [0, 0, 1, 3, 6, 10, 15, 21, 28, 36, 45, 55]


def test_simulate_filter_and_monitor(capsys):
    code, out, _ = run(
        capsys, "simulate", "corpus/simp.uv", "--circuit", "sIMP", "--monitor", "sAT",
        "--mem", "m:0..10", "--cycles", "7", "--format", "machine",
    )
    assert code == 0 and "cycle=6 pc=3" in out
    code, out, _ = run(
        capsys, "simulate", "corpus/sisa.uv", "--mem", "m:0..10", "--cycles", "13",
        "--filter", "pc % 2 == 0", "--format", "machine",
    )
    assert [int(r.split("reg=")[1]) for r in out.splitlines()[1:]] == [0, 1, 6, 15, 28, 45, 55]


def test_verify_satisfied(capsys):
    code, out, _ = run(capsys, "verify", *SIMP, "--retire", "ret==1", "--b", "1", "--format", "machine")
    assert code == 0
    fields = dict(load_fields(out))
    assert fields["result"] == "Satisfied"


def test_verify_output_is_reproducible(capsys):
    argv = ["verify", *SIMP, "--retire", "ret==1", "--verbose", "--format", "machine"]
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_verify_with_six_candidates(capsys):
    code, out, _ = run(
        capsys, "verify", *SIMP, "--retire", "ret==1", "--no-auto", "--candidates", "corpus/simp.cand",
        "--verbose", "--format", "machine",
    )
    assert code == 0
    assert "dropped=inductive#1:User:res" in out and "invariant=User:st0_ret" in out


def test_missing_retire_is_usage_error(capsys):
    code, _, err = run(capsys, "verify", *SIMP)
    assert code == 2 and "--retire" in err


def test_unknown_names_are_usage_errors(capsys):
    assert run(capsys, "verify", "corpus/simp.uv", "--impl", "nope", "--contract", "sLM",
               "--attacker", "sAT", "--retire", "ret==1")[0] == 2
    assert run(capsys, "simulate", "no/such/file.uv")[0] == 2


def test_parse_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.uv"
    bad.write_text("circuit c { reg x; x <= ; output x; }")
    code, _, err = run(capsys, "validate", str(bad))
    assert code == 2 and "1:" in err


def test_validate(capsys, tmp_path):
    assert run(capsys, "validate", "corpus/simp.uv")[0] == 0
    dup = tmp_path / "dup.uv"
    dup.write_text("circuit D { reg x; x <= 1; x <= 2; output x; }")
    code, out, _ = run(capsys, "validate", str(dup))
    assert code == 1 and "duplicate left-hand side x" in out


def test_conflicting_definitions(capsys, tmp_path):
    other = tmp_path / "o.uv"
    other.write_text("circuit sISA { reg pc; output pc; }")
    assert run(capsys, "validate", "corpus/sisa.uv", str(other))[0] == 2
    # identical duplicates merge silently
    assert run(capsys, "validate", "corpus/sisa.uv", "corpus/simp.uv")[0] == 0


def test_check_isa(capsys):
    assert run(capsys, "check-isa", "corpus/simp.uv", "--impl", "sIMP", "--arch", "sISA",
               "--retire", "ret==1", *BOUNDS)[0] == 0
    code, out, _ = run(
        capsys, "check-isa", "corpus/simp.uv", "corpus/mutants/early_write.uv", "--impl", "sIMP_early_write",
        "--arch", "sISA", "--retire", "ret==1", *BOUNDS, "--format", "machine",
    )
    assert code == 1 and "condition=2" in out


def test_oracle(capsys):
    code, out, _ = run(capsys, "oracle", *SIMP, "--retire", "ret==1", *BOUNDS, "--format", "machine")
    assert code == 0 and "result=Holds" in out
    code, out, _ = run(
        capsys, "oracle", "corpus/simp.uv", "corpus/mutants/leaky.uv", "--impl", "sIMP_leaky",
        "--contract", "sLM", "--attacker", "sAT", "--retire", "ret==1", *BOUNDS, "--kind", "contract",
        "--format", "machine",
    )
    assert code == 1 and "result=Violation" in out and out.count(" m=") == 2


def test_oracle_seed_is_deterministic(capsys):
    argv = ["oracle", "corpus/simp.uv", "corpus/mutants/leaky.uv", "--impl", "sIMP_leaky", "--contract", "sLM",
            "--attacker", "sAT", "--retire", "ret==1", *BOUNDS, "--seed", "7", "--format", "machine"]
    assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


def test_resource_limit_exit_code(capsys):
    code, _, err = run(capsys, "oracle", *SIMP, "--retire", "ret==1", "--max-states", "10")
    assert code == 3 and "limit" in err


def test_out_file(capsys, tmp_path):
    dest = tmp_path / "r.txt"
    assert run(capsys, "verify", *SIMP, "--retire", "ret==1", "--out", str(dest), "--format", "machine")[0] == 0
    assert "result=Satisfied" in dest.read_text()


def test_transform_commands(capsys):
    code, out, _ = run(capsys, "stutter", "corpus/counter.uv", "--retire", "i % 2 == 0")
    assert code == 0 and "i.1 <=" in out
    code, out, _ = run(capsys, "product", "corpus/counter.uv")
    assert code == 0 and "i.2 <= i.2 + 1;" in out
    code, out, _ = run(capsys, "compose", "corpus/simp.uv", "--circuit", "sIMP", "--monitor", "sAT")
    assert code == 0


def test_learn_inv_command(capsys):
    code, out, _ = run(capsys, "learn-inv", *SIMP, "--retire", "ret==1", "--no-auto",
                       "--candidates", "corpus/simp.cand", "--format", "machine")
    assert code == 0 and "invariants_learned=4" in out


def test_verify_4way(capsys):
    code, out, _ = run(capsys, "verify-4way", *SIMP, "--retire", "ret==1",
                       "--candidates", "corpus/simp_4way.cand", "--format", "machine")
    assert code == 0 and "engine=4way" in out


@pytest.mark.parametrize(
    "text,want",
    [("0,1,2,...,6", [0, 1, 2, 3, 4, 5, 6]), ("0..3", [0, 1, 2, 3]), ("4, 0x10", [4, 16]), ("0,2,...,8", [0, 2, 4, 6, 8])],
)
def test_value_lists(text, want):
    assert parse_values(text) == want

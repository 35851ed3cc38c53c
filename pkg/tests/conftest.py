from functools import lru_cache

import pytest

from uvleak.cli import corpus_dir
from uvleak.engine import VerificationProblem, parse_candidates
from uvleak.simulator import make_valuation
from uvleak.textio import parse_expr, parse_file


@lru_cache(maxsize=None)
def corpus(*names: str):
    """Parse and merge corpus files (later files may repeat earlier items)."""
    from uvleak.textio import Module

    merged = Module()
    for name in names:
        mod = parse_file((corpus_dir() / name).read_text(), name)
        merged.circuits.update(mod.circuits)
        merged.monitors.update(mod.monitors)
    return merged


def candidates(name: str):
    return parse_candidates((corpus_dir() / name).read_text(), None, name)


def simp_problem(impl="sIMP", files=("simp.uv",), *, b=1, cand_file="simp.cand", auto=True, attacker="sAT"):
    mod = corpus(*files)
    user = candidates(cand_file) if cand_file else ()
    return VerificationProblem(
        mod.circuit(impl), mod.monitor("sLM"), mod.monitor(attacker), parse_expr("ret==1"),
        b, frozenset({"st", "res", "ret"}), user, auto,
    )


@pytest.fixture(scope="session")
def sisa():
    return corpus("sisa.uv").circuit("sISA")


@pytest.fixture(scope="session")
def simp_mod():
    return corpus("simp.uv")


@pytest.fixture(scope="session")
def simp(simp_mod):
    return simp_mod.circuit("sIMP")


@pytest.fixture
def mu_sum(sisa):
    return make_valuation(sisa, {"pc": 0, "reg": 0, "m": list(range(11))})


@pytest.fixture
def mu_simp(simp):
    return make_valuation(simp, {"m": list(range(11))})


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])

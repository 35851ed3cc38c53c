"""Invariant learning, verification and bounded oracles."""

from .houdini import (
    COUNTEREXAMPLE,
    NOT_PROVED,
    SATISFIED,
    HoudiniStuck,
    LearnResult,
    VerificationReport,
    candidates_4way,
    learn_inv,
    verify,
    verify_4way,
)
from .oracles import (
    HOLDS,
    VIOLATION,
    ComplianceResult,
    OracleResult,
    check_isa_compliance,
    initial_bounds,
    initial_states,
    oracle_contract_satisfaction,
    oracle_leak_order,
)
from .problem import (
    AUTO_ATTACKER_EQ,
    AUTO_FLAG_IMPL,
    AUTO_REG_EQ,
    AUTO_RET_SYNC,
    AUTO_WIRE_EQ,
    USER,
    CandidateInvariant,
    ProblemError,
    VerificationProblem,
    agree_on,
    defined,
    flag_implications,
    generate_candidates,
    parse_candidates,
    same_value,
)

__all__ = [
    "AUTO_ATTACKER_EQ",
    "AUTO_FLAG_IMPL",
    "AUTO_REG_EQ",
    "AUTO_RET_SYNC",
    "AUTO_WIRE_EQ",
    "COUNTEREXAMPLE",
    "CandidateInvariant",
    "ComplianceResult",
    "HOLDS",
    "HoudiniStuck",
    "LearnResult",
    "NOT_PROVED",
    "OracleResult",
    "ProblemError",
    "SATISFIED",
    "USER",
    "VIOLATION",
    "VerificationProblem",
    "VerificationReport",
    "agree_on",
    "candidates_4way",
    "check_isa_compliance",
    "defined",
    "flag_implications",
    "generate_candidates",
    "initial_bounds",
    "initial_states",
    "learn_inv",
    "oracle_contract_satisfaction",
    "oracle_leak_order",
    "parse_candidates",
    "same_value",
    "verify",
    "verify_4way",
]

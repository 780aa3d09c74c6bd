from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clue.disasm import assemble, disassemble
from clue.model import Address
from clue.symexec import (
    CALLDATA,
    CONFIRMED,
    ENV,
    INCONCLUSIVE,
    MEMORY,
    REFUTED,
    STORAGE,
    UNKNOWN,
    ExecConfig,
    ExecutionReport,
    ExternalCallSite,
    SymValue,
    cbc_lock_check,
    execute,
    resolve_delegate_target,
)
from evm_oracle import CORPUS, LIB, OTHER, asm, dcall, call
from helpers import symexec_disagreement

LIBRARY = Address.from_int(LIB)


def run(text: str, **bounds) -> ExecutionReport:
    return execute(disassemble(asm(text)), ExecConfig(**bounds))


@pytest.mark.parametrize("name", sorted(CORPUS))
def test_agrees_with_brute_force_oracle(name, corpus, oracle_results):
    assert symexec_disagreement(corpus[name], oracle_results[name]) is None


def test_corpus_covers_both_outcomes(oracle_results):
    constant = sum(r.constant for r in oracle_results.values())
    assert constant >= 20 and len(oracle_results) - constant >= 20
    assert all(len(code) <= 64 for code in map(asm, CORPUS.values()))


def call_target(target_items) -> SymValue:
    items = [("PUSH1", 0), "DUP1", "DUP1", "DUP1", "DUP1", *target_items, "GAS", "CALL"]
    return execute(disassemble(assemble(items))).call_sites[0].target


def test_target_origins():
    assert run(call("CALLDATASIZE")).call_sites[0].target == SymValue.symbolic(CALLDATA)
    assert call_target([("PUSH1", 0), "SLOAD"]) == SymValue.symbolic(STORAGE)
    assert call_target(["CALLER"]) == SymValue.symbolic(ENV)
    assert run(call("PUSH1 0 MLOAD")).call_sites[0].target == SymValue.symbolic(MEMORY)
    assert call_target([("PUSH1", 1), ("PUSH1", 2), "SHA3"]) == SymValue.symbolic(UNKNOWN)


def test_target_is_masked_to_160_bits():
    report = run(call("PUSH32 0x" + "ff" * 32))
    assert report.call_sites[0].target.word == (1 << 160) - 1


def test_symbolic_branch_forks_two_paths():
    report = run("CALLDATASIZE @a JUMPI " + call("PUSH1 1") + " STOP a: " + call("PUSH1 2"))
    assert report.paths_explored == 2
    assert sorted(s.target.word for s in report.call_sites) == [1, 2]
    assert len({s.path_id for s in report.call_sites}) == 2


def test_symbolic_jump_ends_path():
    report = run("CALLDATASIZE JUMP " + call("PUSH1 1"))
    assert report.symbolic_jumps == 1 and report.call_sites == []


def test_loop_bound_truncates():
    endless = "top: " + call("PUSH1 5") + " @top JUMP"
    report = run(endless, max_loop_iterations=3)
    assert report.truncated
    assert len(report.call_sites) == 4  # the first pass plus three re-entries


def test_path_bound_truncates():
    code = assemble_labels(6)
    full = execute(disassemble(code))
    assert full.paths_explored == 64 and not full.truncated
    capped = execute(disassemble(code), ExecConfig(max_paths=10))
    assert capped.truncated and capped.paths_explored == 10


def assemble_labels(n: int) -> bytes:
    items = []
    for i in range(n):
        items += ["CALLDATASIZE", ("PUSH1", f"@l{i}"), "JUMPI", ("JUMPDEST", f"l{i}")]
    items += [("PUSH1", 0), "DUP1", "DUP1", "DUP1", "DUP1", ("PUSH1", 1), "GAS", "CALL", "POP"]
    return assemble(items)


def test_step_bound_truncates():
    report = run("top: @top JUMP", max_steps_per_path=50, max_loop_iterations=1000)
    assert report.truncated


def test_bounds_must_be_positive():
    with pytest.raises(ValueError):
        ExecConfig(max_paths=0)


@settings(max_examples=300, deadline=None)
@given(st.binary(max_size=200))
def test_never_crashes_and_respects_path_bound(code):
    report = execute(disassemble(code), ExecConfig(max_paths=16, max_steps_per_path=2000))
    assert 1 <= report.paths_explored <= 16
    for site in report.call_sites:
        assert code[site.pc] in (0xF1, 0xF2, 0xF4, 0xFA)


def _site(target: SymValue) -> ExternalCallSite:
    return ExternalCallSite(0, "DELEGATECALL", target, 0)


def test_verdicts():
    lib = SymValue.concrete(LIB)
    other = SymValue.concrete(OTHER)
    assert resolve_delegate_target(ExecutionReport([_site(lib)]), LIBRARY) == CONFIRMED
    assert resolve_delegate_target(ExecutionReport([_site(other)]), LIBRARY) == REFUTED
    assert resolve_delegate_target(ExecutionReport([_site(other), _site(SymValue.symbolic(CALLDATA))]), LIBRARY) == INCONCLUSIVE
    assert resolve_delegate_target(ExecutionReport([_site(other)], truncated=True), LIBRARY) == INCONCLUSIVE
    assert resolve_delegate_target(ExecutionReport(), LIBRARY) == INCONCLUSIVE


def test_confirmed_on_real_forwarding_pattern():
    report = run("CALLDATASIZE @fwd JUMPI STOP fwd: CALLDATASIZE PUSH1 0 PUSH1 0 CALLDATACOPY " + dcall(f"PUSH20 {LIB}"))
    assert resolve_delegate_target(report, LIBRARY) == CONFIRMED


def test_token_lock_check():
    lib = SymValue.concrete(LIB)
    assert cbc_lock_check(ExecutionReport([_site(lib)]), LIBRARY)
    assert cbc_lock_check(ExecutionReport([_site(lib), _site(SymValue.symbolic(STORAGE))]), LIBRARY)
    assert not cbc_lock_check(ExecutionReport([_site(lib), _site(SymValue.concrete(OTHER))]), LIBRARY)
    assert not cbc_lock_check(ExecutionReport([_site(SymValue.symbolic(CALLDATA))]), LIBRARY)

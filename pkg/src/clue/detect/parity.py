"""Wallets whose only route for moving funds delegates to a destroyed library."""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Optional

from clue.detect.common import (
    ATTACKED_PARITY,
    END_OF_BLOCK,
    Finding,
    PipelineResult,
    guarded,
    outflows_after,
    parallel_map,
)
from clue.disasm import disassemble, screen_hardcoded
from clue.model import AccountState, Address, parse_address
from clue.source import ChainSource
from clue.symexec import (
    CONFIRMED,
    ExecConfig,
    ExecutionReport,
    cbc_lock_check,
    execute,
    resolve_delegate_target,
)
from clue.valuation import PriceTable, value_account

# Parity multi-sig WalletLibrary, killed in block 4501969 (November 2017).
PARITY_LIBRARY = parse_address("0x863df6bfa4469f3ead0be8f9f2aae51c91a907b4")
PARITY_KILL_BLOCK = 4501969
CBC_MOVABLE = "cbc_possibly_movable"


@dataclass(frozen=True)
class ParityConfig:
    library_address: Address = PARITY_LIBRARY
    attack_block: int = PARITY_KILL_BLOCK
    exec: ExecConfig = field(default_factory=ExecConfig)

    def __post_init__(self) -> None:
        if self.library_address.to_int() == 0:
            raise ValueError("parity library address must be nonzero")


@dataclass(frozen=True)
class ParityEvidence:
    verdict: str
    library: Address
    call_sites: tuple[str, ...]
    paths_explored: int
    truncated: bool
    cbc_locked: bool

    @classmethod
    def from_report(cls, report: ExecutionReport, library: Address) -> ParityEvidence:
        return cls(
            resolve_delegate_target(report, library),
            library,
            tuple(f"pc={s.pc} op={s.opcode} target={s.target}" for s in report.call_sites),
            report.paths_explored,
            report.truncated,
            cbc_lock_check(report, library),
        )

    def to_json(self) -> dict:
        return {
            "kind": "delegate_to_destroyed_library",
            "verdict": self.verdict,
            "library": self.library.hex,
            "call_sites": list(self.call_sites),
            "paths_explored": self.paths_explored,
            "truncated": self.truncated,
            "cbc_locked": self.cbc_locked,
        }


def screen_parity_candidates(
    source: ChainSource, accounts: Iterable[AccountState], cfg: ParityConfig
) -> list[Address]:
    """Accounts whose code embeds the library address; EOAs are skipped."""
    return [
        acct.address
        for acct in accounts
        if acct.code and screen_hardcoded(disassemble(acct.code), cfg.library_address)
    ]


def analyze_code(code: bytes, cfg: ParityConfig) -> ParityEvidence:
    return ParityEvidence.from_report(execute(disassemble(code), cfg.exec), cfg.library_address)


def _assess(
    source: ChainSource, account: Address, cfg: ParityConfig, prices: PriceTable
) -> tuple[Optional[Finding], str, list[str]]:
    evidence = analyze_code(source.get_code(account), cfg)
    if evidence.verdict != CONFIRMED:
        note = f"{account}: symexec verdict {evidence.verdict} (truncated={evidence.truncated})"
        return None, evidence.verdict, [note]
    value = value_account(source, account, prices)
    if not value.holds_value:
        return None, "zero_value", value.warnings
    if outflows_after(source, account, (cfg.attack_block, END_OF_BLOCK)):
        return None, "outflow_after_lock", value.warnings
    annotations = () if evidence.cbc_locked else (CBC_MOVABLE,)
    finding = Finding(
        ATTACKED_PARITY, account, evidence, value.eth, tuple(value.tokens), cfg.attack_block, annotations
    )
    return finding, "finding", value.warnings


def confirm_parity(
    source: ChainSource, account: Address, cfg: ParityConfig, prices: PriceTable = PriceTable(Decimal(0))
) -> Optional[Finding]:
    return _assess(source, account, cfg, prices)[0]


def library_destructed(source: ChainSource, cfg: ParityConfig) -> bool:
    return not source.get_code(cfg.library_address)


def run_parity_pipeline(
    source: ChainSource,
    accounts: Iterable[AccountState],
    cfg: ParityConfig,
    prices: PriceTable = PriceTable(Decimal(0)),
    parallelism: int = 1,
) -> PipelineResult:
    result = PipelineResult(ATTACKED_PARITY)
    accounts = list(accounts)
    result.counts["accounts_scanned"] = len(accounts)
    result.candidates = sorted(set(screen_parity_candidates(source, accounts, cfg)))

    assess = guarded(lambda a: _assess(source, a, cfg, prices), str, result.warnings)
    confirmed = 0
    for outcome in parallel_map(assess, result.candidates, parallelism):
        if outcome is None:
            result.counts["errors"] = result.counts.get("errors", 0) + 1
            continue
        finding, reason, warnings = outcome
        result.warnings.extend(warnings)
        if reason not in ("confirmed", "refuted", "inconclusive"):
            confirmed += 1
        if finding is not None:
            result.findings.append(finding)
        else:
            key = f"excluded_{reason}"
            result.counts[key] = result.counts.get(key, 0) + 1
    result.counts["confirmed"] = confirmed

    alive = not library_destructed(source, cfg)
    result.extra["library"] = cfg.library_address.hex
    result.extra["library_destructed"] = not alive
    result.extra["attack_block"] = cfg.attack_block
    if alive:
        # the lock argument needs the library gone; report, but do not count as locked
        for f in result.findings:
            result.warnings.append(f"{f.account}: delegates to {cfg.library_address}, which still has code")
        result.counts["downgraded_library_alive"] = len(result.findings)
        result.findings = []
    return result.finalize()

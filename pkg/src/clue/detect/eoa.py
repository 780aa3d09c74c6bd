"""Addresses handed out by a failed contract creation that users kept funding."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable, Optional

from clue.detect.common import (
    CREATION_FAILURE,
    Finding,
    PipelineResult,
    guarded,
    outflows_after,
    parallel_map,
)
from clue.model import FAILED, AccountState, Address, Transaction
from clue.source import ChainSource
from clue.valuation import PriceTable, value_account


@dataclass(frozen=True)
class SensitiveEoa:
    address: Address
    state: AccountState


@dataclass(frozen=True)
class CreationFailureEvidence:
    creation_tx: str
    creator: Address
    error: Optional[str]
    block_number: int
    inbound_after_failure: int

    def to_json(self) -> dict:
        return {
            "kind": "failed_creation",
            "creation_tx": self.creation_tx,
            "creator": self.creator.hex,
            "error": self.error,
            "block_number": self.block_number,
            "inbound_after_failure": self.inbound_after_failure,
        }


def filter_sensitive_eoas(accounts: Iterable[AccountState]) -> list[SensitiveEoa]:
    """Accounts that never sent a transaction (nonce 0) and hold no code."""
    return [SensitiveEoa(a.address, a) for a in accounts if a.nonce == 0 and not a.code]


def check_creation_failure(source: ChainSource, eoa: SensitiveEoa) -> Optional[Transaction]:
    history = source.list_transactions(eoa.address)
    if not history:
        return None
    oldest = history[0]
    if oldest.is_creation and oldest.status == FAILED and oldest.created_contract == eoa.address:
        return oldest
    return None


def _inbound_after(source: ChainSource, address: Address, tx: Transaction) -> int:
    count = 0
    for later in source.list_transactions(address):
        if later.position <= tx.position or later.status == FAILED:
            continue
        if later.to == address and later.value > 0:
            count += 1
        elif source.has_trace(later.hash) and any(
            i.to == address and i.value > 0 and not i.reverted for i in source.get_trace(later.hash).internal_txs
        ):
            count += 1
    return count


def _assess(
    source: ChainSource, eoa: SensitiveEoa, prices: PriceTable
) -> tuple[Optional[Transaction], Optional[Finding], str, list[str]]:
    failed = check_creation_failure(source, eoa)
    if failed is None:
        reason = "no_history" if not source.list_transactions(eoa.address) else "not_failed_creation"
        return None, None, reason, []
    value = value_account(source, eoa.address, prices)
    if not value.holds_value:
        return failed, None, "zero_value", value.warnings
    # structurally impossible with nonce 0; kept as a consistency check
    if source.get_nonce(eoa.address) != 0 or outflows_after(source, eoa.address, failed.position):
        return failed, None, "outflow_after_lock", value.warnings
    evidence = CreationFailureEvidence(
        failed.hash, failed.sender, failed.error, failed.block_number, _inbound_after(source, eoa.address, failed)
    )
    finding = Finding(CREATION_FAILURE, eoa.address, evidence, value.eth, tuple(value.tokens), failed.block_number)
    return failed, finding, "finding", value.warnings


def run_eoa_pipeline(
    source: ChainSource,
    accounts: Iterable[AccountState],
    prices: PriceTable = PriceTable(Decimal(0)),
    parallelism: int = 1,
) -> PipelineResult:
    result = PipelineResult(CREATION_FAILURE)
    sensitive = filter_sensitive_eoas(accounts)
    result.counts["sensitive_eoas"] = len(sensitive)

    assess = guarded(lambda e: _assess(source, e, prices), lambda e: str(e.address), result.warnings)
    for eoa, outcome in zip(sensitive, parallel_map(assess, sensitive, parallelism)):
        if outcome is None:
            result.counts["errors"] = result.counts.get("errors", 0) + 1
            continue
        failed, finding, reason, warnings = outcome
        result.warnings.extend(warnings)
        if failed is not None:
            result.candidates.append(eoa.address)
        if reason == "no_history":
            result.counts["unexplained_sensitive"] = result.counts.get("unexplained_sensitive", 0) + 1
        if finding is not None:
            result.findings.append(finding)
        elif failed is not None:
            key = f"excluded_{reason}"
            result.counts[key] = result.counts.get(key, 0) + 1
    return result.finalize()

"""Destructed contracts that still hold, or later received, ETH or tokens."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable, Optional

from clue.detect.common import (
    DESTRUCTED,
    Finding,
    PipelineResult,
    guarded,
    outflows_after,
    parallel_map,
    prior_approvals,
)
from clue.model import FAILED, Address, iter_suicides
from clue.source import ChainSource, SourceError
from clue.valuation import PriceTable, value_account

log = logging.getLogger(__name__)

PRIOR_APPROVAL = "prior_approval_detected"


@dataclass(frozen=True)
class DestructionEvent:
    contract: Address
    destroying_tx: str
    block_number: int
    tx_index: int
    refund_to: Optional[Address]

    @property
    def position(self) -> tuple[int, int]:
        return (self.block_number, self.tx_index)

    def to_json(self) -> dict:
        return {
            "kind": "destruction",
            "destroying_tx": self.destroying_tx,
            "block_number": self.block_number,
            "refund_to": self.refund_to.hex if self.refund_to else None,
        }


def scan_traces_for_selfdestruct(
    source: ChainSource, tx_hashes: Iterable[str], warnings: Optional[list[str]] = None
) -> list[DestructionEvent]:
    """One event per suicide message found in the traces of ``tx_hashes``."""
    warnings = warnings if warnings is not None else []
    events: dict[tuple[Address, str], DestructionEvent] = {}
    for tx_hash in tx_hashes:
        try:
            tx = source.get_transaction(tx_hash)
            if tx is None:
                warnings.append(f"{tx_hash}: transaction unknown to source")
                continue
            if tx.status == FAILED:
                continue
            trace = source.get_trace(tx_hash)
        except SourceError as exc:
            warnings.append(f"{tx_hash}: trace unavailable: {exc}")
            continue
        if not any(step.opcode == "SELFDESTRUCT" for step in trace.steps):
            continue
        suicides = list(iter_suicides(trace))
        if not suicides:
            warnings.append(f"{tx_hash}: SELFDESTRUCT executed but no suicide internal transaction")
        for itx in suicides:
            events.setdefault(
                (itx.sender, tx_hash),
                DestructionEvent(itx.sender, tx_hash, tx.block_number, tx.index, itx.to),
            )
    return sorted(events.values(), key=lambda e: (e.position, e.contract))


def _assess(source: ChainSource, event: DestructionEvent, prices: PriceTable) -> tuple[Optional[Finding], str, list[str]]:
    contract = event.contract
    if source.get_code(contract):
        return None, "redeployed", []
    value = value_account(source, contract, prices)
    if not value.holds_value:
        return None, "zero_value", value.warnings
    moved = outflows_after(source, contract, event.position)
    if moved:
        log.debug("%s excluded: %s", contract, moved[0])
        return None, "outflow_after_lock", value.warnings
    annotations = (PRIOR_APPROVAL,) if prior_approvals(source, contract, event.position) else ()
    finding = Finding(
        DESTRUCTED, contract, event, value.eth, tuple(value.tokens), event.block_number, annotations
    )
    return finding, "finding", value.warnings


def confirm_locked_destructed(
    source: ChainSource, event: DestructionEvent, prices: PriceTable = PriceTable(Decimal(0))
) -> Optional[Finding]:
    """A finding iff the address has no code now, holds value, and nothing left it after destruction."""
    return _assess(source, event, prices)[0]


def run_destructed_pipeline(
    source: ChainSource,
    tx_hashes: Optional[Iterable[str]] = None,
    prices: PriceTable = PriceTable(Decimal(0)),
    parallelism: int = 1,
) -> PipelineResult:
    result = PipelineResult(DESTRUCTED)
    if tx_hashes is None:
        tx_hashes = source.list_traced_transactions()
    tx_hashes = list(tx_hashes)
    events = scan_traces_for_selfdestruct(source, tx_hashes, result.warnings)
    # the latest destruction of an address is its lock event
    latest: dict[Address, DestructionEvent] = {}
    for ev in events:
        latest[ev.contract] = ev
    result.candidates = list(latest)
    result.counts["transactions_scanned"] = len(tx_hashes)
    result.counts["destruction_events"] = len(events)

    assess = guarded(
        lambda ev: _assess(source, ev, prices), lambda ev: f"{ev.contract}", result.warnings
    )
    for outcome in parallel_map(assess, [latest[a] for a in sorted(latest)], parallelism):
        if outcome is None:
            result.counts["errors"] = result.counts.get("errors", 0) + 1
            continue
        finding, reason, warnings = outcome
        result.warnings.extend(warnings)
        if finding is not None:
            result.findings.append(finding)
        else:
            key = f"excluded_{reason}"
            result.counts[key] = result.counts.get(key, 0) + 1
    return result.finalize()

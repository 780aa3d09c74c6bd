"""Finding type and the filters every detector shares."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional, Sequence, TypeVar

from clue.model import APPROVAL, FAILED, TRANSFER, Address, wei_to_eth
from clue.source import ChainSource, SourceError
from clue.valuation import EXACT, PriceTable, TokenBalance, finding_usd, priced_token_usd, usd

DESTRUCTED = "destructed"
ATTACKED_PARITY = "attacked_parity"
CREATION_FAILURE = "creation_failure"

# sorts after every transaction index inside a block
END_OF_BLOCK = 1 << 62

T = TypeVar("T")
R = TypeVar("R")


@dataclass(frozen=True)
class Finding:
    category: str
    account: Address
    evidence: Any
    eth_locked: int
    cbc_locked: tuple[TokenBalance, ...]
    first_lock_block: int
    annotations: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.eth_locked <= 0 and not self.cbc_locked:
            raise ValueError(f"finding for {self.account} holds no value")

    def to_json(self, prices: PriceTable) -> dict:
        eth, cbc = finding_usd(self, prices)
        tokens = []
        for t in self.cbc_locked:
            entry = t.to_json()
            entry["usd"] = usd(priced_token_usd(t, prices))
            tokens.append(entry)
        return {
            "category": self.category,
            "account": self.account.hex,
            "eth_locked_wei": str(self.eth_locked),
            "eth_locked": str(wei_to_eth(self.eth_locked).normalize()) if self.eth_locked else "0",
            "eth_usd": usd(eth),
            "cbc_locked": tokens,
            "cbc_usd": usd(cbc),
            "total_usd": usd(EXACT.add(eth, cbc)),
            "first_lock_block": self.first_lock_block,
            "evidence": self.evidence.to_json(),
            "annotations": list(self.annotations),
        }


@dataclass
class PipelineResult:
    category: str
    candidates: list[Address] = field(default_factory=list)
    findings: list[Finding] = field(default_factory=list)
    counts: dict[str, int] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    extra: dict[str, Any] = field(default_factory=dict)

    def diagnostics(self) -> dict:
        out = {
            "candidates": len(self.candidates),
            "findings": len(self.findings),
            **dict(sorted(self.counts.items())),
            "warnings": sorted(set(self.warnings)),
        }
        out.update(self.extra)
        return out

    def finalize(self) -> PipelineResult:
        self.candidates = sorted(set(self.candidates))
        self.findings = sorted(self.findings, key=lambda f: f.account)
        return self


def outflows_after(source: ChainSource, account: Address, position: tuple[int, int]) -> list[str]:
    """Value that left ``account`` strictly after ``position`` = (block, tx index)."""
    moved = []
    for tx in source.list_transactions(account):
        if tx.position <= position or tx.status == FAILED:
            continue
        if tx.sender == account and tx.value > 0:
            moved.append(f"tx {tx.hash} sent {tx.value} wei")
        if source.has_trace(tx.hash):
            for itx in source.get_trace(tx.hash).internal_txs:
                if itx.sender == account and itx.value > 0 and not itx.reverted:
                    moved.append(f"internal {itx.type} in {tx.hash} sent {itx.value} wei")
    for ev in source.list_token_events(account):
        if ev.kind == TRANSFER and ev.sender == account and ev.amount > 0:
            if (ev.block_number, ev.tx_index) > position:
                moved.append(f"token {ev.token} transfer of {ev.amount} at block {ev.block_number}")
    return moved


def prior_approvals(source: ChainSource, account: Address, position: tuple[int, int]) -> bool:
    return any(
        ev.kind == APPROVAL and ev.sender == account and ev.amount > 0 and (ev.block_number, ev.tx_index) <= position
        for ev in source.list_token_events(account)
    )


def parallel_map(fn: Callable[[T], R], items: Sequence[T], parallelism: int = 1) -> list[R]:
    """Order-preserving map; results never depend on worker scheduling."""
    if parallelism <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(fn, items))


def guarded(fn: Callable[[T], Optional[R]], label: Callable[[T], str], warnings: list[str]) -> Callable[[T], Optional[R]]:
    """Wrap a per-item step so a source failure becomes a warning instead of aborting the pipeline."""

    def run(item: T) -> Optional[R]:
        try:
            return fn(item)
        except SourceError as exc:
            warnings.append(f"{label(item)}: {exc}")
            return None

    return run


def dedupe(items: Iterable[T]) -> list[T]:
    seen: dict = {}
    for x in items:
        seen.setdefault(x, None)
    return list(seen)

"""Core chain types shared by every detector: addresses, accounts, transactions, traces."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Any, Iterable, Iterator, Optional

WEI_PER_ETH = 10**18

_ADDRESS_RE = re.compile(r"^0x[0-9a-fA-F]{40}$")
_HASH_RE = re.compile(r"^0x[0-9a-fA-F]{64}$")

SUCCESS = "success"
FAILED = "failed"

SUICIDE = "suicide"
TRANSFER = "transfer"
APPROVAL = "approval"


class ParseError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Address:
    """A 20-byte account address. ``str()`` gives the lowercase 0x form."""

    raw: bytes

    def __post_init__(self) -> None:
        if not isinstance(self.raw, bytes) or len(self.raw) != 20:
            raise ParseError(f"address must be exactly 20 bytes, got {self.raw!r}")

    @classmethod
    def from_int(cls, value: int) -> Address:
        return cls((value % (1 << 160)).to_bytes(20, "big"))

    def to_int(self) -> int:
        return int.from_bytes(self.raw, "big")

    @property
    def hex(self) -> str:
        return "0x" + self.raw.hex()

    def __str__(self) -> str:
        return self.hex

    def __repr__(self) -> str:
        return f"Address({self.hex})"


ZERO_ADDRESS = Address(bytes(20))


def parse_address(text: str) -> Address:
    if isinstance(text, Address):
        return text
    if not isinstance(text, str) or not _ADDRESS_RE.match(text):
        raise ParseError(f"malformed address: {text!r}")
    return Address(bytes.fromhex(text[2:]))


def parse_hash(text: str) -> str:
    """Normalize a 32-byte transaction hash to lowercase 0x hex."""
    if not isinstance(text, str) or not _HASH_RE.match(text):
        raise ParseError(f"malformed transaction hash: {text!r}")
    return text.lower()


def wei_to_eth(amount: int) -> Decimal:
    # scaleb only moves the exponent, so the result is exact at any magnitude
    return Decimal(int(amount)).scaleb(-18)


@dataclass(frozen=True)
class AccountState:
    address: Address
    nonce: int = 0
    balance: int = 0
    code: bytes = b""

    def __post_init__(self) -> None:
        if self.nonce < 0 or self.balance < 0:
            raise ParseError(f"negative nonce/balance for {self.address}")

    @property
    def has_code(self) -> bool:
        return len(self.code) > 0


@dataclass(frozen=True)
class Transaction:
    hash: str
    sender: Address
    to: Optional[Address]
    value: int
    block_number: int
    index: int = 0
    status: str = SUCCESS
    error: Optional[str] = None
    created_contract: Optional[Address] = None
    # fixture-only: whether traces/<hash>.json exists for this transaction
    traced: bool = False

    def __post_init__(self) -> None:
        if self.to is None and self.created_contract is None:
            raise ParseError(f"creation transaction {self.hash} has no created_contract")
        if self.to is not None and self.created_contract is not None:
            raise ParseError(f"transaction {self.hash} has both a recipient and a created_contract")
        if self.status not in (SUCCESS, FAILED):
            raise ParseError(f"unknown status {self.status!r} in {self.hash}")
        if self.status == FAILED and not self.error:
            raise ParseError(f"failed transaction {self.hash} carries no error")

    @property
    def is_creation(self) -> bool:
        return self.to is None

    @property
    def position(self) -> tuple[int, int]:
        return (self.block_number, self.index)

    def touches(self, address: Address) -> bool:
        return address in (self.sender, self.to, self.created_contract)


@dataclass(frozen=True)
class InternalTransaction:
    parent_hash: str
    type: str
    sender: Address
    to: Optional[Address]
    value: int
    # depth of the frame whose code issued this message (external frame = 1)
    depth: int = 1
    reverted: bool = False


@dataclass(frozen=True)
class TraceStep:
    pc: Optional[int]
    opcode: str
    depth: int


@dataclass(frozen=True)
class TraceRecord:
    tx_hash: str
    steps: tuple[TraceStep, ...] = ()
    internal_txs: tuple[InternalTransaction, ...] = ()

    def alignment_errors(self) -> list[str]:
        """Suicide messages that have no SELFDESTRUCT step at the same depth."""
        available: dict[int, int] = {}
        for step in self.steps:
            if step.opcode == "SELFDESTRUCT":
                available[step.depth] = available.get(step.depth, 0) + 1
        errors = []
        for itx in self.internal_txs:
            if itx.type != SUICIDE:
                continue
            if available.get(itx.depth, 0) == 0:
                errors.append(
                    f"trace {self.tx_hash}: suicide from {itx.sender} at depth {itx.depth} "
                    "has no matching SELFDESTRUCT step"
                )
            else:
                available[itx.depth] -= 1
        return errors


@dataclass(frozen=True)
class TokenEvent:
    token: Address
    kind: str
    sender: Address
    to_or_spender: Address
    amount: int
    block_number: int = 0
    tx_index: int = 0
    log_index: int = 0

    def __post_init__(self) -> None:
        if self.amount < 0:
            raise ParseError("token amount must be non-negative")
        if self.kind not in (TRANSFER, APPROVAL):
            raise ParseError(f"unknown token event kind {self.kind!r}")

    @property
    def position(self) -> tuple[int, int, int]:
        return (self.block_number, self.tx_index, self.log_index)


@dataclass(frozen=True)
class TokenInfo:
    address: Address
    symbol: str
    decimals: int
    # optional explicit balanceOf results; when absent balances come from event replay
    balances: Optional[dict[Address, int]] = field(default=None, hash=False, compare=False)


# --- call-tracer flattening -------------------------------------------------

_TYPE_ALIASES = {"selfdestruct": SUICIDE, "suicide": SUICIDE}


def normalize_frame_type(kind: str) -> str:
    lowered = kind.lower()
    return _TYPE_ALIASES.get(lowered, lowered)


def _quantity(value: Any) -> int:
    if value is None:
        return 0
    if isinstance(value, int):
        return value
    if isinstance(value, str) and value.startswith(("0x", "0X")):
        return int(value, 16) if len(value) > 2 else 0
    return int(value)


def flatten_call_tree(tx_hash: str, root: dict) -> list[InternalTransaction]:
    """Depth-first flattening of a call-tracer frame tree.

    The root frame is the external transaction itself and is not emitted.
    A frame failing with ``error`` marks itself and all descendants reverted.
    """
    out: list[InternalTransaction] = []

    def walk(frame: dict, depth: int, reverted: bool) -> None:
        for child in frame.get("calls") or ():
            child_reverted = reverted or bool(child.get("error"))
            to = child.get("to")
            out.append(
                InternalTransaction(
                    parent_hash=tx_hash,
                    type=normalize_frame_type(child.get("type", "call")),
                    sender=parse_address(child["from"]),
                    to=parse_address(to) if to else None,
                    value=_quantity(child.get("value")),
                    depth=depth,
                    reverted=child_reverted,
                )
            )
            walk(child, depth + 1, child_reverted)

    walk(root, 1, bool(root.get("error")))
    return out


def steps_from_call_tree(root: dict) -> list[TraceStep]:
    """Synthesize opcode steps from a call tree when no struct log is available.

    Call tracers do not report program counters, so ``pc`` is left unknown.
    """
    steps: list[TraceStep] = []

    def walk(frame: dict, depth: int) -> None:
        for child in frame.get("calls") or ():
            kind = child.get("type", "CALL").upper()
            steps.append(TraceStep(None, "SELFDESTRUCT" if kind in ("SELFDESTRUCT", "SUICIDE") else kind, depth))
            walk(child, depth + 1)

    walk(root, 1)
    return steps


# --- JSON codecs --------------------------------------------------------------
# Integers travel as decimal strings so no consumer truncates them to 53 bits.


def _int(value: Any) -> int:
    if isinstance(value, bool):
        raise ParseError(f"expected integer, got {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, str):
        try:
            return _quantity(value)
        except ValueError:
            pass
    raise ParseError(f"expected integer string, got {value!r}")


def _opt_address(value: Any) -> Optional[Address]:
    return None if value in (None, "") else parse_address(value)


def _hexbytes(text: str) -> bytes:
    if not isinstance(text, str):
        raise ParseError(f"expected hex string, got {text!r}")
    body = text[2:] if text.startswith(("0x", "0X")) else text
    try:
        return bytes.fromhex(body)
    except ValueError as exc:
        raise ParseError(f"malformed hex: {text[:24]!r}") from exc


def account_from_json(obj: dict) -> AccountState:
    return AccountState(
        address=parse_address(obj["address"]),
        nonce=_int(obj.get("nonce", "0")),
        balance=_int(obj.get("balance", "0")),
        code=_hexbytes(obj.get("code", "0x")),
    )


def account_to_json(acct: AccountState) -> dict:
    return {
        "address": acct.address.hex,
        "nonce": str(acct.nonce),
        "balance": str(acct.balance),
        "code": "0x" + acct.code.hex(),
    }


def transaction_from_json(obj: dict) -> Transaction:
    return Transaction(
        hash=parse_hash(obj["hash"]),
        sender=parse_address(obj["from"]),
        to=_opt_address(obj.get("to")),
        value=_int(obj.get("value", "0")),
        block_number=_int(obj["block_number"]),
        index=_int(obj.get("index", "0")),
        status=obj.get("status", SUCCESS),
        error=obj.get("error"),
        created_contract=_opt_address(obj.get("created_contract")),
        traced=bool(obj.get("traced", False)),
    )


def transaction_to_json(tx: Transaction) -> dict:
    return {
        "hash": tx.hash,
        "from": tx.sender.hex,
        "to": tx.to.hex if tx.to else None,
        "value": str(tx.value),
        "block_number": str(tx.block_number),
        "index": str(tx.index),
        "status": tx.status,
        "error": tx.error,
        "created_contract": tx.created_contract.hex if tx.created_contract else None,
        "traced": tx.traced,
    }


def trace_from_json(obj: dict) -> TraceRecord:
    tx_hash = parse_hash(obj["tx_hash"])
    steps = tuple(
        TraceStep(None if s.get("pc") is None else _int(s["pc"]), s["op"].upper(), _int(s["depth"]))
        for s in obj.get("steps", ())
    )
    internal = tuple(flatten_call_tree(tx_hash, obj["calls"])) if obj.get("calls") else ()
    return TraceRecord(tx_hash, steps, internal)


def token_event_from_json(obj: dict) -> TokenEvent:
    return TokenEvent(
        token=parse_address(obj["token"]),
        kind=obj["kind"],
        sender=parse_address(obj["from"]),
        to_or_spender=parse_address(obj["to"]),
        amount=_int(obj["amount"]),
        block_number=_int(obj.get("block_number", "0")),
        tx_index=_int(obj.get("tx_index", "0")),
        log_index=_int(obj.get("log_index", "0")),
    )


def token_event_to_json(ev: TokenEvent) -> dict:
    return {
        "token": ev.token.hex,
        "kind": ev.kind,
        "from": ev.sender.hex,
        "to": ev.to_or_spender.hex,
        "amount": str(ev.amount),
        "block_number": str(ev.block_number),
        "tx_index": str(ev.tx_index),
        "log_index": str(ev.log_index),
    }


def token_info_from_json(obj: dict) -> TokenInfo:
    balances = obj.get("balances")
    return TokenInfo(
        address=parse_address(obj["address"]),
        symbol=str(obj.get("symbol", "")),
        decimals=_int(obj.get("decimals", "18")),
        balances=None
        if balances is None
        else {parse_address(k): _int(v) for k, v in balances.items()},
    )


def token_info_to_json(info: TokenInfo) -> dict:
    out: dict[str, Any] = {"address": info.address.hex, "symbol": info.symbol, "decimals": str(info.decimals)}
    if info.balances is not None:
        out["balances"] = {k.hex: str(v) for k, v in sorted(info.balances.items())}
    return out


def replay_token_balance(events: Iterable[TokenEvent], token: Address, holder: Address) -> int:
    """Sum of inbound minus outbound transfers of ``token`` for ``holder``."""
    total = 0
    for ev in events:
        if ev.kind != TRANSFER or ev.token != token:
            continue
        if ev.to_or_spender == holder:
            total += ev.amount
        if ev.sender == holder:
            total -= ev.amount
    return total


def iter_suicides(trace: TraceRecord) -> Iterator[InternalTransaction]:
    return (itx for itx in trace.internal_txs if itx.type == SUICIDE and not itx.reverted)

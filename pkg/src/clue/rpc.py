"""Live JSON-RPC backend. Read-only: it only issues getters, eth_call and traces."""

from __future__ import annotations

import itertools
import logging
import threading
import time
from dataclasses import dataclass
from typing import Any, Iterable, Optional

import httpx

from clue.model import (
    FAILED,
    SUCCESS,
    TRANSFER,
    APPROVAL,
    AccountState,
    Address,
    TokenEvent,
    TraceRecord,
    Transaction,
    flatten_call_tree,
    parse_address,
    parse_hash,
    steps_from_call_tree,
)
from clue.source import CapabilityUnavailable, ChainSource, SourceError

log = logging.getLogger(__name__)

BALANCE_OF_SELECTOR = bytes.fromhex("70a08231")
# keccak256 of the ERC20 event signatures
TRANSFER_TOPIC = "0xddf252ad1be2c89b69c2b068fc378daa952ba7f163c4a11628f55a4df523b3ef"
APPROVAL_TOPIC = "0x8c5be1e5ebec7d5bd14f71427d1e84f3dd0314c0f7b2291e5b200ac8c7c3b925"


def encode_balance_of(holder: Address) -> str:
    return "0x" + (BALANCE_OF_SELECTOR + bytes(12) + holder.raw).hex()


def decode_uint256(data: str) -> int:
    body = data[2:] if data.startswith("0x") else data
    if not body:
        return 0
    if len(body) < 64:
        raise SourceError(f"eth_call returned {len(body) // 2} bytes, expected a 32-byte word")
    return int(body[:64], 16)


def to_quantity(n: int) -> str:
    return hex(n)


def from_quantity(q: Optional[str]) -> int:
    if q is None:
        return 0
    return int(q, 16) if isinstance(q, str) else int(q)


def _topic_address(addr: Address) -> str:
    return "0x" + (bytes(12) + addr.raw).hex()


@dataclass(frozen=True)
class RpcOptions:
    timeout: float = 30.0
    retry_count: int = 2
    # max requests per second; 0 disables limiting
    rate_limit: float = 0.0


class _RateLimiter:
    def __init__(self, per_second: float):
        self._interval = 1.0 / per_second if per_second > 0 else 0.0
        self._lock = threading.Lock()
        self._next = 0.0

    def wait(self) -> None:
        if not self._interval:
            return
        with self._lock:
            now = time.monotonic()
            delay = self._next - now
            self._next = max(now, self._next) + self._interval
        if delay > 0:
            time.sleep(delay)


class RpcSource(ChainSource):
    """Maps the source capabilities onto standard Ethereum JSON-RPC methods.

    Vanilla RPC cannot list transactions by address, so ``tx_hashes`` is the
    caller-supplied universe of transactions this source knows about.
    """

    def __init__(
        self,
        endpoint_url: str,
        options: RpcOptions = RpcOptions(),
        tx_hashes: Iterable[str] = (),
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.url = endpoint_url
        self.options = options
        self._client = httpx.Client(timeout=options.timeout, transport=transport)
        self._limiter = _RateLimiter(options.rate_limit)
        self._ids = itertools.count(1)
        self._cache: dict[tuple, Any] = {}
        self._cache_lock = threading.Lock()
        self._tx_hashes = [parse_hash(h) for h in tx_hashes]

    def close(self) -> None:
        self._client.close()

    # --- transport ----------------------------------------------------------

    def request(self, method: str, params: list) -> Any:
        payload = {"jsonrpc": "2.0", "id": next(self._ids), "method": method, "params": params}
        last_exc: Optional[Exception] = None
        for attempt in range(self.options.retry_count + 1):
            self._limiter.wait()
            try:
                resp = self._client.post(self.url, json=payload)
                resp.raise_for_status()
                body = resp.json()
            except (httpx.HTTPError, ValueError) as exc:
                last_exc = exc
                log.debug("%s attempt %d failed: %s", method, attempt + 1, exc)
                continue
            if "error" in body and body["error"] is not None:
                err = body["error"]
                msg = err.get("message", "") if isinstance(err, dict) else str(err)
                if isinstance(err, dict) and err.get("code") == -32601:
                    raise CapabilityUnavailable(f"{method}: capability unavailable on this backend ({msg})")
                raise SourceError(f"{method}: remote error: {msg}")
            return body.get("result")
        raise SourceError(f"{method}: transport failure after {self.options.retry_count + 1} attempts: {last_exc}")

    def _memo(self, key: tuple, compute) -> Any:
        with self._cache_lock:
            if key in self._cache:
                return self._cache[key]
        value = compute()
        with self._cache_lock:
            self._cache.setdefault(key, value)
        return value

    # --- capabilities -------------------------------------------------------

    def get_balance(self, address: Address) -> int:
        return self._memo(("balance", address), lambda: from_quantity(self.request("eth_getBalance", [address.hex, "latest"])))

    def get_nonce(self, address: Address) -> int:
        return self._memo(
            ("nonce", address), lambda: from_quantity(self.request("eth_getTransactionCount", [address.hex, "latest"]))
        )

    def get_code(self, address: Address) -> bytes:
        def fetch() -> bytes:
            code = self.request("eth_getCode", [address.hex, "latest"]) or "0x"
            return bytes.fromhex(code[2:])

        return self._memo(("code", address), fetch)

    def get_account_state(self, address: Address) -> AccountState:
        return AccountState(address, self.get_nonce(address), self.get_balance(address), self.get_code(address))

    def get_transaction(self, tx_hash: str) -> Optional[Transaction]:
        return self._memo(("tx", tx_hash), lambda: self._fetch_transaction(tx_hash))

    def _fetch_transaction(self, tx_hash: str) -> Optional[Transaction]:
        tx = self.request("eth_getTransactionByHash", [tx_hash])
        if tx is None:
            return None
        receipt = self.request("eth_getTransactionReceipt", [tx_hash]) or {}
        ok = from_quantity(receipt.get("status", "0x1")) == 1
        to = tx.get("to")
        created = receipt.get("contractAddress")
        return Transaction(
            hash=parse_hash(tx_hash),
            sender=parse_address(tx["from"]),
            to=parse_address(to) if to else None,
            value=from_quantity(tx.get("value")),
            block_number=from_quantity(tx.get("blockNumber")),
            index=from_quantity(tx.get("transactionIndex")),
            status=SUCCESS if ok else FAILED,
            error=None if ok else receipt.get("error") or "execution failed",
            created_contract=parse_address(created) if created else None,
            traced=True,
        )

    def list_transactions(self, address: Address) -> list[Transaction]:
        found = []
        for h in self._tx_hashes:
            tx = self.get_transaction(h)
            if tx is None:
                continue
            touched = tx.touches(address)
            if not touched:
                try:
                    touched = any(address in (i.sender, i.to) for i in self.get_trace(h).internal_txs)
                except CapabilityUnavailable:
                    touched = False
            if touched:
                found.append(tx)
        return sorted(found, key=lambda t: (t.position, t.hash))

    def get_trace(self, tx_hash: str) -> TraceRecord:
        def fetch() -> TraceRecord:
            tree = self.request("debug_traceTransaction", [tx_hash, {"tracer": "callTracer"}])
            if not tree:
                raise SourceError(f"debug_traceTransaction: empty trace for {tx_hash}")
            return TraceRecord(tx_hash, tuple(steps_from_call_tree(tree)), tuple(flatten_call_tree(tx_hash, tree)))

        return self._memo(("trace", tx_hash), fetch)

    def list_traced_transactions(self) -> list[str]:
        return list(self._tx_hashes)

    def list_token_events(self, address: Address) -> list[TokenEvent]:
        def fetch() -> list[TokenEvent]:
            topic = _topic_address(address)
            logs = []
            for filt in ([TRANSFER_TOPIC, topic], [TRANSFER_TOPIC, None, topic], [APPROVAL_TOPIC, topic]):
                logs.extend(self.request("eth_getLogs", [{"fromBlock": "0x0", "toBlock": "latest", "topics": filt}]) or [])
            events = {}
            for entry in logs:
                ev = _decode_log(entry)
                if ev is not None:
                    key = (entry.get("transactionHash"), entry.get("logIndex"))
                    events[key] = ev
            return sorted(events.values(), key=lambda e: e.position)

        return self._memo(("events", address), fetch)

    def call_balance_of(self, token: Address, holder: Address) -> int:
        def fetch() -> int:
            result = self.request("eth_call", [{"to": token.hex, "data": encode_balance_of(holder)}, "latest"])
            return decode_uint256(result or "0x")

        return self._memo(("balanceOf", token, holder), fetch)


def _decode_log(entry: dict) -> Optional[TokenEvent]:
    topics = entry.get("topics") or []
    if len(topics) < 3:
        return None
    kind = {TRANSFER_TOPIC: TRANSFER, APPROVAL_TOPIC: APPROVAL}.get(topics[0].lower())
    if kind is None:
        return None
    return TokenEvent(
        token=parse_address(entry["address"]),
        kind=kind,
        sender=Address.from_int(int(topics[1], 16)),
        to_or_spender=Address.from_int(int(topics[2], 16)),
        amount=decode_uint256(entry.get("data") or "0x"),
        block_number=from_quantity(entry.get("blockNumber")),
        tx_index=from_quantity(entry.get("transactionIndex")),
        log_index=from_quantity(entry.get("logIndex")),
    )


def open_rpc_source(endpoint_url: str, options: RpcOptions = RpcOptions(), tx_hashes: Iterable[str] = (), transport=None) -> RpcSource:
    return RpcSource(endpoint_url, options, tx_hashes, transport)

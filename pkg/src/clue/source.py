"""Read interface over chain data, and the deterministic fixture-directory backend."""

from __future__ import annotations

import abc
import json
from bisect import insort
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterator, Optional

from clue.model import (
    AccountState,
    Address,
    ParseError,
    TokenEvent,
    TokenInfo,
    TraceRecord,
    Transaction,
    account_from_json,
    account_to_json,
    replay_token_balance,
    token_event_from_json,
    token_event_to_json,
    token_info_from_json,
    token_info_to_json,
    trace_from_json,
    transaction_from_json,
    transaction_to_json,
)


class SourceError(RuntimeError):
    """A chain query failed; infrastructure-level, not a detection result."""


class CapabilityUnavailable(SourceError):
    pass


class FixtureLoadError(SourceError):
    pass


class FixtureValidationError(SourceError):
    def __init__(self, message: str, problems: list[str]):
        super().__init__(message + ": " + "; ".join(problems))
        self.problems = problems


class ChainSource(abc.ABC):
    """Capabilities every detector relies on.

    ``list_transactions`` returns every known transaction referencing the
    address in any role, ascending by (block, index); the first element is
    the oldest transaction.
    """

    @abc.abstractmethod
    def get_account_state(self, address: Address) -> AccountState: ...

    def get_code(self, address: Address) -> bytes:
        return self.get_account_state(address).code

    def get_balance(self, address: Address) -> int:
        return self.get_account_state(address).balance

    def get_nonce(self, address: Address) -> int:
        return self.get_account_state(address).nonce

    @abc.abstractmethod
    def get_transaction(self, tx_hash: str) -> Optional[Transaction]: ...

    @abc.abstractmethod
    def list_transactions(self, address: Address) -> list[Transaction]: ...

    @abc.abstractmethod
    def get_trace(self, tx_hash: str) -> TraceRecord: ...

    def has_trace(self, tx_hash: str) -> bool:
        return True

    @abc.abstractmethod
    def list_token_events(self, address: Address) -> list[TokenEvent]: ...

    @abc.abstractmethod
    def call_balance_of(self, token: Address, holder: Address) -> int: ...

    def get_token_info(self, token: Address) -> Optional[TokenInfo]:
        return None

    def list_all_accounts(self) -> Iterator[AccountState]:
        raise CapabilityUnavailable("list_all_accounts: capability unavailable on this backend")

    def list_traced_transactions(self) -> list[str]:
        raise CapabilityUnavailable("list_traced_transactions: capability unavailable on this backend")


@dataclass
class FixtureData:
    """In-memory form of a fixture directory; mutable so tests can inject changes."""

    accounts: list[AccountState] = field(default_factory=list)
    transactions: list[Transaction] = field(default_factory=list)
    traces: dict[str, dict] = field(default_factory=dict)
    token_events: list[TokenEvent] = field(default_factory=list)
    tokens: list[TokenInfo] = field(default_factory=list)

    def write(self, directory: Path) -> None:
        directory = Path(directory)
        (directory / "traces").mkdir(parents=True, exist_ok=True)
        accounts = sorted(self.accounts, key=lambda a: a.address)
        txs = sorted(self.transactions, key=lambda t: (t.position, t.hash))
        events = sorted(self.token_events, key=lambda e: (e.position, e.token, e.sender))
        _dump(directory / "accounts.json", [account_to_json(a) for a in accounts])
        _dump(directory / "transactions.json", [transaction_to_json(t) for t in txs])
        _dump(directory / "token_events.json", [token_event_to_json(e) for e in events])
        _dump(directory / "tokens.json", [token_info_to_json(t) for t in sorted(self.tokens, key=lambda t: t.address)])
        for tx_hash, trace in sorted(self.traces.items()):
            _dump(directory / "traces" / f"{tx_hash}.json", trace)

    def set_account(self, state: AccountState) -> None:
        self.accounts = [a for a in self.accounts if a.address != state.address]
        self.accounts.append(state)

    def account(self, address: Address) -> AccountState:
        for a in self.accounts:
            if a.address == address:
                return a
        return AccountState(address)


def _dump(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _load_json(path: Path) -> Any:
    try:
        return json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise FixtureLoadError(f"{path.name}: file missing in {path.parent}") from exc
    except json.JSONDecodeError as exc:
        raise FixtureLoadError(f"{path.name}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc


def _load_array(path: Path, decode: Callable[[dict], Any], required: bool = True) -> list:
    if not path.exists() and not required:
        return []
    raw = _load_json(path)
    if not isinstance(raw, list):
        raise FixtureLoadError(f"{path.name}: expected a JSON array at $")
    out = []
    for i, item in enumerate(raw):
        try:
            out.append(decode(item))
        except (ParseError, KeyError, TypeError, ValueError, AttributeError) as exc:
            raise FixtureLoadError(f"{path.name}: $[{i}]: {exc!r}") from exc
    return out


def read_fixture(directory: Path | str) -> FixtureData:
    directory = Path(directory)
    if not directory.is_dir():
        raise FixtureLoadError(f"fixture directory not found: {directory}")
    data = FixtureData(
        accounts=_load_array(directory / "accounts.json", account_from_json),
        transactions=_load_array(directory / "transactions.json", transaction_from_json),
        token_events=_load_array(directory / "token_events.json", token_event_from_json, required=False),
        tokens=_load_array(directory / "tokens.json", token_info_from_json, required=False),
    )
    trace_dir = directory / "traces"
    if trace_dir.is_dir():
        for path in sorted(trace_dir.glob("*.json")):
            data.traces[path.stem.lower()] = _load_json(path)
    return data


class FixtureSource(ChainSource):
    """Fully in-memory source; every query is a lookup, so results are deterministic."""

    def __init__(self, data: FixtureData):
        dangling = sorted(t.hash for t in data.transactions if t.traced and t.hash not in data.traces)
        if dangling:
            raise FixtureValidationError("traced transactions without trace file", dangling)

        self._accounts = {a.address: a for a in data.accounts}
        self._txs = sorted(data.transactions, key=lambda t: (t.position, t.hash))
        self._by_hash = {t.hash: t for t in self._txs}

        self._traces: dict[str, TraceRecord] = {}
        for tx_hash, raw in data.traces.items():
            try:
                self._traces[tx_hash] = trace_from_json(raw)
            except (ParseError, KeyError, TypeError, ValueError) as exc:
                raise FixtureLoadError(f"traces/{tx_hash}.json: $: {exc!r}") from exc

        self._by_address: dict[Address, list[tuple[tuple[int, int], str]]] = {}
        for tx in self._txs:
            touched = {tx.sender, tx.to, tx.created_contract}
            trace = self._traces.get(tx.hash)
            if trace is not None:
                for itx in trace.internal_txs:
                    touched.update((itx.sender, itx.to))
            touched.discard(None)
            for addr in touched:
                insort(self._by_address.setdefault(addr, []), (tx.position, tx.hash))

        self._events: dict[Address, list[TokenEvent]] = {}
        for ev in sorted(data.token_events, key=lambda e: e.position):
            self._events.setdefault(ev.sender, []).append(ev)
            if ev.to_or_spender != ev.sender:
                self._events.setdefault(ev.to_or_spender, []).append(ev)
        self._tokens = {t.address: t for t in data.tokens}

    def get_account_state(self, address: Address) -> AccountState:
        # absent from state ⇔ the all-zero account
        return self._accounts.get(address) or AccountState(address)

    def get_transaction(self, tx_hash: str) -> Optional[Transaction]:
        return self._by_hash.get(tx_hash)

    def list_transactions(self, address: Address) -> list[Transaction]:
        return [self._by_hash[h] for _, h in self._by_address.get(address, ())]

    def get_trace(self, tx_hash: str) -> TraceRecord:
        try:
            return self._traces[tx_hash]
        except KeyError:
            raise SourceError(f"no trace recorded for {tx_hash}") from None

    def has_trace(self, tx_hash: str) -> bool:
        return tx_hash in self._traces

    def list_token_events(self, address: Address) -> list[TokenEvent]:
        return list(self._events.get(address, ()))

    def call_balance_of(self, token: Address, holder: Address) -> int:
        info = self._tokens.get(token)
        if info is not None and info.balances is not None:
            return info.balances.get(holder, 0)
        return replay_token_balance(self._events.get(holder, ()), token, holder)

    def get_token_info(self, token: Address) -> Optional[TokenInfo]:
        return self._tokens.get(token)

    def list_tokens(self) -> list[TokenInfo]:
        return [self._tokens[k] for k in sorted(self._tokens)]

    def list_all_accounts(self) -> Iterator[AccountState]:
        for addr in sorted(self._accounts):
            yield self._accounts[addr]

    def list_traced_transactions(self) -> list[str]:
        return [t.hash for t in self._txs if t.hash in self._traces]


def open_fixture_source(directory: Path | str) -> FixtureSource:
    return FixtureSource(read_fixture(directory))

"""Deterministic synthetic chains for every detector scenario.

Addresses follow a counter scheme rather than keccak derivation::

    0xc10e | seed (4 bytes) | counter (14 bytes)

so a (kind, seed) pair always yields byte-identical fixture directories.
Bytecodes are assembled from instruction templates; no compiler involved.
"""

from __future__ import annotations

import hashlib
import json
import random
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Any, Optional

from clue.detect.common import ATTACKED_PARITY, CREATION_FAILURE, DESTRUCTED
from clue.detect.parity import PARITY_KILL_BLOCK, PARITY_LIBRARY
from clue.disasm import assemble
from clue.model import (
    FAILED,
    SUCCESS,
    TRANSFER,
    APPROVAL,
    WEI_PER_ETH,
    AccountState,
    Address,
    ParseError,
    TokenEvent,
    TokenInfo,
    Transaction,
    parse_address,
    replay_token_balance,
    trace_from_json,
)
from clue.source import FixtureData, FixtureLoadError, read_fixture
from clue.valuation import PriceTable, TokenPrice

ADDRESS_PREFIX = b"\xc1\x0e"
ETH = WEI_PER_ETH
# ratio of the Parity row's ETH value to its ETH count, rounded to cents
SEPT_2020_ETH_USD = Decimal("369.02")
PRICES_AS_OF = "September 2020"

KINDS = (
    "destructed_basic",
    "destructed_mass",
    "destructed_redeploy",
    "parity_wallet",
    "parity_decoy",
    "creation_failure",
    "mixed",
    "mainnet_2020",
)


class GeneratorError(RuntimeError):
    pass


# --- bytecode templates -------------------------------------------------------

DEPOSIT_TOPIC = bytes.fromhex("e1fffcc4923d04b559f4d29a8bfc6cda04eb5b0d3c460751c2402c5c5cc9109c")


def kill_code(owner: Address) -> bytes:
    """Owner-guarded kill switch: SELFDESTRUCT(owner) when called by owner."""
    return assemble(
        [
            "CALLER", ("PUSH20", owner), "EQ", ("PUSH1", "@kill"), "JUMPI", "STOP",
            ("JUMPDEST", "kill"), ("PUSH20", owner), "SELFDESTRUCT",
        ]
    )


def wallet_code(library: Address) -> bytes:
    """Wallet stub: logs plain deposits, forwards any call data to the library via DELEGATECALL."""
    return assemble(
        [
            "CALLDATASIZE", ("PUSH1", "@forward"), "JUMPI",
            "CALLVALUE", "ISZERO", ("PUSH1", "@done"), "JUMPI",
            "CALLVALUE", ("PUSH1", 0), "MSTORE",
            "CALLER", ("PUSH32", DEPOSIT_TOPIC), ("PUSH1", 0x20), ("PUSH1", 0), "LOG2",
            ("JUMPDEST", "done"), "STOP",
            ("JUMPDEST", "forward"),
            "CALLDATASIZE", ("PUSH1", 0), ("PUSH1", 0), "CALLDATACOPY",
            ("PUSH1", 0), ("PUSH1", 0), "CALLDATASIZE", ("PUSH1", 0), ("PUSH20", library), "GAS", "DELEGATECALL",
            "ISZERO", ("PUSH1", "@fail"), "JUMPI", "STOP",
            ("JUMPDEST", "fail"), ("PUSH1", 0), "DUP1", "REVERT",
        ]
    )


def decoy_calldata_code(library: Address) -> bytes:
    """Embeds the library address, but the call target comes from call data."""
    return assemble(
        [
            ("PUSH20", library), "CALLER", "EQ", ("PUSH1", "@go"), "JUMPI", "STOP",
            ("JUMPDEST", "go"),
            ("PUSH1", 0), ("PUSH1", 0), ("PUSH1", 0), ("PUSH1", 0), "CALLVALUE",
            ("PUSH1", 4), "CALLDATALOAD", "GAS", "CALL", "POP", "STOP",
        ]
    )


def decoy_other_target_code(library: Address, other: Address) -> bytes:
    """Embeds the library address only in a comparison; calls a different fixed contract."""
    return assemble(
        [
            ("PUSH20", library), "CALLER", "EQ", "ISZERO", ("PUSH1", "@go"), "JUMPI", "STOP",
            ("JUMPDEST", "go"),
            ("PUSH1", 0), ("PUSH1", 0), ("PUSH1", 0), ("PUSH1", 0), ("PUSH1", 0),
            ("PUSH20", other), "GAS", "CALL", "POP", "STOP",
        ]
    )


def library_code() -> bytes:
    return assemble([("PUSH1", 0), "CALLDATALOAD", ("PUSH1", 0xE0), "SHR", ("PUSH4", 0xCBF0B0C0), "EQ",
                     ("PUSH1", "@kill"), "JUMPI", "STOP", ("JUMPDEST", "kill"), "CALLER", "SELFDESTRUCT"])


def token_code() -> bytes:
    return assemble([("PUSH1", 0), "CALLDATALOAD", "POP", ("PUSH1", 0), "DUP1", "RETURN"])


def factory_code() -> bytes:
    return assemble([("PUSH1", 0), ("PUSH1", 0), ("PUSH1", 0), ("PUSH1", 0), "CREATE2", "POP", "STOP"])


# --- world --------------------------------------------------------------------


@dataclass
class _Acct:
    nonce: int = 0
    balance: int = 0
    code: bytes = b""


class World:
    """Mutable chain simulation that records everything a fixture needs."""

    def __init__(self, seed: int, start_block: int = 1_000_000):
        if not 0 <= seed < 2**32:
            raise GeneratorError("seed must fit in 32 bits")
        self.seed = seed
        self.rng = random.Random(seed)
        self.block = start_block
        self.state: dict[Address, _Acct] = {}
        self.transactions: list[Transaction] = []
        self.traces: dict[str, dict] = {}
        self.token_events: list[TokenEvent] = []
        self.tokens: dict[Address, TokenInfo] = {}
        self.token_prices: dict[Address, TokenPrice] = {}
        self._addresses = 0
        self._hashes = 0
        self._per_block: dict[int, int] = {}
        self._destroyed_code: dict[Address, bytes] = {}

    # identities

    def new_address(self) -> Address:
        self._addresses += 1
        return Address(ADDRESS_PREFIX + self.seed.to_bytes(4, "big") + self._addresses.to_bytes(14, "big"))

    def new_hash(self) -> str:
        self._hashes += 1
        return "0x" + hashlib.sha256(f"clue-synth/{self.seed}/{self._hashes}".encode()).hexdigest()

    def acct(self, address: Address) -> _Acct:
        return self.state.setdefault(address, _Acct())

    def eoa(self, endowment: int = 0) -> Address:
        addr = self.new_address()
        if endowment:
            self.acct(addr).balance += endowment
        return addr

    def touch(self, address: Address) -> None:
        self.acct(address)

    def _slot(self, block: Optional[int]) -> tuple[int, int]:
        if block is None:
            self.block += 1
            block = self.block
        elif block < self.block:
            raise GeneratorError(f"block {block} is in the past (now {self.block})")
        else:
            self.block = block
        index = self._per_block.get(block, 0)
        self._per_block[block] = index + 1
        return block, index

    def _debit(self, address: Address, value: int) -> None:
        acct = self.acct(address)
        if acct.balance < value:
            raise GeneratorError(f"{address} cannot pay {value} wei (balance {acct.balance})")
        acct.balance -= value

    def _record(self, tx: Transaction, trace: Optional[dict] = None) -> Transaction:
        if trace is not None:
            self.traces[tx.hash] = trace
        self.transactions.append(tx)
        return tx

    # transactions

    def transfer(self, sender: Address, to: Address, value: int, block: Optional[int] = None) -> Transaction:
        block, index = self._slot(block)
        self._debit(sender, value)
        self.acct(sender).nonce += 1
        self.acct(to).balance += value
        return self._record(Transaction(self.new_hash(), sender, to, value, block, index))

    def deploy(self, sender: Address, code: bytes, value: int = 0, address: Optional[Address] = None) -> Address:
        block, index = self._slot(None)
        created = address or self.new_address()
        if self.state.get(created) and self.state[created].code:
            raise GeneratorError(f"{created} already holds code")
        self._debit(sender, value)
        self.acct(sender).nonce += 1
        acct = self.acct(created)
        acct.code, acct.nonce = code, 1
        acct.balance += value
        self._record(Transaction(self.new_hash(), sender, None, value, block, index, SUCCESS, None, created))
        return created

    def fail_deploy(self, sender: Address, error: str = "out of gas", address: Optional[Address] = None) -> Address:
        block, index = self._slot(None)
        created = address or self.new_address()
        self.acct(sender).nonce += 1
        self._record(Transaction(self.new_hash(), sender, None, 0, block, index, FAILED, error, created))
        return created

    def factory_deploy(self, sender: Address, factory: Address, code: bytes, address: Address) -> Transaction:
        block, index = self._slot(None)
        self.acct(sender).nonce += 1
        self.acct(factory).nonce += 1
        acct = self.acct(address)
        acct.code, acct.nonce = code, 1
        tx = Transaction(self.new_hash(), sender, factory, 0, block, index, traced=True)
        root = _frame("CALL", sender, factory, 0, [_frame("CREATE2", factory, address, 0)])
        return self._record(tx, {"tx_hash": tx.hash, "steps": [{"pc": 8, "op": "CREATE2", "depth": 1}], "calls": root})

    def destruct(
        self,
        sender: Address,
        contract: Address,
        beneficiary: Address,
        block: Optional[int] = None,
        tx_hash: Optional[str] = None,
    ) -> Transaction:
        """``sender`` triggers ``contract``'s kill switch; its ETH goes to ``beneficiary``."""
        block, index = self._slot(block)
        self.acct(sender).nonce += 1
        refund = self._destroy(contract, beneficiary)
        tx = Transaction(tx_hash or self.new_hash(), sender, contract, 0, block, index, traced=True)
        root = _frame("CALL", sender, contract, 0, [_frame("SELFDESTRUCT", contract, beneficiary, refund)])
        steps = [{"pc": _selfdestruct_pc(self.state_code(contract)), "op": "SELFDESTRUCT", "depth": 1}]
        return self._record(tx, {"tx_hash": tx.hash, "steps": steps, "calls": root})

    def mass_destruct(self, sender: Address, driver: Address, children: list[Address]) -> Transaction:
        """One transaction in which ``driver`` calls every child and each child self-destructs."""
        block, index = self._slot(None)
        self.acct(sender).nonce += 1
        frames, steps = [], []
        for child in children:
            refund = self._destroy(child, driver)
            frames.append(_frame("CALL", driver, child, 0, [_frame("SELFDESTRUCT", child, driver, refund)]))
            steps.append({"pc": 40, "op": "CALL", "depth": 1})
            steps.append({"pc": 34, "op": "SELFDESTRUCT", "depth": 2})
        tx = Transaction(self.new_hash(), sender, driver, 0, block, index, traced=True)
        return self._record(tx, {"tx_hash": tx.hash, "steps": steps, "calls": _frame("CALL", sender, driver, 0, frames)})

    def state_code(self, address: Address) -> bytes:
        return self._destroyed_code.get(address, b"")

    def _destroy(self, contract: Address, beneficiary: Address) -> int:
        acct = self.state.pop(contract, None)
        if acct is None or not acct.code:
            raise GeneratorError(f"{contract} has no code to destroy")
        self._destroyed_code[contract] = acct.code
        if beneficiary != contract:
            self.acct(beneficiary).balance += acct.balance
        return acct.balance

    # tokens

    def add_token(self, symbol: str, decimals: int, usd: Decimal) -> Address:
        token = self._token_account()
        self.tokens[token] = TokenInfo(token, symbol, decimals)
        self.token_prices[token] = TokenPrice(symbol, decimals, usd)
        return token

    def _token_account(self) -> Address:
        addr = self.new_address()
        acct = self.acct(addr)
        acct.code, acct.nonce = token_code(), 1
        return addr

    def token_transfer(self, token: Address, sender: Address, to: Address, amount: int, block: Optional[int] = None) -> TokenEvent:
        return self._token_event(token, TRANSFER, sender, to, amount, block)

    def token_approve(self, token: Address, owner: Address, spender: Address, amount: int, block: Optional[int] = None) -> TokenEvent:
        return self._token_event(token, APPROVAL, owner, spender, amount, block)

    def _token_event(self, token, kind, sender, to, amount, block) -> TokenEvent:
        block, index = self._slot(block)
        ev = TokenEvent(token, kind, sender, to, amount, block, index, 0)
        self.token_events.append(ev)
        return ev

    def usd_to_raw(self, token: Address, cents: int) -> int:
        """Exact raw token amount worth ``cents``; raises when the price cannot represent it."""
        price = self.token_prices[token]
        raw = Decimal(cents).scaleb(-2) / price.usd * (Decimal(10) ** price.decimals)
        if raw != raw.to_integral_value():
            raise GeneratorError(f"{cents} cents not representable in {price.symbol}")
        return int(raw)

    def prices(self, eth_usd: Decimal = SEPT_2020_ETH_USD) -> PriceTable:
        return PriceTable(eth_usd, dict(self.token_prices), PRICES_AS_OF)

    def to_fixture(self) -> FixtureData:
        accounts = [AccountState(a, s.nonce, s.balance, s.code) for a, s in self.state.items()]
        return FixtureData(
            accounts=accounts,
            transactions=list(self.transactions),
            traces=dict(self.traces),
            token_events=list(self.token_events),
            tokens=list(self.tokens.values()),
        )


def _frame(kind: str, sender: Address, to: Address, value: int, calls: Optional[list] = None) -> dict:
    out: dict[str, Any] = {"type": kind, "from": sender.hex, "to": to.hex, "value": str(value)}
    if calls:
        out["calls"] = calls
    return out


def _selfdestruct_pc(code: bytes) -> Optional[int]:
    from clue.disasm import disassemble

    for ins in disassemble(code).instructions:
        if ins.mnemonic == "SELFDESTRUCT":
            return ins.offset
    return None


# --- scenarios ----------------------------------------------------------------


@dataclass
class Expectations:
    candidates: dict[str, set[Address]] = field(default_factory=lambda: {c: set() for c in _CATS})
    findings: dict[str, set[Address]] = field(default_factory=lambda: {c: set() for c in _CATS})

    def candidate(self, category: str, address: Address, finding: bool = False) -> None:
        self.candidates[category].add(address)
        if finding:
            self.findings[category].add(address)


_CATS = (DESTRUCTED, ATTACKED_PARITY, CREATION_FAILURE)


@dataclass(frozen=True)
class Scenario:
    kind: str
    seed: int = 0
    params: dict = field(default_factory=dict, hash=False)


@dataclass
class FixtureManifest:
    kind: str
    seed: int
    params: dict
    library: Optional[str]
    attack_block: Optional[int]
    expected_candidates: dict[str, list[str]]
    expected_findings: dict[str, list[str]]

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "params": self.params,
            "library": self.library,
            "attack_block": self.attack_block,
            "expected_candidates": self.expected_candidates,
            "expected_findings": self.expected_findings,
        }

    @classmethod
    def from_json(cls, obj: dict) -> FixtureManifest:
        return cls(**obj)

    def finding_addresses(self, category: str) -> list[Address]:
        return [parse_address(a) for a in self.expected_findings[category]]

    def candidate_addresses(self, category: str) -> list[Address]:
        return [parse_address(a) for a in self.expected_candidates[category]]


@dataclass
class Built:
    """An in-memory generated fixture plus its ground truth."""

    data: FixtureData
    manifest: FixtureManifest
    prices: PriceTable

    @property
    def library(self) -> Optional[Address]:
        return parse_address(self.manifest.library) if self.manifest.library else None

    @property
    def attack_block(self) -> Optional[int]:
        return self.manifest.attack_block


class _Ctx:
    """Shared per-world helpers: a funder, a token set, and the library lifecycle."""

    def __init__(self, world: World, expect: Expectations):
        self.world = world
        self.expect = expect
        self.funder = world.eoa(10**9 * ETH)
        self.token_issuer = world.eoa()
        self.tokens = [
            world.add_token("TKA", 6, Decimal("1.00")),
            world.add_token("TKB", 18, Decimal("0.25")),
            world.add_token("TKC", 8, Decimal("12.50")),
        ]
        self.library: Optional[Address] = None
        self.attack_block: Optional[int] = None

    def fund(self, to: Address, value: int, block: Optional[int] = None) -> None:
        self.world.transfer(self.funder, to, value, block)

    def give_tokens(self, to: Address, cents: int, token: Optional[Address] = None) -> None:
        token = token or self.world.rng.choice(self.tokens)
        self.world.token_transfer(token, self.token_issuer, to, self.world.usd_to_raw(token, cents))

    def ensure_library(self, address: Optional[Address] = None) -> Address:
        if self.library is None:
            deployer = self.world.eoa(ETH)
            self.library = self.world.deploy(deployer, library_code(), address=address)
            self.library_owner = deployer
        return self.library

    def kill_library(self, block: Optional[int] = None, tx_hash: Optional[str] = None) -> None:
        attacker = self.world.eoa(ETH)
        self.world.destruct(attacker, self.ensure_library(), attacker, block=block, tx_hash=tx_hash)
        self.attack_block = self.world.block
        # the killed library is itself a destructed account, holding nothing
        self.expect.candidate(DESTRUCTED, self.library)


def _add_destructed(ctx: _Ctx, funded: bool, amount: int = 3 * ETH, cents: int = 0) -> Address:
    w = ctx.world
    owner = w.eoa(10 * ETH)
    contract = w.deploy(owner, kill_code(owner), value=ETH)
    if cents:
        ctx.give_tokens(contract, cents)
    w.destruct(owner, contract, owner)
    if funded:
        ctx.fund(contract, amount)
    ctx.expect.candidate(DESTRUCTED, contract, finding=(funded and amount > 0) or cents > 0)
    return contract


def _add_mass_destruct(ctx: _Ctx, n: int, funded: int) -> list[Address]:
    w = ctx.world
    attacker = w.eoa(10 * ETH)
    driver = w.deploy(attacker, kill_code(attacker))
    children = [w.deploy(attacker, kill_code(driver)) for _ in range(n)]
    w.mass_destruct(attacker, driver, children)
    lucky = set(w.rng.sample(range(n), funded))
    for i, child in enumerate(children):
        if i in lucky:
            ctx.fund(child, w.rng.randint(1, 50) * ETH // 10)
        ctx.expect.candidate(DESTRUCTED, child, finding=i in lucky)
    return children


def _add_redeploy(ctx: _Ctx) -> Address:
    w = ctx.world
    owner = w.eoa(10 * ETH)
    factory = w.deploy(owner, factory_code())
    target = w.new_address()
    w.factory_deploy(owner, factory, kill_code(owner), target)
    w.destruct(owner, target, owner)
    w.factory_deploy(owner, factory, kill_code(owner), target)
    ctx.fund(target, 2 * ETH)
    ctx.expect.candidate(DESTRUCTED, target)
    return target


def _add_wallet(ctx: _Ctx, funded: bool, pre: int = 5 * ETH, cents: int = 0) -> Address:
    w = ctx.world
    owner = w.eoa(ETH)
    wallet = w.deploy(owner, wallet_code(ctx.ensure_library()))
    if funded:
        ctx.fund(wallet, pre)
        if cents:
            ctx.give_tokens(wallet, cents)
    ctx.expect.candidate(ATTACKED_PARITY, wallet, finding=funded)
    return wallet


def _add_decoys(ctx: _Ctx, fund: int = 4 * ETH) -> list[Address]:
    w = ctx.world
    owner = w.eoa(ETH)
    other = w.deploy(owner, token_code())
    decoys = [
        w.deploy(owner, decoy_calldata_code(ctx.ensure_library())),
        w.deploy(owner, decoy_other_target_code(ctx.ensure_library(), other)),
    ]
    for d in decoys:
        if fund:
            ctx.fund(d, fund)
        ctx.expect.candidate(ATTACKED_PARITY, d)
    return decoys


def _add_creation_failure(ctx: _Ctx, post_calls: int, per_call: int = ETH, cents: int = 0, creator=None, address=None) -> Address:
    w = ctx.world
    creator = creator or w.eoa(100 * ETH)
    fake = w.fail_deploy(creator, "out of gas", address=address)
    w.touch(fake)
    for _ in range(post_calls):
        w.transfer(creator, fake, per_call)
    if cents:
        ctx.give_tokens(fake, cents)
    ctx.expect.candidate(CREATION_FAILURE, fake, finding=post_calls * per_call > 0 or cents > 0)
    return fake


def _add_noise(ctx: _Ctx) -> None:
    w = ctx.world
    # unused EOA whose oldest transaction is an ordinary transfer
    ctx.fund(w.eoa(), 2 * ETH)
    # funded without any transaction history (e.g. a mining reward)
    w.eoa(3 * ETH)
    # successful creation, later destroyed and refunded: destructed, never creation-failure
    _add_destructed(ctx, funded=True, amount=ETH)


def _build_world(scenario: Scenario) -> tuple[World, _Ctx]:
    p = dict(scenario.params)
    kind = scenario.kind
    start = 4_000_000 if kind == "mainnet_2020" else 1_000_000
    world = World(scenario.seed, start_block=start)
    ctx = _Ctx(world, Expectations())
    if kind == "destructed_basic":
        _add_destructed(ctx, funded=p.get("funded", True), amount=int(p.get("amount", 3 * ETH)))
    elif kind == "destructed_mass":
        n = int(p.get("n", 50))
        _add_mass_destruct(ctx, n, int(p.get("funded", n // 5)))
    elif kind == "destructed_redeploy":
        _add_redeploy(ctx)
    elif kind == "parity_wallet":
        funded = p.get("funded", True)
        wallet = _add_wallet(ctx, funded, cents=209 if funded else 0)
        ctx.kill_library()
        if funded:
            ctx.fund(wallet, ETH)
    elif kind == "parity_decoy":
        _add_decoys(ctx)
        ctx.kill_library()
    elif kind == "creation_failure":
        _add_creation_failure(ctx, int(p.get("post_calls", 3)))
    elif kind == "mixed":
        _build_mixed(ctx, p)
    elif kind == "mainnet_2020":
        from clue.mainnet2020 import build_mainnet_world

        build_mainnet_world(ctx, p)
    else:
        raise GeneratorError(f"unknown scenario kind {kind!r}; expected one of {', '.join(KINDS)}")
    return world, ctx


def _build_mixed(ctx: _Ctx, p: dict) -> None:
    w = ctx.world
    for i in range(int(p.get("destructed", 3))):
        _add_destructed(ctx, funded=i % 2 == 0, cents=150 if i % 3 == 0 else 0)
    _add_mass_destruct(ctx, int(p.get("mass", 10)), int(p.get("mass_funded", 3)))
    _add_redeploy(ctx)
    wallets = [_add_wallet(ctx, funded=i % 2 == 0, cents=209 * (i % 2 == 0)) for i in range(int(p.get("wallets", 4)))]
    _add_decoys(ctx)
    ctx.kill_library()
    for wallet in wallets[:1]:
        ctx.fund(wallet, ETH)
    for i in range(int(p.get("failures", 4))):
        _add_creation_failure(ctx, post_calls=i % 4, cents=700 if i == 1 else 0)
    _add_noise(ctx)
    w.token_approve(ctx.tokens[0], ctx.token_issuer, w.eoa(), 10)


def build(scenario: Scenario) -> Built:
    world, ctx = _build_world(scenario)
    data = world.to_fixture()
    problems = check_fixture(data)
    if problems:
        raise GeneratorError("generator produced an inconsistent fixture: " + "; ".join(problems[:5]))
    manifest = FixtureManifest(
        kind=scenario.kind,
        seed=scenario.seed,
        params=dict(sorted(scenario.params.items())),
        library=ctx.library.hex if ctx.library else None,
        attack_block=ctx.attack_block,
        expected_candidates={c: sorted(a.hex for a in ctx.expect.candidates[c]) for c in _CATS},
        expected_findings={c: sorted(a.hex for a in ctx.expect.findings[c]) for c in _CATS},
    )
    return Built(data, manifest, world.prices())


def generate(scenario: Scenario, out_dir: Path | str) -> FixtureManifest:
    """Write the fixture, ``manifest.json``, ``prices.json`` and ``clue.ini`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    built = build(scenario)
    built.data.write(out)
    (out / "manifest.json").write_text(json.dumps(built.manifest.to_json(), indent=1, sort_keys=True) + "\n")
    (out / "prices.json").write_text(json.dumps(built.prices.to_json(), indent=1, sort_keys=True) + "\n")
    lines = ["# parity settings for this synthetic world", "[parity]"]
    if built.manifest.library:
        lines += [f"library_address = {built.manifest.library}", f"attack_block = {built.manifest.attack_block}"]
    (out / "clue.ini").write_text("\n".join(lines) + "\n")
    return built.manifest


# --- validation ---------------------------------------------------------------


def check_fixture(data: FixtureData) -> list[str]:
    problems = []
    tx_hashes = {t.hash for t in data.transactions}
    for tx in data.transactions:
        if tx.traced and tx.hash not in data.traces:
            problems.append(f"transaction {tx.hash} references missing trace traces/{tx.hash}.json")
    for tx_hash in sorted(set(data.traces) - tx_hashes):
        problems.append(f"trace traces/{tx_hash}.json has no transaction")
    for tx_hash, raw in sorted(data.traces.items()):
        try:
            trace = trace_from_json(raw)
        except (ParseError, KeyError, TypeError, ValueError) as exc:
            problems.append(f"traces/{tx_hash}.json: malformed: {exc!r}")
            continue
        if trace.tx_hash != tx_hash:
            problems.append(f"traces/{tx_hash}.json: tx_hash field is {trace.tx_hash}")
        problems.extend(trace.alignment_errors())
    known_tokens = {t.address for t in data.tokens}
    for token in sorted({e.token for e in data.token_events} - known_tokens):
        problems.append(f"token events reference {token}, absent from tokens.json")
    for info in data.tokens:
        if info.balances is None:
            continue
        for holder, bal in sorted(info.balances.items()):
            replayed = replay_token_balance(data.token_events, info.address, holder)
            if replayed != bal:
                problems.append(f"token {info.address}: balance of {holder} is {bal}, events replay to {replayed}")
    return problems


def validate(fixture_dir: Path | str) -> list[str]:
    """Every cross-file invariant; an empty list means the fixture is valid."""
    try:
        data = read_fixture(fixture_dir)
    except FixtureLoadError as exc:
        return [str(exc)]
    return check_fixture(data)


# --- mutations used by the precision tests ------------------------------------


def inject_outflow_tx(data: FixtureData, account: Address, value: int, block: int) -> None:
    """An external transaction sending ``value`` out of ``account`` at ``block``."""
    h = "0x" + hashlib.sha256(f"mutation/tx/{account}/{block}/{len(data.transactions)}".encode()).hexdigest()
    data.transactions.append(Transaction(h, account, Address(b"\xde" * 20), value, block, 0))


def inject_internal_outflow(data: FixtureData, account: Address, value: int, block: int) -> None:
    """A traced transaction in which ``account`` sends ``value`` as an internal message."""
    caller = Address(b"\xca" * 20)
    h = "0x" + hashlib.sha256(f"mutation/itx/{account}/{block}/{len(data.transactions)}".encode()).hexdigest()
    data.transactions.append(Transaction(h, caller, account, 0, block, 0, traced=True))
    data.traces[h] = {
        "tx_hash": h,
        "steps": [{"pc": 0, "op": "CALL", "depth": 1}],
        "calls": _frame("CALL", caller, account, 0, [_frame("CALL", account, Address(b"\xde" * 20), value)]),
    }


def inject_token_outflow(data: FixtureData, account: Address, token: Address, amount: int, block: int) -> None:
    data.token_events.append(TokenEvent(token, TRANSFER, account, Address(b"\xde" * 20), amount, block, 0, 0))


def inject_inbound(data: FixtureData, account: Address, value: int, block: int) -> None:
    funder = Address(b"\xfe" * 20)
    h = "0x" + hashlib.sha256(f"mutation/in/{account}/{block}/{len(data.transactions)}".encode()).hexdigest()
    data.transactions.append(Transaction(h, funder, account, value, block, 0))
    state = data.account(account)
    data.set_account(AccountState(account, state.nonce, state.balance + value, state.code))


def zero_holdings(data: FixtureData, account: Address) -> None:
    """Drop the account's ETH and every token event crediting or debiting it."""
    state = data.account(account)
    data.set_account(AccountState(account, state.nonce, 0, state.code))
    data.token_events = [e for e in data.token_events if account not in (e.sender, e.to_or_spender) or e.kind != TRANSFER]


__all__ = [
    "Built",
    "FixtureManifest",
    "KINDS",
    "PARITY_KILL_BLOCK",
    "PARITY_LIBRARY",
    "Scenario",
    "World",
    "build",
    "generate",
    "validate",
]

"""One test per acceptance criterion; each records a PASS/FAIL line for the terminal summary."""

from __future__ import annotations

import json
import random
import time
from decimal import Decimal

from clue.cli import main
from clue.detect.common import ATTACKED_PARITY, CREATION_FAILURE, DESTRUCTED
from clue.disasm import disassemble, reassemble
from clue.detect.destructed import run_destructed_pipeline, scan_traces_for_selfdestruct
from clue.detect.eoa import run_eoa_pipeline
from clue.detect.parity import run_parity_pipeline
from clue.model import FAILED, TRANSFER, parse_address
from clue.runner import resolve_config, run
from clue.source import FixtureSource, read_fixture
from clue.synthchain import Scenario, generate
from clue.synthchain import (
    KINDS,
    inject_inbound,
    inject_internal_outflow,
    inject_outflow_tx,
    inject_token_outflow,
    zero_holdings,
)
from evm_oracle import CORPUS
from helpers import (
    MAINNET_FIXTURE,
    built,
    finding_accounts,
    parity_config,
    record_criterion,
    run_data,
    symexec_disagreement,
)

CATS = (DESTRUCTED, ATTACKED_PARITY, CREATION_FAILURE)
SMALL_KINDS = [k for k in KINDS if k != "mainnet_2020"]
SEEDS = range(5)

# published per-category figures: findings, ETH USD, CBC USD
PUBLISHED = {
    DESTRUCTED: (173, "123841.02", "25036305.09"),
    ATTACKED_PARITY: (203, "190060328.19", "950380.79"),
    CREATION_FAILURE: (191, "15640.76", "55.27"),
}


def test_criterion_1_mainnet_shaped_fixture(tmp_path):
    out = tmp_path / "report.json"
    start = time.perf_counter()
    code = main(["detect", "all", "--fixture", str(MAINNET_FIXTURE), "--out", str(out), "--generated-at", "pinned"])
    elapsed = time.perf_counter() - start
    report = json.loads(out.read_text())
    rows = {
        cat: (len(report["categories"][cat]["findings"]), report["categories"][cat]["eth_usd"],
              report["categories"][cat]["cbc_usd"])
        for cat in CATS
    }
    parts = sum(Decimal(v) for row in PUBLISHED.values() for v in row[1:])
    ok = (
        code == 0
        and rows == PUBLISHED
        and report["grand_total_usd"] == "216186551.12"
        and parts == Decimal("216186551.12")
        and elapsed < 60
    )
    record_criterion(1, "mainnet-shaped fixture", ok,
                     f"total {report['grand_total_usd']}, findings {sum(r[0] for r in rows.values())}, {elapsed:.2f}s")
    assert ok, rows


# --- criterion 2 ---------------------------------------------------------------


class RawIndex:
    """Per-account view of raw fixture records, built without the package's source layer."""

    def __init__(self, data):
        self.data = data
        self.balance = {a.address: a.balance for a in data.accounts}
        self.txs = {t.hash: t for t in data.transactions}
        self.value_out: dict = {}  # account -> [(block, index)] of non-reverted value leaving it
        for tx in data.transactions:
            if tx.status == FAILED:
                continue
            pos = (tx.block_number, tx.index)
            if tx.value > 0:
                self.value_out.setdefault(tx.sender, []).append(pos)
            raw = data.traces.get(tx.hash)
            if raw is None:
                continue
            stack = [(child, False) for child in raw["calls"].get("calls", [])]
            if raw["calls"].get("error"):
                continue
            while stack:
                frame, reverted = stack.pop()
                reverted = reverted or bool(frame.get("error"))
                if not reverted and int(str(frame.get("value", "0")), 0) > 0:
                    self.value_out.setdefault(parse_address(frame["from"]), []).append(pos)
                stack.extend((c, reverted) for c in frame.get("calls", []))
        self.token_net: dict = {}
        self.token_out: dict = {}
        for ev in data.token_events:
            if ev.kind != TRANSFER:
                continue
            self.token_net[(ev.token, ev.to_or_spender)] = self.token_net.get((ev.token, ev.to_or_spender), 0) + ev.amount
            self.token_net[(ev.token, ev.sender)] = self.token_net.get((ev.token, ev.sender), 0) - ev.amount
            if ev.amount > 0:
                self.token_out.setdefault(ev.sender, []).append((ev.block_number, ev.tx_index))

    def lock_position(self, finding, attack_block):
        if finding.category == DESTRUCTED:
            tx = self.txs[finding.evidence.destroying_tx]
        elif finding.category == CREATION_FAILURE:
            tx = self.txs[finding.evidence.creation_tx]
        else:
            return (attack_block, float("inf"))
        return (tx.block_number, tx.index)

    def violation(self, finding, attack_block) -> str | None:
        acct = finding.account
        tokens = any(self.token_net.get((t.address, acct), 0) > 0 for t in self.data.tokens)
        if self.balance.get(acct, 0) == 0 and not tokens:
            return "holds nothing"
        lock = self.lock_position(finding, attack_block)
        if any(pos > lock for pos in self.value_out.get(acct, [])):
            return "ETH left after the lock"
        if any(pos > lock for pos in self.token_out.get(acct, [])):
            return "tokens left after the lock"
        return None


def scenario_worlds():
    for kind in SMALL_KINDS:
        for seed in SEEDS:
            yield built(kind, seed)
    yield built("mixed", 11, destructed=6, mass=20, mass_funded=8, wallets=6, failures=8)


def mutate(b, finding, variant: int, i: int) -> str:
    after_lock = (b.attack_block if finding.category == ATTACKED_PARITY else finding.first_lock_block) + 1
    if variant == 1:
        zero_holdings(b.data, finding.account)
        return "zero_holdings"
    if i % 3 == 0 and finding.cbc_locked:
        inject_token_outflow(b.data, finding.account, finding.cbc_locked[0].token, 1, after_lock)
        return "token_outflow"
    if i % 3 == 1:
        inject_internal_outflow(b.data, finding.account, 1, after_lock)
        return "internal_outflow"
    inject_outflow_tx(b.data, finding.account, 1, after_lock)
    return "outflow_tx"


def test_criterion_2_precision_and_mutations():
    violations, checked = [], 0
    worlds = [(f"{b.manifest.kind}/{b.manifest.seed}", b.data, run_data(b), b.attack_block) for b in scenario_worlds()]
    cfg = resolve_config({"fixture": MAINNET_FIXTURE, "generated_at": "pinned"})
    worlds.append(("mainnet_2020", read_fixture(MAINNET_FIXTURE), run(cfg), cfg.parity.attack_block))
    for name, data, report, attack_block in worlds:
        index = RawIndex(data)
        for f in report.findings:
            checked += 1
            why = index.violation(f, attack_block)
            if why:
                violations.append(f"{name} {f.account}: {why}")

    mutations, misclassified = 0, []
    for seed in range(4):
        base_report = run_data(built("mixed", seed))
        before = {c: set(finding_accounts(base_report, c)) for c in CATS}
        for i, f in enumerate(base_report.findings):
            for variant in range(2):
                b = built("mixed", seed)
                label = mutate(b, f, variant, i)
                mutations += 1
                after = {c: set(finding_accounts(run_data(b), c)) for c in CATS}
                expected = {c: before[c] - {f.account.hex} for c in CATS}
                if after != expected:
                    misclassified.append(f"mixed/{seed} {label} on {f.account}")

    ok = not violations and checked > 0 and mutations >= 20 and not misclassified
    record_criterion(2, "precision and mutations", ok,
                     f"{checked} findings rechecked, {len(violations)} violations; "
                     f"{mutations} mutations, {len(misclassified)} misclassified")
    assert ok, violations[:5] + misclassified[:5]


def test_criterion_3_symexec_oracle_equivalence(corpus, oracle_results):
    sizes_ok = len(corpus) >= 50 and all(len(code) <= 64 for code in corpus.values())
    disagreements = {n: symexec_disagreement(corpus[n], oracle_results[n]) for n in corpus}
    bad = {n: d for n, d in disagreements.items() if d}
    constant = sum(r.constant for r in oracle_results.values())
    ok = sizes_ok and not bad
    record_criterion(3, "symexec oracle equivalence", ok,
                     f"{len(corpus) - len(bad)}/{len(corpus)} agree, {constant} constant-target programs")
    assert ok, bad


def test_criterion_4_disassembler_totality():
    rng = random.Random(20200901)
    failures = 0
    for _ in range(10_000):
        code = rng.randbytes(rng.randint(0, 1024))
        try:
            prog = disassemble(code)
            offset = 0
            for ins in prog.instructions:
                assert ins.offset == offset and ins.opcode == code[offset]
                offset += ins.size
            assert offset == len(code)
            assert reassemble(prog) == code
        except Exception:
            failures += 1
    record_criterion(4, "disassembler totality", failures == 0, f"10000 inputs, {failures} failures")
    assert failures == 0


def test_criterion_5_pipeline_determinism(tmp_path):
    mixed = tmp_path / "mixed"
    generate(Scenario("mixed", 9), mixed)
    identical = []
    for fixture in (MAINNET_FIXTURE, mixed):
        texts = []
        for par in ("1", "8"):
            out = tmp_path / f"{fixture.name}-{par}.json"
            assert main(["detect", "all", "--fixture", str(fixture), "--parallelism", par, "--out", str(out),
                         "--generated-at", "pinned"]) == 0
            texts.append(out.read_bytes())
        identical.append(texts[0] == texts[1])
        # without a pinned stamp, everything except the stamp still matches
        unpinned = []
        for par in ("1", "8"):
            out = tmp_path / f"{fixture.name}-{par}-free.json"
            assert main(["detect", "all", "--fixture", str(fixture), "--parallelism", par, "--out", str(out)]) == 0
            obj = json.loads(out.read_text())
            obj.pop("generated_at")
            unpinned.append(obj)
        identical.append(unpinned[0] == unpinned[1])
    ok = all(identical)
    record_criterion(5, "pipeline determinism", ok, f"{sum(identical)}/{len(identical)} report pairs identical")
    assert ok


def test_criterion_6_monotonicity():
    leaks = []
    for b in scenario_worlds():
        report = run_data(b)
        src = FixtureSource(b.data)
        results = {
            DESTRUCTED: run_destructed_pipeline(src, prices=b.prices),
            ATTACKED_PARITY: run_parity_pipeline(src, src.list_all_accounts(), parity_config(b), b.prices),
            CREATION_FAILURE: run_eoa_pipeline(src, src.list_all_accounts(), b.prices),
        }
        for cat, res in results.items():
            name = f"{b.manifest.kind}/{b.manifest.seed} {cat}"
            if not {f.account for f in res.findings} <= set(res.candidates):
                leaks.append(name)
            if finding_accounts(report, cat) != sorted(f.account.hex for f in res.findings):
                leaks.append(name + " runner mismatch")

    promoted = 0
    for seed in SEEDS:
        b = built("destructed_basic", seed, funded=False)
        src = FixtureSource(b.data)
        [event] = scan_traces_for_selfdestruct(src, src.list_traced_transactions())
        assert run_destructed_pipeline(src, prices=b.prices).findings == []
        inject_inbound(b.data, event.contract, 10**17, event.block_number + 1)
        if finding_accounts(run_data(b), DESTRUCTED) == [event.contract.hex]:
            promoted += 1
    ok = not leaks and promoted == len(SEEDS)
    record_criterion(6, "candidate/finding monotonicity", ok,
                     f"{len(leaks)} subset violations, {promoted}/{len(SEEDS)} inbound promotions")
    assert ok, leaks[:5]


def test_raw_recheck_catches_mutations():
    b = built("mixed", 0)
    report = run_data(b)
    for i, f in enumerate(report.findings):
        for variant in range(2):
            m = built("mixed", 0)
            mutate(m, f, variant, i)
            assert RawIndex(m.data).violation(f, m.attack_block) is not None

"""Synthetic world whose lock totals match the 2020 mainnet per-category figures.

Counts, USD amounts and three well-known example accounts are pinned;
everything else (amount splits, token choice, timing) is drawn from the
seeded RNG. ETH amounts are the smallest Wei totals whose value at
369.02 USD/ETH is at least the target, so every category rounds to the
target cent.
"""

from __future__ import annotations

import random
from typing import TYPE_CHECKING

from clue.detect.common import ATTACKED_PARITY, CREATION_FAILURE, DESTRUCTED
from clue.detect.parity import PARITY_KILL_BLOCK, PARITY_LIBRARY
from clue.model import WEI_PER_ETH, Address, parse_address

if TYPE_CHECKING:
    from clue.synthchain import _Ctx

ETH = WEI_PER_ETH
ETH_USD_CENTS = 36902

LIBRARY_KILL_TX = "0x47f7cff7a5e671884629c93b368cb18f58a993f4b19c2a53a8662e3f1482f690"

# category -> (findings, ETH value in cents, CBC value in cents)
TABLE = {
    DESTRUCTED: (173, 12_384_102, 2_503_630_509),
    ATTACKED_PARITY: (203, 19_006_032_819, 95_038_079),
    CREATION_FAILURE: (191, 1_564_076, 5_527),
}
GRAND_TOTAL_USD = "216186551.12"
PARITY_CANDIDATES = 658
PARITY_DECOY_PAIRS = 9
EOA_CANDIDATES = 3720
DESTRUCTED_CONTRACTS = 399  # plus the library itself

FAMOUS_DESTRUCTED = parse_address("0x97eC9BFb0F6672C358620615a1E4dE0348Aea05c")
FAMOUS_WALLET = parse_address("0x0da3cB3046F72fcbb49edF01B04AB6efc6C0D8DC")
FAMOUS_EOA = parse_address("0x5488b0a000843dc54b0e541dfb75c2927f92adc8")

FAMOUS_DESTRUCTED_WEI = 208 * ETH
FAMOUS_WALLET_PRE_WEI = 255_847 * ETH // 100
FAMOUS_WALLET_POST_WEI = 1_788 * ETH // 100
FAMOUS_WALLET_CBC_CENTS = 209
FAMOUS_EOA_WEI = 19 * ETH
FAMOUS_EOA_CBC_CENTS = 700


def wei_for_cents(cents: int) -> int:
    """Smallest Wei amount worth at least ``cents`` at the fixed ETH price."""
    return -(-cents * 10**18 // ETH_USD_CENTS)


def split(total: int, n: int, rng: random.Random, floor: int = 1) -> list[int]:
    """``n`` positive parts, each at least ``floor``, summing exactly to ``total``."""
    if n <= 0:
        raise ValueError("n must be positive")
    spare = total - n * floor
    if spare < 0:
        raise ValueError(f"cannot split {total} into {n} parts of at least {floor}")
    weights = [rng.paretovariate(1.2) for _ in range(n)]
    scale = sum(weights)
    parts = [int(spare * w / scale) for w in weights]
    parts[-1] += spare - sum(parts)
    return [p + floor for p in parts]


def build_mainnet_world(ctx: _Ctx, params: dict) -> None:
    w = ctx.world
    rng = w.rng
    _parity(ctx, rng)
    _destructed(ctx, rng)
    _creation_failures(ctx, rng)
    # ordinary accounts that should never be flagged
    for _ in range(40):
        ctx.fund(w.eoa(), rng.randint(1, 30) * ETH // 10)
    for _ in range(10):
        w.eoa(rng.randint(1, 5) * ETH)


def _parity(ctx: _Ctx, rng: random.Random) -> None:
    from clue.synthchain import _add_decoys, _add_wallet

    w = ctx.world
    n_findings, eth_cents, cbc_cents = TABLE[ATTACKED_PARITY]
    n_wallets = PARITY_CANDIDATES - 2 * PARITY_DECOY_PAIRS
    ctx.ensure_library(PARITY_LIBRARY)

    famous_total = FAMOUS_WALLET_PRE_WEI + FAMOUS_WALLET_POST_WEI
    amounts = split(wei_for_cents(eth_cents) - famous_total, n_findings - 1, rng, floor=ETH // 10)
    cbc = split(cbc_cents - FAMOUS_WALLET_CBC_CENTS, 49, rng, floor=100)
    funded_slots = set(rng.sample(range(n_wallets), n_findings))
    famous_slot = min(funded_slots)

    posts: list[tuple[Address, int]] = []
    amount_iter, cbc_iter = iter(amounts), iter(cbc)
    for i in range(n_wallets):
        if i == famous_slot:
            wallet = _add_wallet_at(ctx, FAMOUS_WALLET, FAMOUS_WALLET_PRE_WEI, FAMOUS_WALLET_CBC_CENTS)
            posts.append((wallet, FAMOUS_WALLET_POST_WEI))
        elif i in funded_slots:
            total = next(amount_iter)
            post = total // 10 if rng.random() < 0.2 else 0
            cents = next(cbc_iter, 0)
            wallet = _add_wallet(ctx, True, pre=total - post, cents=cents)
            if post:
                posts.append((wallet, post))
        else:
            _add_wallet(ctx, False)
        if i % 73 == 0 and i < PARITY_DECOY_PAIRS * 73:
            _add_decoys(ctx)
    ctx.kill_library(block=PARITY_KILL_BLOCK, tx_hash=LIBRARY_KILL_TX)
    for wallet, post in posts:
        ctx.fund(wallet, post)


def _add_wallet_at(ctx: _Ctx, address: Address, pre: int, cents: int) -> Address:
    from clue.synthchain import wallet_code

    w = ctx.world
    owner = w.eoa(ETH)
    wallet = w.deploy(owner, wallet_code(ctx.ensure_library()), address=address)
    ctx.fund(wallet, pre)
    ctx.give_tokens(wallet, cents, token=ctx.tokens[0])
    ctx.expect.candidate(ATTACKED_PARITY, wallet, finding=True)
    return wallet


def _destructed(ctx: _Ctx, rng: random.Random) -> None:
    from clue.synthchain import kill_code

    w = ctx.world
    n_findings, eth_cents, cbc_cents = TABLE[DESTRUCTED]

    owner = w.eoa(10 * ETH)
    famous = w.deploy(owner, kill_code(owner), value=ETH, address=FAMOUS_DESTRUCTED)
    w.destruct(owner, famous, owner)

    attacker = w.eoa(10 * ETH)
    driver = w.deploy(attacker, kill_code(attacker))
    children = [w.deploy(attacker, kill_code(driver)) for _ in range(DESTRUCTED_CONTRACTS - 1)]
    funded = rng.sample(range(len(children)), n_findings - 1)
    amounts = split(wei_for_cents(eth_cents) - FAMOUS_DESTRUCTED_WEI, n_findings - 1, rng, floor=ETH // 100)
    cbc = split(cbc_cents, 60, rng, floor=100)
    for slot, cents in zip(funded, cbc):
        ctx.give_tokens(children[slot], cents)
    for start in range(0, len(children), 25):
        w.mass_destruct(attacker, driver, children[start : start + 25])

    for part in split(FAMOUS_DESTRUCTED_WEI, 4, rng, floor=ETH):
        ctx.fund(famous, part)
    ctx.expect.candidate(DESTRUCTED, famous, finding=True)
    for slot, amount in zip(funded, amounts):
        ctx.fund(children[slot], amount)
    funded_set = set(funded)
    for i, child in enumerate(children):
        ctx.expect.candidate(DESTRUCTED, child, finding=i in funded_set)


def _creation_failures(ctx: _Ctx, rng: random.Random) -> None:
    w = ctx.world
    n_findings, eth_cents, cbc_cents = TABLE[CREATION_FAILURE]
    creators = [w.eoa(10_000 * ETH) for _ in range(120)]

    famous_creator = w.eoa(100 * ETH)
    fake = w.fail_deploy(famous_creator, "out of gas", address=FAMOUS_EOA)
    w.touch(fake)
    for part in split(FAMOUS_EOA_WEI, 3, rng, floor=ETH):
        w.transfer(famous_creator, fake, part)
    ctx.give_tokens(fake, FAMOUS_EOA_CBC_CENTS, token=ctx.tokens[0])
    ctx.expect.candidate(CREATION_FAILURE, fake, finding=True)

    funded = set(rng.sample(range(EOA_CANDIDATES - 1), n_findings - 1))
    amounts = iter(split(wei_for_cents(eth_cents) - FAMOUS_EOA_WEI, n_findings - 1, rng, floor=ETH // 1000))
    cbc = iter(split(cbc_cents - FAMOUS_EOA_CBC_CENTS, 9, rng, floor=100))
    for i in range(EOA_CANDIDATES - 1):
        creator = creators[i % len(creators)]
        fake = w.fail_deploy(creator, rng.choice(("out of gas", "out of gas", "stack underflow")))
        w.touch(fake)
        if i in funded:
            total = next(amounts)
            calls = rng.randint(1, 3)
            for part in split(total, calls, rng):
                w.transfer(creator, fake, part)
            cents = next(cbc, 0)
            if cents:
                ctx.give_tokens(fake, cents)
        ctx.expect.candidate(CREATION_FAILURE, fake, finding=i in funded)

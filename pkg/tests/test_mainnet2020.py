from __future__ import annotations

import random
from decimal import Decimal

import pytest
from hypothesis import given
from hypothesis import strategies as st

from clue.detect.common import ATTACKED_PARITY, CREATION_FAILURE, DESTRUCTED
from clue.model import parse_address
from clue.mainnet2020 import split, wei_for_cents
from clue.runner import resolve_config, run
from clue.valuation import eth_usd, usd
from helpers import MAINNET_FIXTURE

PRICE = Decimal("369.02")


@pytest.fixture(scope="module")
def mainnet_report():
    return run(resolve_config({"fixture": MAINNET_FIXTURE, "generated_at": "pinned"}))


def finding(report, category, address):
    acct = parse_address(address)
    return next(f for f in report.categories[category].findings if f.account == acct)


def test_destructed_example_holds_208_eth(mainnet_report):
    f = finding(mainnet_report, DESTRUCTED, "0x97eC9BFb0F6672C358620615a1E4dE0348Aea05c")
    assert f.eth_locked == 208 * 10**18


def test_wallet_example(mainnet_report):
    f = finding(mainnet_report, ATTACKED_PARITY, "0x0da3cB3046F72fcbb49edF01B04AB6efc6C0D8DC")
    assert f.eth_locked == 257_635 * 10**16
    assert usd(sum((t.usd_value for t in f.cbc_locked), Decimal(0))) == "2.09"


def test_failed_creation_example(mainnet_report):
    f = finding(mainnet_report, CREATION_FAILURE, "0x5488b0a000843dc54b0e541dfb75c2927f92adc8")
    assert f.eth_locked == 19 * 10**18
    assert f.evidence.inbound_after_failure == 3
    assert f.evidence.error == "out of gas"
    assert usd(sum((t.usd_value for t in f.cbc_locked), Decimal(0))) == "7.00"


def test_candidate_counts(mainnet_report):
    assert mainnet_report.categories[ATTACKED_PARITY].candidates == 658
    assert mainnet_report.categories[CREATION_FAILURE].candidates == 3720


@given(st.integers(1, 10**12))
def test_wei_for_cents_is_the_smallest_amount_reaching_the_target(cents):
    wei = wei_for_cents(cents)
    target = Decimal(cents) / 100
    assert eth_usd(wei, PRICE) >= target > eth_usd(wei - 1, PRICE)
    assert usd(eth_usd(wei, PRICE)) == usd(target)


@given(st.integers(0, 10**6), st.integers(1, 50), st.integers(0, 2**32))
def test_split_sums_exactly(extra, n, seed):
    parts = split(n * 3 + extra, n, random.Random(seed), floor=3)
    assert sum(parts) == n * 3 + extra and len(parts) == n and min(parts) >= 3

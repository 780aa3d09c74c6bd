from __future__ import annotations

import csv
import io
import json
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from clue.detect.common import Finding
from clue.detect.destructed import DestructionEvent
from clue.model import parse_address
from clue.runner import default_prices
from clue.source import FixtureSource
from clue.valuation import (
    PriceFileError,
    PriceTable,
    TokenBalance,
    TokenPrice,
    build_report,
    eth_usd,
    finding_usd,
    load_prices,
    parse_prices,
    token_usd,
    usd,
    value_account,
)
from helpers import built, run_data

A = parse_address("0x" + "aa" * 20)
TOKEN = parse_address("0x" + "77" * 20)
ETH = 10**18
SEPT_2020 = Decimal("369.02")


def test_derived_eth_price_from_parity_row():
    # Parity ETH value divided by the locked ETH count, to the cent
    ratio = Fraction(19006032819, 100) / 515035
    assert Decimal(round(ratio * 100)) / 100 == SEPT_2020
    value = eth_usd(515035 * ETH, SEPT_2020)
    assert value == Decimal("190058215.70")
    assert abs(value - Decimal("190060328.19")) / Decimal("190060328.19") < Decimal("0.00002")


def test_unit_cases():
    assert eth_usd(ETH, SEPT_2020) == SEPT_2020
    assert token_usd(10**18, 18, Decimal("1.00")) == Decimal("1.00")
    assert eth_usd(0, SEPT_2020) == 0


def test_usd_rounds_half_even_at_display():
    assert usd(Decimal("0.005")) == "0.00"
    assert usd(Decimal("0.015")) == "0.02"
    assert usd(Decimal("1")) == "1.00"


@given(st.integers(0, 10**30), st.integers(0, 36), st.decimals(0, 10**6, places=4))
def test_token_value_is_exact(raw, decimals, price):
    assert Fraction(token_usd(raw, decimals, price)) == Fraction(raw, 10**decimals) * Fraction(price)


def _finding(eth: int, tokens: tuple[TokenBalance, ...] = (), account=A) -> Finding:
    ev = DestructionEvent(account, "0x" + "00" * 32, 1, 0, None)
    return Finding("destructed", account, ev, eth, tokens, 1)


def _table() -> PriceTable:
    return PriceTable(SEPT_2020, {TOKEN: TokenPrice("TK", 6, Decimal("12.5"))}, "test")


@given(
    st.lists(st.tuples(st.integers(0, 10**24), st.integers(0, 10**12)), min_size=1, max_size=8),
    st.decimals(Decimal("0.001"), Decimal(1000), places=3),
)
def test_price_linearity_and_additivity(holdings, k):
    prices = _table()
    findings = []
    for i, (wei, raw) in enumerate(holdings):
        tokens = (TokenBalance(TOKEN, "TK", 6, raw, token_usd(raw, 6, Decimal("12.5"))),) if raw else ()
        if wei or tokens:
            findings.append(_finding(wei, tokens, parse_address("0x" + f"{i + 1:040x}")))
    base = build_report({"destructed": (len(findings), findings)}, prices)
    scaled = build_report({"destructed": (len(findings), findings)}, prices.scaled(k))
    assert Fraction(scaled.grand_total_usd) == Fraction(base.grand_total_usd) * Fraction(k)
    assert Fraction(scaled.categories["destructed"].eth_usd) == Fraction(base.categories["destructed"].eth_usd) * Fraction(k)
    per_finding = sum((Fraction(part) for f in findings for part in finding_usd(f, prices)), Fraction(0))
    assert Fraction(base.grand_total_usd) == per_finding


def test_single_finding_report_and_empty_report():
    one = build_report({"destructed": (1, [_finding(ETH)])}, _table())
    assert one.to_dict()["grand_total_usd"] == "369.02"
    empty = build_report({c: (0, []) for c in ("destructed", "attacked_parity", "creation_failure")}, _table())
    d = empty.to_dict()
    assert d["grand_total_usd"] == "0.00"
    assert all(cat["findings"] == [] for cat in d["categories"].values())


def test_value_account_zero_everywhere():
    b = built("destructed_basic")
    v = value_account(FixtureSource(b.data), A, b.prices)
    assert (v.eth, v.tokens, v.usd_total) == (0, [], 0)
    assert not v.holds_value


def test_unpriced_token_is_valued_at_zero_with_warning():
    b = built("mixed", 1)
    report = run_data(b)
    holder = next(f for f in report.findings if f.cbc_locked)
    partial = PriceTable(b.prices.eth_usd, {}, "none")
    v = value_account(FixtureSource(b.data), holder.account, partial)
    assert v.tokens and all(t.usd_value == 0 for t in v.tokens)
    assert any("no price" in w for w in v.warnings)


def test_merge_equals_joint_run():
    b = built("mixed", 3)
    joint = run_data(b)
    parts = [run_data(b, detectors=[d]) for d in ("destructed", "parity", "eoa")]
    merged = parts[0].merge(parts[1]).merge(parts[2])
    assert merged.to_json() == joint.to_json()
    with pytest.raises(ValueError):
        parts[0].merge(parts[0])


def test_csv_rows_match_findings():
    b = built("mixed", 3)
    report = run_data(b)
    rows = list(csv.DictReader(io.StringIO(report.to_csv())))
    assert [r["account"] for r in rows] == [f.account.hex for f in report.findings]
    total = sum(Decimal(r["total_usd"]) for r in rows)
    assert abs(total - report.grand_total_usd) <= Decimal("0.005") * len(rows)


def test_report_json_is_sorted_and_stable():
    b = built("mixed", 3)
    text = run_data(b).to_json()
    assert text == run_data(b).to_json()
    assert json.loads(text)["prices_as_of"] == b.prices.as_of


def test_shipped_prices():
    p = default_prices()
    assert p.eth_usd == SEPT_2020 and p.as_of == "September 2020"
    assert {t.symbol for t in p.tokens.values()} == {"USDC", "USDT"}


@pytest.mark.parametrize(
    "obj",
    [
        {},
        {"eth_usd": "-1"},
        {"eth_usd": "abc"},
        {"eth_usd": True},
        {"eth_usd": "NaN"},
        {"eth_usd": "1", "tokens": {"0x12": {}}},
        {"eth_usd": "1", "tokens": {TOKEN.hex: {"decimals": 40}}},
        {"eth_usd": "1", "tokens": {TOKEN.hex: {"decimals": Decimal("6.5")}}},
        {"eth_usd": "1", "tokens": {TOKEN.hex: []}},
    ],
)
def test_malformed_prices_rejected(obj):
    with pytest.raises(PriceFileError):
        parse_prices(obj)


def test_price_file_errors_name_the_file(tmp_path):
    missing = tmp_path / "nope.json"
    with pytest.raises(PriceFileError, match="nope.json"):
        load_prices(missing)
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(PriceFileError, match="bad.json"):
        load_prices(bad)


def test_price_file_floats_parse_exactly(tmp_path):
    f = tmp_path / "p.json"
    f.write_text('{"eth_usd": 369.02, "tokens": {"%s": {"decimals": 6, "usd": 0.1}}}' % TOKEN.hex)
    p = load_prices(f)
    assert p.eth_usd == SEPT_2020 and p.tokens[TOKEN].usd == Decimal("0.1")

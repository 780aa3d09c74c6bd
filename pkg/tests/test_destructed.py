from __future__ import annotations

from clue.detect.common import DESTRUCTED
from clue.detect.destructed import (
    PRIOR_APPROVAL,
    confirm_locked_destructed,
    run_destructed_pipeline,
    scan_traces_for_selfdestruct,
)
from clue.model import APPROVAL, TokenEvent, parse_address
from clue.source import FixtureSource
from clue.synthchain import inject_internal_outflow, inject_outflow_tx, inject_token_outflow
from helpers import built, finding_accounts, run_data


def only_finding(report):
    [f] = report.categories[DESTRUCTED].findings
    return f


def test_basic_destruction_is_found():
    b = built("destructed_basic")
    f = only_finding(run_data(b, detectors=["destructed"]))
    [expected] = b.manifest.expected_findings[DESTRUCTED]
    assert f.account.hex == expected
    assert f.eth_locked == 3 * 10**18
    tx = FixtureSource(b.data).get_transaction(f.evidence.destroying_tx)
    assert f.first_lock_block == tx.block_number == f.evidence.block_number


def test_unfunded_destruction_is_a_candidate_only():
    b = built("destructed_basic", funded=False)
    result = run_destructed_pipeline(FixtureSource(b.data), prices=b.prices)
    assert len(result.candidates) == 1 and result.findings == []
    assert result.counts["excluded_zero_value"] == 1


def test_redeployed_address_is_excluded():
    b = built("destructed_redeploy")
    result = run_destructed_pipeline(FixtureSource(b.data), prices=b.prices)
    assert result.findings == [] and result.counts["excluded_redeployed"] == 1


def test_mass_destruction_matches_ground_truth():
    b = built("destructed_mass", n=30, funded=7)
    report = run_data(b, detectors=["destructed"])
    assert finding_accounts(report, DESTRUCTED) == b.manifest.expected_findings[DESTRUCTED]
    assert len(b.manifest.expected_findings[DESTRUCTED]) == 7
    assert report.categories[DESTRUCTED].candidates == len(b.manifest.expected_candidates[DESTRUCTED])


def test_outflow_after_destruction_excludes():
    for inject in (inject_outflow_tx, inject_internal_outflow):
        b = built("destructed_basic")
        f = only_finding(run_data(b, detectors=["destructed"]))
        inject(b.data, f.account, 1, f.first_lock_block + 1)
        result = run_destructed_pipeline(FixtureSource(b.data), prices=b.prices)
        assert result.findings == [] and result.counts["excluded_outflow_after_lock"] == 1


def test_outflow_before_destruction_does_not_exclude():
    b = built("destructed_basic")
    f = only_finding(run_data(b, detectors=["destructed"]))
    inject_outflow_tx(b.data, f.account, 1, f.first_lock_block - 1)
    assert len(run_destructed_pipeline(FixtureSource(b.data), prices=b.prices).findings) == 1


def test_token_outflow_after_destruction_excludes():
    b = built("mixed", 1)
    report = run_data(b, detectors=["destructed"])
    holder = next(f for f in report.categories[DESTRUCTED].findings if f.cbc_locked)
    token = holder.cbc_locked[0].token
    inject_token_outflow(b.data, holder.account, token, 1, holder.first_lock_block + 1)
    after = run_data(b, detectors=["destructed"])
    assert holder.account.hex not in finding_accounts(after, DESTRUCTED)


def test_prior_approval_is_annotated_not_excluded():
    b = built("destructed_basic")
    f = only_finding(run_data(b, detectors=["destructed"]))
    token = next(iter(b.prices.tokens))
    spender = parse_address("0x" + "ab" * 20)
    b.data.token_events.append(TokenEvent(token, APPROVAL, f.account, spender, 5, f.first_lock_block - 1, 0, 0))
    again = only_finding(run_data(b, detectors=["destructed"]))
    assert again.annotations == (PRIOR_APPROVAL,)


def test_selfdestruct_without_suicide_message_warns():
    b = built("destructed_basic")
    src = FixtureSource(b.data)
    [h] = src.list_traced_transactions()
    b.data.traces[h]["calls"]["calls"] = []
    warnings: list[str] = []
    assert scan_traces_for_selfdestruct(FixtureSource(b.data), [h], warnings) == []
    assert "no suicide internal transaction" in warnings[0]


def test_unknown_tx_hash_warns_and_continues():
    b = built("destructed_basic")
    src = FixtureSource(b.data)
    warnings: list[str] = []
    events = scan_traces_for_selfdestruct(src, ["0x" + "99" * 32, *src.list_traced_transactions()], warnings)
    assert len(events) == 1 and "unknown" in warnings[0]


def test_confirm_single_event_with_zero_price_table():
    b = built("destructed_basic")
    src = FixtureSource(b.data)
    [event] = scan_traces_for_selfdestruct(src, src.list_traced_transactions())
    f = confirm_locked_destructed(src, event)
    assert f is not None and f.eth_locked == 3 * 10**18


def test_latest_destruction_is_the_lock_event():
    b = built("mixed", 2)
    src = FixtureSource(b.data)
    events = scan_traces_for_selfdestruct(src, src.list_traced_transactions())
    result = run_destructed_pipeline(src, prices=b.prices)
    by_contract = {}
    for ev in events:
        by_contract[ev.contract] = ev
    for f in result.findings:
        assert f.evidence == by_contract[f.account]

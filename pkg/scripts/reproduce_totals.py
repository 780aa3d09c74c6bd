"""Run all detectors on the mainnet-shaped fixture and compare against the reference 2020 totals."""

from __future__ import annotations

import argparse
import time
from decimal import Decimal
from pathlib import Path

from clue.mainnet2020 import GRAND_TOTAL_USD, TABLE
from clue.runner import format_summary, resolve_config, run
from clue.valuation import usd


def main() -> int:
    root = Path(__file__).resolve().parent.parent
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--fixture", type=Path, default=root / "fixtures" / "mainnet_2020")
    ap.add_argument("--parallelism", type=int, default=1)
    args = ap.parse_args()

    start = time.perf_counter()
    report = run(resolve_config({"fixture": args.fixture, "parallelism": args.parallelism, "generated_at": "fixed"}))
    elapsed = time.perf_counter() - start
    print(format_summary(report))

    ok = True
    for category, (findings, eth_cents, cbc_cents) in TABLE.items():
        cat = report.categories[category]
        got = (len(cat.findings), usd(cat.eth_usd), usd(cat.cbc_usd))
        want = (findings, usd(Decimal(eth_cents).scaleb(-2)), usd(Decimal(cbc_cents).scaleb(-2)))
        match = got == want
        ok &= match
        print(f"{'match' if match else 'DIFF ':5s} {category:18s} got={got} reference={want}")
    total = usd(report.grand_total_usd)
    ok &= total == GRAND_TOTAL_USD
    print(f"grand total {total} (reference {GRAND_TOTAL_USD}), {elapsed:.2f}s")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())

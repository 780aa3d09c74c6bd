"""Generate every scenario kind over a range of seeds and check detectors against the manifests."""

from __future__ import annotations

import argparse

from clue.detect.parity import ParityConfig
from clue.runner import RunConfig, run
from clue.source import FixtureSource
from clue.synthchain import KINDS, Scenario, build


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--kinds", nargs="*", default=[k for k in KINDS if k != "mainnet_2020"])
    args = ap.parse_args()

    failures = 0
    for kind in args.kinds:
        for seed in range(args.seeds):
            built = build(Scenario(kind, seed))
            parity = ParityConfig(built.library, built.attack_block) if built.library else ParityConfig()
            cfg = RunConfig(fixture="in-memory", parity=parity, prices=built.prices, generated_at="fixed")
            report = run(cfg, source=FixtureSource(built.data))
            for category, cat in report.categories.items():
                got = sorted(f.account.hex for f in cat.findings)
                if got != built.manifest.expected_findings[category]:
                    failures += 1
                    print(f"MISMATCH {kind} seed={seed} {category}: got {len(got)} findings")
        print(f"{kind:20s} {args.seeds} seeds checked")
    print("all scenarios agree with their manifests" if not failures else f"{failures} mismatches")
    return 1 if failures else 0


if __name__ == "__main__":
    raise SystemExit(main())

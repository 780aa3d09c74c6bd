"""Regenerate the committed mainnet-shaped fixture under fixtures/mainnet_2020/."""

from __future__ import annotations

import argparse
import shutil
from pathlib import Path

from clue.synthchain import Scenario, generate, validate

DEFAULT_SEED = 2020


def main() -> None:
    root = Path(__file__).resolve().parent.parent
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=root / "fixtures" / "mainnet_2020")
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    args = ap.parse_args()

    if args.out.exists():
        shutil.rmtree(args.out)
    manifest = generate(Scenario("mainnet_2020", args.seed), args.out)
    problems = validate(args.out)
    if problems:
        raise SystemExit("generated fixture is invalid:\n" + "\n".join(problems))
    for category, found in manifest.expected_findings.items():
        print(f"{category:18s} candidates={len(manifest.expected_candidates[category]):5d} findings={len(found)}")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()

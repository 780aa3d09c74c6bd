"""Shared builders for the test suite."""

from __future__ import annotations

import copy
from functools import lru_cache
from pathlib import Path

from clue.detect.parity import ParityConfig
from clue.runner import DETECTOR_NAMES, RunConfig, run
from clue.source import FixtureData, FixtureSource
from clue.synthchain import Built, Scenario, build
from clue.valuation import CATEGORIES, LockedReport

ROOT = Path(__file__).resolve().parent.parent
MAINNET_FIXTURE = ROOT / "fixtures" / "mainnet_2020"


@lru_cache(maxsize=None)
def _built(kind: str, seed: int, params: tuple) -> Built:
    return build(Scenario(kind, seed, dict(params)))


def built(kind: str, seed: int = 0, **params) -> Built:
    """A generated scenario; callers get a private copy they may mutate."""
    return copy.deepcopy(_built(kind, seed, tuple(sorted(params.items()))))


def parity_config(b: Built) -> ParityConfig:
    return ParityConfig(b.library, b.attack_block) if b.library else ParityConfig()


def run_data(b: Built, data: FixtureData | None = None, parallelism: int = 1, detectors=None) -> LockedReport:
    cats = CATEGORIES if detectors is None else tuple(DETECTOR_NAMES[d] for d in detectors)
    cfg = RunConfig(detectors=cats, fixture=Path("in-memory"), parity=parity_config(b), prices=b.prices,
                    generated_at="fixed", parallelism=parallelism)
    return run(cfg, source=FixtureSource(data if data is not None else b.data))


def finding_accounts(report: LockedReport, category: str) -> list[str]:
    return sorted(f.account.hex for f in report.categories[category].findings)


def symexec_disagreement(code: bytes, expected) -> str | None:
    """Compare symexec against a brute-force OracleResult; None when they agree."""
    from clue.disasm import disassemble
    from clue.symexec import execute

    report = execute(disassemble(code))
    sites = report.call_sites
    concrete = {s.target.word for s in sites if s.target.is_concrete}
    says_constant = bool(sites) and len(concrete) == 1 and all(s.target.is_concrete for s in sites)
    if says_constant != expected.constant:
        return f"symexec constant={says_constant}, oracle targets={len(expected.targets)}"
    if says_constant and concrete != {expected.value}:
        return f"symexec target {concrete} != oracle {expected.value:#x}"
    if not concrete <= expected.targets:
        return f"symexec reports unreachable targets {sorted(concrete - expected.targets)}"
    return None


# one line per acceptance criterion, echoed in the terminal summary by conftest
ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"criterion {number} {title}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)

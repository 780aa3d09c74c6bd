from __future__ import annotations

import pytest

from evm_oracle import corpus_programs, oracle


@pytest.fixture(scope="session")
def corpus():
    return corpus_programs()


@pytest.fixture(scope="session")
def oracle_results(corpus):
    """Brute-force results over all call data of length <= 2, computed once per session."""
    return {name: oracle(code) for name, code in corpus.items()}


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

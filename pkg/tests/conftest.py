from __future__ import annotations

import pytest

from datscore.data import save_dataset
from datscore.fixtures import fixture_dataset

# Filled by test_acceptance; echoed after the run so the per-criterion
# verdicts are visible even under output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.ensure_newline()
        terminalreporter.section("acceptance criteria", sep="-")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture()
def fixture_dataset_path(tmp_path):
    path = tmp_path / "fixture.jsonl"
    save_dataset(fixture_dataset(), path)
    return path

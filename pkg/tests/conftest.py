import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from neusymms.model import parse_timestamp
from neusymms.replay import MutableClock
from neusymms.store import FactStore

_acceptance_results: dict[str, tuple[str, str]] = {}


@pytest.fixture
def clock():
    return MutableClock(parse_timestamp("2026-01-01T00:00:00Z"))


@pytest.fixture
def store(clock):
    return FactStore(clock=clock)


@pytest.fixture
def scenarios_dir():
    return Path(__file__).parent.parent / "scenarios"


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    parts_path = report.nodeid.split("::")
    if not parts_path[0].endswith("test_acceptance.py"):
        return
    test = parts_path[-1]
    # test names look like test_c1_google_move; group by criterion
    parts = test.split("_")
    if len(parts) < 2 or not parts[1].startswith("c"):
        return
    criterion = parts[1]
    label = "_".join(parts[2:]) or criterion
    outcome = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
    prev = _acceptance_results.get(criterion)
    if prev is None or outcome == "FAIL":
        _acceptance_results[criterion] = (outcome, label)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for criterion in sorted(_acceptance_results, key=lambda c: int(c[1:])):
        outcome, label = _acceptance_results[criterion]
        terminalreporter.write_line(
            f"criterion {criterion[1:]:>2} [{outcome}] {label}")

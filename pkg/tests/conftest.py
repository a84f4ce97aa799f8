import re

import pytest

_LINES: dict[int, str] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance: end-to-end acceptance criteria (slow)")


@pytest.fixture(scope="session")
def criterion():
    """Record one pass/fail line for an acceptance criterion, then assert it."""

    def record(number: int, passed: bool, detail: str) -> None:
        line = f"AC{number:02d} {'PASS' if passed else 'FAIL'}  {detail}"
        _LINES[number] = line
        print(line)
        assert passed, detail

    return record


def pytest_terminal_summary(terminalreporter):
    seen = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            m = re.search(r"test_acceptance\.py::test_ac(\d+)", getattr(rep, "nodeid", ""))
            if m:
                seen[int(m.group(1))] = outcome
    if not seen:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(seen):
        terminalreporter.write_line(_LINES.get(number, f"AC{number:02d} FAIL  did not complete ({seen[number]})"))

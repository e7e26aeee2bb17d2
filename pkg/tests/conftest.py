"""Shared test plumbing: the acceptance-criterion report collector."""

import re

import pytest

_LINES = []


@pytest.fixture
def criterion(request):
    """Record exactly one pass/fail line for an acceptance criterion.

    The line is emitted in the terminal summary so a plain ``pytest -v``
    run shows the per-criterion verdicts in one block. If a test errors
    out before reaching its verdict, the teardown records a FAIL line
    from the test name so the block always has one line per criterion.
    """
    state = {"recorded": False}

    def _record(num: int, passed, detail: str = ""):
        state["recorded"] = True
        verdict = "PASS" if passed else "FAIL"
        _LINES.append(f"criterion {num:2d} {verdict}  {detail}".rstrip())
        return passed

    yield _record
    if not state["recorded"]:
        m = re.search(r"criterion_(\d+)", request.node.name)
        num = int(m.group(1)) if m else 0
        _LINES.append(f"criterion {num:2d} FAIL  (errored before verdict)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in _LINES:
        terminalreporter.write_line(line)

import os

import pytest

# criterion number -> (title, passed, detail), filled in by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    def record(number, title, passed, detail):
        ACCEPTANCE[number] = (title, bool(passed), detail)
        return passed

    return record


def pytest_report_header(config):
    from skipfree._backend import BACKEND

    forced = " (forced by SKIPFREE_PURE_PYTHON)" if os.environ.get("SKIPFREE_PURE_PYTHON") else ""
    return f"skipfree kernels: {BACKEND}{forced}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        title, passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {title}; {detail}")

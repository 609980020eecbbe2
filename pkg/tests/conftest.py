"""Shared pytest wiring: the acceptance checklist summary.

test_acceptance.py appends one [PASS]/[FAIL] line per checked behavior;
printing them from inside the tests would be swallowed by capture, so they
are replayed as a terminal section after the run.
"""

acceptance_checklist: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_checklist:
        terminalreporter.section("acceptance checklist")
        for line in acceptance_checklist:
            terminalreporter.line(line)

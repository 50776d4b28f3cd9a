"""Shared fixtures and a terminal summary for the acceptance checks."""

import numpy as np
import pytest

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def record_acceptance(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    _ACCEPTANCE_RESULTS[name] = f"{status}  {name}" + (f"  [{detail}]" if detail else "")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE_RESULTS):
        terminalreporter.write_line(_ACCEPTANCE_RESULTS[key])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

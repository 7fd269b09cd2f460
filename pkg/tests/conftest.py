import sys

import pytest

from factories import Run
from gridmix.scenario import builtin_case_study, stress_scenario


@pytest.fixture(scope="session")
def case_study_runs():
    """Case 1 (reserves off) and Case 2 (on) on the one-week case study."""
    base = builtin_case_study(hours=168)
    return {flag: Run(base.with_reserves(flag), f"case_study_168h_{'case2' if flag else 'case1'}")
            for flag in (False, True)}


@pytest.fixture(scope="session")
def stress_runs():
    return {flag: Run(stress_scenario(reserves=flag), f"stress_{'case2' if flag else 'case1'}")
            for flag in (False, True)}


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")

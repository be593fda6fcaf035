import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "ci", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))


_ACCEPTANCE = []


@pytest.fixture
def record():
    """Append one "CRITERION n ... PASS|FAIL" line, echoed in the terminal summary."""

    def _record(number, title, ok, detail=""):
        line = f"CRITERION {number:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)

import warnings

import pytest

from risense.operators import FarFieldWarning

CRITERIA: dict = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    """Collect acceptance outcomes; one line per criterion is printed at the end."""
    prev = CRITERIA.get(number)
    if prev is not None:
        passed = passed and prev[0]
        detail = f"{prev[1]}; {detail}"
    CRITERIA[number] = (passed, detail)


@pytest.fixture
def criterion():
    return record_criterion


@pytest.fixture(autouse=True)
def _quiet_far_field():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FarFieldWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")

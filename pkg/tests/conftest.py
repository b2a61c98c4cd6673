import numpy as np
import pytest

from hydraulic_ad.dataset import generate_synthetic
from hydraulic_ad.features import extract_table

_ACCEPTANCE: list[tuple[str, str, str]] = []


def record(criterion: str, passed: bool, detail: str = "") -> None:
    """Log one acceptance line; printed at the end of the session."""
    status = "PASS" if passed else "FAIL"
    _ACCEPTANCE.append((criterion, status, detail))
    print(f"[{status}] {criterion} {detail}")


@pytest.fixture
def acceptance():
    return record


@pytest.fixture(scope="session")
def synthetic_table():
    return extract_table(generate_synthetic(500, 120, 120, seed=0))


@pytest.fixture(scope="session")
def small_table():
    return extract_table(generate_synthetic(120, 30, 30, seed=3))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_runtest_logreport(report):
    if report.skipped and "test_acceptance.py::" in report.nodeid:
        reason = report.longrepr[-1] if isinstance(report.longrepr, tuple) else str(report.longrepr)
        num, _, name = report.nodeid.split("::")[-1].removeprefix("test_c").partition("_")
        _ACCEPTANCE.append((f"C{num} {name.replace('_', ' ')}", "SKIP",
                            reason.removeprefix("Skipped: ")))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in sorted(_ACCEPTANCE, key=lambda e: e[0].lower()):
        terminalreporter.write_line(f"{status}  {criterion}  {detail}")

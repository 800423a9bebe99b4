import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from scproof import PrimeModulus, ThreeCnf, certify_small_prime  # noqa: E402

_CRITERIA: dict[str, str] = {}


@pytest.fixture
def running_example() -> ThreeCnf:
    """(x1 v x1 v x1) and (~x1 v ~x1 v ~x1): unsatisfiable, n = 1, m = 2."""
    return ThreeCnf.from_ints(1, [(1, 1, 1), (-1, -1, -1)])


@pytest.fixture
def small_field():
    def make(p: int):
        cert = certify_small_prime(p)
        return PrimeModulus(p, certified=True), cert
    return make


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    label = report.nodeid.rsplit("::", 1)[-1]
    if report.when == "call" or report.outcome != "passed":
        if report.outcome == "failed" or label not in _CRITERIA:
            _CRITERIA[label] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_CRITERIA):
        status = "PASS" if _CRITERIA[label] == "passed" else "FAIL"
        terminalreporter.write_line(f"{status}  {label}")

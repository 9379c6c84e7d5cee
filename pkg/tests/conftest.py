import numpy as np
import pytest

from degraf_flow.pipeline import warmup


@pytest.fixture(scope="session", autouse=True)
def _compiled():
    # compile the numba kernels once so timing-sensitive tests measure run time
    warmup()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_acceptance = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        measured = dict(report.user_properties).get("measured", "")
        _acceptance.append((report.nodeid.split("::")[-1], report.outcome, measured))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, measured in _acceptance:
        tag = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}.get(outcome, outcome.upper())
        terminalreporter.write_line(f"[{tag}] {name}" + (f"  ({measured})" if measured else ""))

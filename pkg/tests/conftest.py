import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from reonmt.corpus import generate_synthetic  # noqa: E402

_CRITERIA = []


def record_criterion(name, passed, detail=""):
    _CRITERIA.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in _CRITERIA:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}" + (f"  ({detail})" if detail else ""))


@pytest.fixture
def criterion(request):
    """Run an acceptance check and record one pass/fail line for the summary."""
    name = request.node.get_closest_marker("criterion").args[0]
    notes = {}
    yield notes
    rep = getattr(request.node, "rep_call", None)
    passed = rep is not None and rep.passed
    record_criterion(name, passed, notes.get("detail", ""))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion")


@pytest.fixture(scope="session")
def tiny_corpus():
    return generate_synthetic(6, 6, 5, "reversal", seed=3)

from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"

_acceptance_lines: list[str] = []


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def criterion(request):
    """Record a one-line PASS/FAIL verdict for an acceptance criterion."""
    label = request.node.get_closest_marker("criterion").args[0]
    yield
    rep = getattr(request.node, "rep_call", None)
    verdict = "PASS" if rep is not None and rep.passed else "FAIL"
    _acceptance_lines.append(f"[{verdict}] {label}")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion with a one-line verdict")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)

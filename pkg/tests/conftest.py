import re

import pytest

from consensuskit import cli

_CRITERION_RE = re.compile(r"test_criterion_(\d+)")
_results: dict[int, bool] = {}


@pytest.fixture(autouse=True)
def _clean_tolerance_env(monkeypatch):
    monkeypatch.delenv(cli.TOLERANCE_ENV_VAR, raising=False)


def pytest_runtest_logreport(report):
    match = _CRITERION_RE.search(report.nodeid)
    if not match:
        return
    number = int(match.group(1))
    if report.failed:
        _results[number] = False
    elif report.when == "call" and report.passed:
        _results[number] = True


@pytest.hookimpl(trylast=True)
def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        verdict = "PASS" if _results[number] else "FAIL"
        terminalreporter.write_line(f"CRITERION {number}: {verdict}")

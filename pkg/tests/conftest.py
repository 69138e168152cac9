from __future__ import annotations

from collections import defaultdict

import pytest

from helpers import FIXTURE_REPO
from impactrank.corpus import Corpus, extract_corpus


@pytest.fixture(scope="session")
def fixture_corpus() -> Corpus:
    return extract_corpus(FIXTURE_REPO)


# -- acceptance summary: one line per criterion ------------------------------

_criteria: dict[int, dict] = defaultdict(lambda: {"title": "", "outcomes": []})


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        number, title = marker.args
        entry = _criteria[number]
        entry["title"] = title
        entry["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        entry = _criteria[number]
        ok = entry["outcomes"] and all(o == "passed" for o in entry["outcomes"])
        status = "PASS" if ok else "FAIL"
        n = len(entry["outcomes"])
        terminalreporter.write_line(f"criterion {number}: {status}  {entry['title']} ({n} test{'s' if n != 1 else ''})")

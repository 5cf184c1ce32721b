"""Prints one PASS/FAIL line per acceptance criterion at the end of a run.

Tests tagged ``@pytest.mark.criterion("name")`` report under that name; a
criterion passes only if every test carrying it passes.  Tests may add a
``("detail", text)`` user property to have it echoed on the line.
"""

import pytest

_RESULTS: dict[str, dict] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion this test checks")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    entry = _RESULTS.setdefault(marker.args[0], {"status": "PASS", "details": []})
    if report.skipped and entry["status"] == "PASS":
        entry["status"] = "SKIP"
        reason = report.longrepr[2] if isinstance(report.longrepr, tuple) else str(report.longrepr)
        entry["details"].append(reason.removeprefix("Skipped: "))
    elif report.failed:
        entry["status"] = "FAIL"
    if report.when == "call":
        entry["details"].extend(v for k, v in item.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, entry in _RESULTS.items():
        detail = "; ".join(entry["details"])
        terminalreporter.write_line(f"{entry['status']}: {name}" + (f" ({detail})" if detail else ""))

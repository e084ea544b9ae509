import os
import sys
from collections import OrderedDict

sys.path.insert(0, os.path.dirname(__file__))

_RESULTS = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): acceptance criterion covered by the test")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            number, title = mark.args
            item.user_properties.append(("acceptance", (number, title)))


def pytest_runtest_logreport(report):
    tag = dict(report.user_properties).get("acceptance")
    if tag is None:
        return
    number, title = tag
    entry = _RESULTS.setdefault(number, {"title": title, "passed": True, "seen": False})
    if report.when == "call" or report.outcome != "passed":
        entry["seen"] = entry["seen"] or report.when == "call"
        if report.outcome != "passed":
            entry["passed"] = False


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        entry = _RESULTS[number]
        status = "PASS" if entry["passed"] and entry["seen"] else "FAIL"
        terminalreporter.write_line(f"criterion {number:2d} {status}  {entry['title']}")

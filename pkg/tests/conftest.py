"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""

import pytest

_RESULTS = {}


@pytest.fixture(autouse=True)
def _acceptance_labels(request):
    marker = request.node.get_closest_marker("acceptance")
    if marker is not None and "criterion" in marker.kwargs:
        request.node.user_properties.append(("criterion", marker.kwargs["criterion"]))
        request.node.user_properties.append(("title", marker.kwargs.get("title", "")))


def pytest_runtest_logreport(report):
    marker = report.keywords.get("acceptance") if hasattr(report, "keywords") else None
    if marker is None:
        return
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    key = props["criterion"]
    entry = _RESULTS.setdefault(key, {"title": props.get("title", ""), "ok": True, "detail": ""})
    if report.failed:
        entry["ok"] = False
    if report.when == "call" and props.get("detail"):
        entry["detail"] = props["detail"]


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_RESULTS):
        entry = _RESULTS[key]
        status = "PASS" if entry["ok"] else "FAIL"
        line = f"{status}  criterion {key}: {entry['title']}"
        if entry["detail"]:
            line += f"  [{entry['detail']}]"
        terminalreporter.write_line(line)

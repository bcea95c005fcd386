from collections import defaultdict

import pytest

_OUTCOMES = defaultdict(list)
_NOTES = defaultdict(list)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        if hasattr(report, "wasxfail"):
            status = "XPASS" if report.passed else "XFAIL"
        else:
            status = report.outcome.upper()
        _OUTCOMES[n].append((item.name, status))


@pytest.fixture
def note(request):
    """Attach a one-line measurement to the criterion summary."""
    marker = request.node.get_closest_marker("criterion")

    def add(text):
        _NOTES[marker.args[0]].append(text)
        print(text)

    return add


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        statuses = [s for _, s in _OUTCOMES[n]]
        if all(s == "PASSED" for s in statuses):
            verdict = "PASS"
        elif any(s in ("FAILED", "XPASS") for s in statuses):
            verdict = "FAIL"
        elif "XFAIL" in statuses:
            verdict = "FAIL (expected, see ledger)"
        else:
            verdict = "SKIPPED"
        odd = [f"{name}={s}" for name, s in _OUTCOMES[n] if s != "PASSED"]
        detail = f"{statuses.count('PASSED')}/{len(statuses)} passed" + (f"; {', '.join(odd)}" if odd else "")
        tr.write_line(f"criterion {n}: {verdict}  ({detail})")
        for text in _NOTES[n]:
            tr.write_line(f"    {text}")

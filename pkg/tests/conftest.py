import pytest

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    n = marker.args[0]
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        status = "PASS" if rep.passed else ("SKIP" if rep.skipped else "FAIL")
        if rep.skipped:
            detail = f"(not run: {rep.longrepr[2].removeprefix('Skipped: ')})"
        prev = _criteria.get(n)
        if prev:
            # a criterion spread over several tests fails if any part fails
            rank = {"FAIL": 2, "PASS": 1, "SKIP": 0}
            status = max(prev[0], status, key=rank.get)
            detail = f"{prev[1]} | {detail}"
        _criteria[n] = (status, detail)

def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        status, detail = _criteria[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")

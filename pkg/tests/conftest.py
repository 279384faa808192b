from collections import defaultdict

import pytest

CRITERIA = {
    1: "scenario classification and convergence",
    2: "Hopf threshold and limit cycles",
    3: "transcritical exchanges",
    4: "reformulation correctness",
    5: "oracle equivalence",
    6: "E5 existence",
    7: "forward invariance",
}
_results = defaultdict(list)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.skipped or (rep.when != "call" and rep.passed):
        return
    detail = "; ".join(v for k, v in item.user_properties if k == "detail")
    report = "; ".join(v for k, v in item.user_properties if k == "report")
    _results[marker.args[0]].append((item.name, rep.passed, detail, report))


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, title in CRITERIA.items():
        results = _results.get(n)
        if not results:
            continue
        passed = sum(ok for _, ok, _, _ in results)
        verdict = "PASS" if passed == len(results) else "FAIL"
        tr.write_line(f"C{n} {verdict}  {title} ({passed}/{len(results)})")
        for name, ok, detail, report in results:
            tr.write_line(f"     {'ok  ' if ok else 'FAIL'} {name}: {detail}")
            if report:
                tr.write_line(f"          {report}")

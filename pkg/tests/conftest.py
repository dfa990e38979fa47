import pytest

ACCEPTANCE = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and (rep.when == "call" or rep.outcome != "passed"):
        if rep.when == "teardown":
            return
        doc = (item.function.__doc__ or item.name).strip().splitlines()[0]
        detail = dict(item.user_properties).get("measured", "")
        ACCEPTANCE.append((item.name, rep.outcome, doc, detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, outcome, doc, detail in sorted(ACCEPTANCE):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        line = f"{verdict}  {doc}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)

import pytest

from opialiter import _kernels


@pytest.fixture(scope="session", autouse=True)
def _compiled_kernels():
    # compile once up front so timing assertions see steady-state cost
    _kernels.warmup()


def pytest_terminal_summary(terminalreporter):
    # acceptance tests tag themselves with record_property("criterion", label)
    lines = []
    for status in ("passed", "failed"):
        for rep in terminalreporter.getreports(status):
            props = dict(rep.user_properties)
            if rep.when == "call" and "criterion" in props:
                lines.append((props["criterion"], "PASS" if rep.passed else "FAIL"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for label, outcome in sorted(lines):
            terminalreporter.write_line(f"{outcome}  {label}")

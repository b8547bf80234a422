import pytest

from robomut.reference import reference_program, reference_scenario, reference_suite


@pytest.fixture
def ref_program():
    return reference_program()


@pytest.fixture
def ref_scenario():
    return reference_scenario()


@pytest.fixture
def ref_suite():
    return reference_suite()


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)

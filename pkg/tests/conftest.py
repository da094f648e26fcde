import pytest

from edid import acceptance


@pytest.fixture(scope="session")
def campaign():
    return acceptance.Campaign()


@pytest.fixture(scope="session")
def verdicts():
    """Verdicts collected by the acceptance tests, reported at session end."""
    return {}


def pytest_terminal_summary(terminalreporter):
    verdicts = getattr(terminalreporter.config, "_edid_verdicts", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(verdicts, key=int):
        terminalreporter.write_line(verdicts[key].line())
    passed = sum(v.passed for v in verdicts.values())
    terminalreporter.write_line(f"{passed}/{len(verdicts)} criteria passed")

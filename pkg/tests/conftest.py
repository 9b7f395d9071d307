import warnings

import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(autouse=True)
def _quiet_validity_warnings():
    from ohmic_kbe.model import WideBandValidityWarning

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WideBandValidityWarning)
        yield


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import summary_lines

    lines = summary_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

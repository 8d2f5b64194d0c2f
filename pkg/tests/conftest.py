import logging

import pytest
from hypothesis import settings

# quantizer setup time varies with machine load; wall-clock deadlines only add flakes
settings.register_profile("sdcs", deadline=None)
settings.load_profile("sdcs")

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(autouse=True)
def _quiet_solver_warnings(caplog):
    caplog.set_level(logging.ERROR, logger="sdcs.decode")
    caplog.set_level(logging.ERROR, logger="sdcs.harness")
    yield


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> list of check outcomes
_outcomes: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion checked by the test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    criteria = [m.args[0] for m in item.iter_markers("criterion")]
    # record the call phase, or a setup error that prevented it
    if criteria and (rep.when == "call" or rep.failed):
        for n in criteria:
            _outcomes.setdefault(n, []).append(rep.passed)


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_outcomes):
        checks = _outcomes[n]
        verdict = "PASS" if all(checks) else "FAIL"
        terminalreporter.write_line(f"criterion {n:2d}: {verdict} ({sum(checks)}/{len(checks)} checks passed)")

import pytest

# filled by test_acceptance.report(); echoed after the run so the verdicts
# survive output capture
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(autouse=True)
def _no_seed_env(monkeypatch):
    monkeypatch.delenv("URLLC_LAB_SEED", raising=False)


def numba_available():
    from urllc_lab import _kernels

    return _kernels.HAVE_NUMBA  # already honours URLLC_LAB_DISABLE_NUMBA

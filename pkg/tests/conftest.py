import numpy as np
import pytest

from minitrap.geometry import MinitrapParams, build_minitrap
from minitrap.trap import analyze_trap


@pytest.fixture(scope="session")
def minitrap100():
    """Default mini-trap assembly at 100 A."""
    return build_minitrap(MinitrapParams(), 100.0)


@pytest.fixture(scope="session")
def report100(minitrap100):
    """Unbiased trap report of the default 100 A mini-trap (shared: it takes a few seconds)."""
    return analyze_trap(minitrap100)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


# -- acceptance-criterion bookkeeping --------------------------------------------
# criterion number -> list of (sub-check, passed, detail); printed at the end of the run

ACCEPTANCE: dict = {}


def record_acceptance(criterion: int, check: str, passed: bool, detail: str = "") -> bool:
    ACCEPTANCE.setdefault(criterion, []).append((check, bool(passed), detail))
    status = "PASS" if passed else "FAIL"
    print(f"criterion {criterion} [{check}]: {status} {detail}")
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        checks = ACCEPTANCE[n]
        ok = all(p for _, p, _ in checks)
        tr.write_line(f"CRITERION {n}: {'PASS' if ok else 'FAIL'}")
        for check, p, detail in checks:
            tr.write_line(f"    {'ok  ' if p else 'FAIL'} {check}: {detail}")

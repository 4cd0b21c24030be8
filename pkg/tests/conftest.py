import numpy as np
import pytest

import odar.detector as detector_mod

_original_component = detector_mod.detect_component
LAW_CHECKS = {"runs": 0}


def _checked_component(space, rho, backend, parameters=None):
    """Wraps every component-strategy detection in the suite with the subset and anchor laws."""
    result = _original_component(space, rho, backend, parameters)
    rho = np.asarray(rho, dtype=float)
    below = np.flatnonzero(rho < np.median(rho))
    assert np.all(np.isin(result.outliers, below)), "outlier with rho >= median"
    if below.size:
        anchor = below[np.argmin(space.hrho[below])]
        assert anchor in result.outliers, "minimum-hrho candidate not flagged"
    LAW_CHECKS["runs"] += 1
    return result


@pytest.fixture(autouse=True, scope="session")
def component_laws():
    detector_mod.detect_component = _checked_component
    yield LAW_CHECKS
    detector_mod.detect_component = _original_component


@pytest.fixture
def rng():
    return np.random.default_rng(20240101)


ACCEPTANCE_LINES = {}


def record_acceptance(number, line):
    ACCEPTANCE_LINES.setdefault(number, []).append(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        for line in ACCEPTANCE_LINES[number]:
            terminalreporter.write_line(line)

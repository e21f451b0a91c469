import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from domlab.system import build_system

settings.register_profile(
    "domlab", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("domlab")

GOLDEN = (1 + np.sqrt(5)) / 2
LAMBDA_CAT = float(np.log((3 + np.sqrt(5)) / 2))


@pytest.fixture(scope="session")
def cat2():
    return build_system("cat2")


@pytest.fixture(scope="session")
def cat2xid():
    return build_system("cat2xid")


@pytest.fixture(scope="session")
def cat3u2():
    return build_system("cat3u2")


@pytest.fixture(scope="session")
def cat2shear():
    return build_system("cat2shear")


def sorted_eigs(A):
    """Absolute eigenvalues of an integer matrix in decreasing order."""
    return np.sort(np.abs(np.linalg.eigvals(np.asarray(A, dtype=float))))[::-1]


def pytest_terminal_summary(terminalreporter):
    """One verdict line per acceptance criterion that ran."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", {}) if mod else {}
    if lines:
        terminalreporter.section("acceptance criteria")
        for number in sorted(lines):
            terminalreporter.write_line(lines[number])

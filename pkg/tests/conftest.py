import numpy as np
import pytest

from modelman import profile


@pytest.fixture(scope="session")
def euclid2():
    return profile.end_from_warping(profile.make_named_profile("euclidean", 2), 2)


@pytest.fixture(scope="session")
def euclid3():
    return profile.end_from_warping(profile.make_named_profile("euclidean", 3), 3)


@pytest.fixture(scope="session")
def cubic_prof():
    return profile.make_named_profile("power_exp", 2, 3.0)


@pytest.fixture(scope="session")
def cubic_end(cubic_prof):
    return profile.end_from_warping(cubic_prof, 2)


def rel(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

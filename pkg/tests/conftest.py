import sys
from pathlib import Path

import hypothesis
import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sdass.synthetic import blob_points, grid_mesh, torus_points  # noqa: E402

hypothesis.settings.register_profile("default", max_examples=50, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=10, deadline=None)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def blob():
    return blob_points(5000)


@pytest.fixture(scope="session")
def small_blob():
    return blob_points(1500, seed=3)


@pytest.fixture(scope="session")
def torus():
    return torus_points(5000)


@pytest.fixture
def grid5():
    return grid_mesh(5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_report import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])

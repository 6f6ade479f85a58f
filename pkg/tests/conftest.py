import numpy as np
import pytest

from okdmd import synthgen
from okdmd.core import SnapshotSet


@pytest.fixture(scope="session")
def desk_data():
    """Default desk-scale dataset: 8 x 8 grid (p = 128), 20 training pairs."""
    grid, cfg = synthgen.desk_config()
    return synthgen.generate_dataset(grid, cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def linear_snapshots(rng, p=6, m=5, spectrum=(0.9, 0.7, -0.5, 0.3, 0.2, 0.1)):
    """Snapshots of y = A x with a known diagonalizable A."""
    V = rng.standard_normal((p, p))
    A = V @ np.diag(spectrum[:p]) @ np.linalg.inv(V)
    X = rng.standard_normal((p, m))
    return A, SnapshotSet(X, A @ X)


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

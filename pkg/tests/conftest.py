import numpy as np
import pytest

from onebitgen import forward, measure, new_random_gaussian

FIG_DIMS = [2, 64, 1024]
FIG_SEED = 7
X0 = np.array([1.0, 1.0])


@pytest.fixture(scope="session")
def fig_net():
    """Two-layer expansive net whose risk has two basins around x0 = [1, 1]."""
    return new_random_gaussian(FIG_DIMS, FIG_SEED)


@pytest.fixture(scope="session")
def x0():
    return X0.copy()


@pytest.fixture(scope="session")
def big_measurements(fig_net):
    # one shared m = 1e5 set; about 0.8 GB for the sensing matrix
    return measure(forward(fig_net, X0), 100_000, dist="gaussian", noise="gaussian",
                   noise_scale=0.1, lam=10.0, seed=2024)


@pytest.fixture
def small_net():
    return new_random_gaussian([3, 20, 50], 1)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record and print a one-line verdict for an acceptance criterion."""
    def record(number, title, ok, detail=""):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title}" + (f" ({detail})" if detail else "")
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)

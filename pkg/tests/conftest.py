import numpy as np
import pytest

from rckoopman.pipeline import ExperimentConfig, make_datasets

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def duffing_data():
    return make_datasets(ExperimentConfig(system="duffing", seed=7))


@pytest.fixture(scope="session")
def diffdrive_data():
    return make_datasets(ExperimentConfig(system="diffdrive", seed=7))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ar1_signal():
    """10**6 samples of y_k = 0.8 y_{k-1} + e_k, started from stationarity."""
    from scipy.signal import lfilter

    rng = np.random.default_rng(2024)
    noise = rng.normal(size=1_000_000)
    noise[0] /= np.sqrt(1 - 0.8 ** 2)
    return lfilter([1.0], [1.0, -0.8], noise)[:, None]

import time

import numpy as np
import pytest

from mdpagg.experiment import ExperimentConfig, Truth, run_experiment, summarize
from mdpagg.groundtruth import ChainParams, build_model


@pytest.fixture(scope="session")
def design1():
    return ChainParams.design("1")


@pytest.fixture(scope="session")
def truth(design1):
    return Truth.from_params(design1)


@pytest.fixture(scope="session")
def model1(design1):
    return build_model(design1)


GRID_SECONDS = {}
ACCEPTANCE_LINES = []


def _grid(threshold_assumption):
    config = ExperimentConfig(threshold_assumption=threshold_assumption)
    start = time.perf_counter()
    results = run_experiment(config, jobs=1)
    GRID_SECONDS[threshold_assumption] = time.perf_counter() - start
    return results


@pytest.fixture(scope="session")
def default_results():
    """The default replication grid (R=100), without the threshold assumption."""
    return _grid(False)


@pytest.fixture(scope="session")
def default_results_threshold():
    """The default replication grid restricted to threshold policies."""
    return _grid(True)


@pytest.fixture(scope="session")
def default_summary(default_results, default_results_threshold):
    return summarize(default_results + default_results_threshold)


def cell_mean(results, M, K):
    xi = [res.regret for res in results if res.M == M and res.K == K]
    assert len(xi) > 0
    return float(np.mean(xi))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda x: int(x.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

import numpy as np
import pytest

from feverscreen.dataset import CohortSpec, generate_cohort, split_dataset
from feverscreen.hdlgen import quantize_model
from feverscreen.nn import TrainConfig, init_weights, train

SEED = 42


@pytest.fixture(scope="session")
def cohort():
    """Default 693 + 693 cohort, split with seed 42."""
    return split_dataset(generate_cohort(CohortSpec(seed=SEED)), SEED)


@pytest.fixture(scope="session")
def trained(cohort):
    net = init_weights([cohort.window_length, 8, 1], SEED)
    return train(net, cohort, TrainConfig(seed=SEED))


@pytest.fixture(scope="session")
def model(trained):
    return trained.network


@pytest.fixture(scope="session")
def qmodel(model):
    return quantize_model(model)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance")
        for line in RESULTS:
            terminalreporter.write_line(line)

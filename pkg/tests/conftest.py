import numpy as np
import pytest

from hcrep.oracle import SimilarityOracle
from hcrep.synth_data import generate_dataset


@pytest.fixture(scope="session")
def vw():
    """Full-size balanced VW dataset used across the evaluation tests."""
    return generate_dataset(2000, seed=7, balance=True, margin=0.05)


@pytest.fixture(scope="session")
def small_vw():
    return generate_dataset(300, seed=3, balance=True, margin=0.05)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def equal_oracle():
    return SimilarityOracle((1, 1, 1, 1))


TINY = {
    "data": {"n": 300},
    "triplets": {"n": 800, "val_n": 200, "test_n": 300},
    "model": {"embed_dim": 8, "hidden": [16]},
    "train": {"epochs": 2, "steps_per_epoch": 40, "lr": 0.003},
    "seeds": [0, 1],
    "count_floor": 200,
    "weight_list": [[0, 0, 1, 1], [1, 1, 1, 1]],
    "exponent_max": 1,
}


@pytest.fixture
def tiny_cfg():
    """Small experiment config that trains in well under a second per model."""
    import copy

    return copy.deepcopy(TINY)


_ACCEPTANCE = []


@pytest.fixture(scope="session")
def acceptance_log():
    """Collects one PASS/FAIL line per acceptance criterion (plus tables)."""
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)

import logging

import numpy as np
import pytest

from movingfront.asymptotics import AsymptoticSolution
from movingfront.harness import example_spec, forward_solution


@pytest.fixture(autouse=True)
def _quiet_regularize():
    # unreachable discrepancy targets are expected in some sweeps
    logging.getLogger("movingfront.regularize").setLevel(logging.ERROR)
    yield


@pytest.fixture(scope="session")
def spec1():
    return example_spec(1)


@pytest.fixture(scope="session")
def spec2():
    return example_spec(2)


@pytest.fixture(scope="session")
def asym1(spec1):
    return AsymptoticSolution(spec1)


@pytest.fixture(scope="session")
def asym2(spec2):
    return AsymptoticSolution(spec2)


@pytest.fixture(scope="session")
def sol1():
    return forward_solution(1)


@pytest.fixture(scope="session")
def sol2():
    return forward_solution(2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)

import numpy as np
import pytest

from replaywm import benchmark, design


@pytest.fixture(scope="session")
def system_a():
    return benchmark("system-a")


@pytest.fixture(scope="session")
def system_b():
    return benchmark("system-b")


@pytest.fixture(scope="session")
def system_c():
    return benchmark("system-c")


@pytest.fixture(scope="session")
def design_a(system_a):
    return design(system_a.model)


@pytest.fixture(scope="session")
def design_b(system_b):
    return design(system_b.model)


@pytest.fixture(scope="session")
def design_c(system_c):
    return design(system_c.model)


def frob_rel(actual: np.ndarray, expected: np.ndarray) -> float:
    return float(np.linalg.norm(actual - expected) / np.linalg.norm(expected))

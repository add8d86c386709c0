import math

import numpy as np
import pytest
from hypothesis import settings

from multinorm.sysmodel import RestrictedSystem

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

TABLE_A1 = np.array([[-0.3, 0.5], [0.2, -0.4]])
TABLE_A2 = np.array([[-0.6, 0.0], [0.0, 1.0]])


def table_system(M: float) -> RestrictedSystem:
    return RestrictedSystem.uniform([TABLE_A1, TABLE_A2], 1.0, M)


def example1_system() -> RestrictedSystem:
    return RestrictedSystem.uniform([np.diag([1.0, -3.0]), np.diag([-3.0, 1.0])], 1.0, 2.0)


def scalar_system(a: float = 1.0, b: float = -3.0) -> RestrictedSystem:
    return RestrictedSystem.uniform([np.array([[a]]), np.array([[b]])], 1.0, 2.0)


def random_stable(rng, d: int, margin: float = 0.1) -> np.ndarray:
    A = rng.standard_normal((d, d))
    w = np.max(np.linalg.eigvals(A).real)
    return A - (w + margin + rng.uniform(0, 1)) * np.eye(d)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def table1():
    return table_system(2.0)


@pytest.fixture
def example1():
    return example1_system()


@pytest.fixture
def scalar2():
    return scalar_system()


def close(a, b, tol):
    return math.isclose(a, b, rel_tol=0.0, abs_tol=tol)

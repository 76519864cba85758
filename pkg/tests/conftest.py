import functools

import pytest

from immersed_rt.analysis import convergence_table
from immersed_rt.problems import get_problem

FULL = (8, 16, 32, 64, 128, 256)


@functools.lru_cache(maxsize=None)
def _table(problem_id, method, eta, N_list):
    return convergence_table(get_problem(problem_id), method, eta, list(N_list))


@pytest.fixture(scope="session")
def table():
    """Cached convergence tables shared by every test module."""
    return _table

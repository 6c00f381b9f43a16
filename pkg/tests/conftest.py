import itertools

import numpy as np
import pytest

from copularank import IncompleteRanking, JeffreysPrior, Permutation
from copularank.exact import exact_predictive


def all_perms(n):
    return [Permutation(p) for p in itertools.permutations(range(1, n + 1))]


@pytest.fixture(scope="session")
def toy_inc():
    """The running example: n = 7, ranked positions {2,4,5} with pattern (2,1,3)."""
    return IncompleteRanking(Permutation((2, 1, 3)), (2, 4, 5), 7)


@pytest.fixture(scope="session")
def jeffreys():
    return JeffreysPrior()


@pytest.fixture(scope="session")
def toy_predictive(toy_inc, jeffreys):
    return exact_predictive(toy_inc, jeffreys)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)

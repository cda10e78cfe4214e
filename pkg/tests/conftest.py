import itertools

import numpy as np
import pytest

from kerrsim.params import ModelParams


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running numerical check")


@pytest.fixture
def closed_params():
    return ModelParams(kappa=1.0, gamma=0.0, alpha0=2.0)


def ladder_matrices(n_trunc: int):
    """Dense truncated annihilation/creation matrices for brute-force oracles."""
    a = np.diag(np.sqrt(np.arange(1.0, n_trunc + 1)), 1)
    return a, a.T.copy()


def brute_force_symmetric(mu: int, nu: int, n_trunc: int) -> np.ndarray:
    """Average of all distinct orderings of mu creations and nu annihilations."""
    a, ad = ladder_matrices(n_trunc)
    perms = set(itertools.permutations("d" * mu + "a" * nu))
    total = np.zeros((n_trunc + 1, n_trunc + 1))
    for word in perms:
        m = np.eye(n_trunc + 1)
        for ch in word:
            m = m @ (ad if ch == "d" else a)
        total += m
    return total / len(perms)

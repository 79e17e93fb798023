import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")


def random_generator(rng, n, sparsity=0.0):
    """Irreducible generator: a random cycle plus random extra rates."""
    Q = rng.uniform(0.1, 3.0, size=(n, n)) * (rng.random((n, n)) >= sparsity)
    perm = rng.permutation(n)
    for i in range(n):
        Q[perm[i], perm[(i + 1) % n]] = rng.uniform(0.1, 3.0)
    np.fill_diagonal(Q, 0.0)
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

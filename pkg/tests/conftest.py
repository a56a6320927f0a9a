import numpy as np
import pytest

from quenched_sft.scenario import build_bernoulli_oracle, build_example5, build_markov_oracle

MARKOV_WEIGHTS = [[1.0, 2.0], [0.5, 1.5]]


@pytest.fixture(scope="session")
def ex5():
    return build_example5()


@pytest.fixture(scope="session")
def ex5_tilt():
    return build_example5(psi="tilt")


@pytest.fixture(scope="session")
def bern():
    return build_bernoulli_oracle(3)


@pytest.fixture(scope="session")
def markov():
    return build_markov_oracle(MARKOV_WEIGHTS)


def words_of(n, b):
    """Every length-n word over 1..b in lexicographic order (matches the engine's code order)."""
    codes = np.arange(b**n)
    return (codes[:, None] // b ** np.arange(n - 1, -1, -1)) % b + 1


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])

import numpy as np
import pytest

from dynpop import games, types


@pytest.fixture(scope="session")
def hdh():
    return games.hawk_dove_hunger()


@pytest.fixture(scope="session")
def swap():
    return games.periodic_swap()


@pytest.fixture(scope="session")
def singleton_hd():
    return games.singleton_hawk_dove()


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


def make_singleton_fixed(payoffs):
    """One-type one-state game with constant action payoffs."""
    exprs = [[repr(float(v)) for v in payoffs]]
    return games.singleton(exprs, name="fixed")


@pytest.fixture(scope="session")
def dominant():
    """Single-state game where action 0 strictly dominates."""
    return make_singleton_fixed([1.0, 0.0])


@pytest.fixture(scope="session")
def uniform_hdh(hdh):
    return types.uniform_social_state(hdh)

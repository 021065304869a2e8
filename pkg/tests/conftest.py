import numpy as np
import pytest

from polyomwu.games import PolymatrixGame, StrategyProfile, random_zero_sum_game
from polyomwu.harness import get_qre
from polyomwu.rng import STREAM_MISC, substream

CORPUS_N = 10
CORPUS_ACTIONS = 10
CORPUS_TAU = 0.1
CORPUS_SEEDS = (0, 1, 2, 3, 4)


def random_profile(sizes, rng) -> StrategyProfile:
    """Interior random profile (Dirichlet(1) per player)."""
    return StrategyProfile(tuple(rng.dirichlet(np.ones(s)) for s in sizes))


def matching_pennies() -> PolymatrixGame:
    a = np.array([[1.0, -1.0], [-1.0, 1.0]])
    return PolymatrixGame((2, 2), {(0, 1): a, (1, 0): -a.T})


def zero_game(n=3, size=4) -> PolymatrixGame:
    payoffs = {}
    for i in range(n):
        for j in range(i + 1, n):
            payoffs[(i, j)] = np.zeros((size, size))
            payoffs[(j, i)] = np.zeros((size, size))
    return PolymatrixGame((size,) * n, payoffs)


@pytest.fixture(scope="session")
def corpus_games():
    """The experiment corpus: 5 random complete-graph games, one per seed."""
    return {s: random_zero_sum_game(CORPUS_N, CORPUS_ACTIONS, "complete", seed=s) for s in CORPUS_SEEDS}


@pytest.fixture(scope="session")
def corpus_qres(corpus_games):
    """QRE references at tau=0.1 for the corpus (shared with the harness cache)."""
    return {s: get_qre(g, CORPUS_TAU, 1e-10) for s, g in corpus_games.items()}


@pytest.fixture()
def rng():
    return substream(2024, STREAM_MISC)

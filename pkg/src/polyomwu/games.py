"""Zero-sum polymatrix games on interaction graphs.

A polymatrix game couples ``n`` players through an undirected graph; each edge
``(i, j)`` carries a pair of payoff matrices ``A_ij`` (for player ``i``) and
``A_ji`` (for player ``j``), and a player's utility is the sum of its edge
payoffs against its neighbors.  The game is zero-sum when the utilities of all
players sum to zero for every pure strategy profile; the random instances
generated here enforce the stronger pairwise condition ``A_ij = -A_ji^T``.

Games are immutable after construction and safe to share across concurrent
simulation runs; every operation in this module is pure.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

from .rng import STREAM_CHECK, STREAM_GAME, substream

SIMPLEX_TOL = 1e-12


def shannon_entropy(p: np.ndarray) -> float:
    """Shannon entropy ``-sum_k p(k) log p(k)`` with the ``0 log 0 = 0`` convention."""
    p = np.asarray(p, dtype=float)
    terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    return float(-terms.sum())


def _as_simplex(v, size: int | None = None) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(v, dtype=float))
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("probability vector must be a nonempty 1-D array")
    if size is not None and arr.size != size:
        raise ValueError(f"probability vector has length {arr.size}, expected {size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("probability vector has non-finite entries")
    if np.any(arr < 0.0):
        raise ValueError("probability vector has negative entries")
    if abs(arr.sum() - 1.0) > SIMPLEX_TOL:
        raise ValueError(f"probability vector sums to {arr.sum()!r}, not 1")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class StrategyProfile:
    """One probability vector per player; the joint mixed strategy."""

    probs: tuple[np.ndarray, ...]

    def __post_init__(self):
        validated = tuple(_as_simplex(p) for p in self.probs)
        object.__setattr__(self, "probs", validated)

    @property
    def n(self) -> int:
        return len(self.probs)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(p.size for p in self.probs)

    def concat(self) -> np.ndarray:
        return np.concatenate(self.probs)

    def to_lists(self) -> list[list[float]]:
        return [[float(x) for x in p] for p in self.probs]

    @classmethod
    def uniform(cls, sizes: Sequence[int]) -> "StrategyProfile":
        return cls(tuple(np.full(s, 1.0 / s) for s in sizes))

    @classmethod
    def from_concat(cls, vec: np.ndarray, sizes: Sequence[int]) -> "StrategyProfile":
        starts = np.cumsum([0] + list(sizes))
        if starts[-1] != len(vec):
            raise ValueError("concatenated vector length does not match sizes")
        return cls(tuple(np.asarray(vec[a:b], dtype=float) for a, b in zip(starts[:-1], starts[1:])))


@dataclass(frozen=True)
class GameStats:
    """Coupling constants of a game: max degree, max |payoff| entry, max action count."""

    d_max: int
    a_inf: float
    s_max: int

    def __post_init__(self):
        if self.d_max < 0 or self.a_inf < 0.0 or self.s_max < 1:
            raise ValueError(f"invalid game stats: {self}")


@dataclass(frozen=True, eq=False)
class PolymatrixGame:
    """Interaction graph plus one payoff matrix per directed edge.

    ``payoffs[(i, j)]`` has shape ``|S_i| x |S_j|`` and both directions of every
    undirected edge must be present.  Absent edges contribute zero payoff.
    """

    action_sizes: tuple[int, ...]
    payoffs: Mapping[tuple[int, int], np.ndarray]

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.action_sizes)
        if len(sizes) < 1 or any(s < 1 for s in sizes):
            raise ValueError("action_sizes must be positive")
        n = len(sizes)
        clean: dict[tuple[int, int], np.ndarray] = {}
        for (i, j), mat in self.payoffs.items():
            i, j = int(i), int(j)
            if i == j:
                raise ValueError(f"self-edge ({i},{i}) is not allowed")
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i},{j}) out of range for {n} players")
            arr = np.ascontiguousarray(np.asarray(mat, dtype=float))
            if arr.shape != (sizes[i], sizes[j]):
                raise ValueError(
                    f"payoff matrix for edge ({i},{j}) has shape {arr.shape}, "
                    f"expected {(sizes[i], sizes[j])}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"payoff matrix for edge ({i},{j}) has non-finite entries")
            arr.flags.writeable = False
            clean[(i, j)] = arr
        for (i, j) in clean:
            if (j, i) not in clean:
                raise ValueError(f"edge ({i},{j}) is missing its reverse matrix")
        object.__setattr__(self, "action_sizes", sizes)
        object.__setattr__(self, "payoffs", clean)

    @property
    def n(self) -> int:
        return len(self.action_sizes)

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Undirected edges as sorted (i, j) pairs with i < j."""
        return tuple(sorted({(min(i, j), max(i, j)) for (i, j) in self.payoffs}))

    def neighbors(self, i: int) -> tuple[int, ...]:
        return tuple(sorted(j for (a, j) in self.payoffs if a == i))

    def degree(self, i: int) -> int:
        return len(self.neighbors(i))

    @property
    def total_actions(self) -> int:
        return sum(self.action_sizes)

    @cached_property
    def segment_starts(self) -> np.ndarray:
        """Start offset of each player's block in concatenated vectors."""
        return np.cumsum([0] + list(self.action_sizes))[:-1]

    def payoff_matrix(self, i: int, j: int) -> np.ndarray:
        """A_ij, or a zero matrix when (i, j) is not an edge."""
        mat = self.payoffs.get((i, j))
        if mat is None:
            return np.zeros((self.action_sizes[i], self.action_sizes[j]))
        return mat

    @cached_property
    def full_matrix(self) -> np.ndarray:
        """Dense block matrix A with block (i, j) equal to A_ij; A @ pi stacks every
        player's expected action payoffs."""
        total = self.total_actions
        starts = self.segment_starts
        A = np.zeros((total, total))
        for (i, j), mat in self.payoffs.items():
            a, b = starts[i], starts[j]
            A[a : a + self.action_sizes[i], b : b + self.action_sizes[j]] = mat
        A.flags.writeable = False
        return A

    def player_rows(self, i: int) -> np.ndarray:
        """Rows of the full matrix belonging to player i (the concatenated A_i)."""
        a = self.segment_starts[i]
        return self.full_matrix[a : a + self.action_sizes[i], :]

    # -- serialization --------------------------------------------------

    def to_json_dict(self) -> dict:
        return {
            "n": self.n,
            "action_sizes": list(self.action_sizes),
            "edges": [
                {
                    "i": i,
                    "j": j,
                    "a_ij": [float(x) for x in self.payoffs[(i, j)].ravel()],
                    "a_ji": [float(x) for x in self.payoffs[(j, i)].ravel()],
                }
                for (i, j) in self.edges
            ],
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PolymatrixGame":
        sizes = [int(s) for s in doc["action_sizes"]]
        if int(doc["n"]) != len(sizes):
            raise ValueError("player count does not match action_sizes")
        payoffs: dict[tuple[int, int], np.ndarray] = {}
        for e in doc["edges"]:
            i, j = int(e["i"]), int(e["j"])
            payoffs[(i, j)] = np.asarray(e["a_ij"], dtype=float).reshape(sizes[i], sizes[j])
            payoffs[(j, i)] = np.asarray(e["a_ji"], dtype=float).reshape(sizes[j], sizes[i])
        return cls(tuple(sizes), payoffs)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "PolymatrixGame":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def uniform_profile(game: PolymatrixGame) -> StrategyProfile:
    return StrategyProfile.uniform(game.action_sizes)


def _check_profile(game: PolymatrixGame, profile: StrategyProfile) -> None:
    if profile.sizes != game.action_sizes:
        raise ValueError(
            f"profile sizes {profile.sizes} do not match game action sizes {game.action_sizes}"
        )


def payoff_vector(game: PolymatrixGame, profile: StrategyProfile, i: int) -> np.ndarray:
    """Expected payoff of each of player i's actions: sum_j A_ij pi_j over neighbors."""
    if not (0 <= i < game.n):
        raise IndexError(f"player index {i} out of range")
    _check_profile(game, profile)
    q = np.zeros(game.action_sizes[i])
    for j in game.neighbors(i):
        q += game.payoffs[(i, j)] @ profile.probs[j]
    return q


def utility(game: PolymatrixGame, profile: StrategyProfile, i: int, tau: float = 0.0) -> float:
    """Expected utility of player i, entropy-regularized at temperature tau >= 0."""
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    q = payoff_vector(game, profile, i)
    u = float(profile.probs[i] @ q)
    if tau > 0.0:
        u += tau * shannon_entropy(profile.probs[i])
    return u


def cross_sum(game: PolymatrixGame, p: StrategyProfile, q: StrategyProfile) -> float:
    """sum_i [p_i . A_i q + q_i . A_i p]; identically zero for zero-sum games."""
    _check_profile(game, p)
    _check_profile(game, q)
    A = game.full_matrix
    pc, qc = p.concat(), q.concat()
    return float(pc @ (A @ qc) + qc @ (A @ pc))


@dataclass(frozen=True)
class ZeroSumReport:
    mode: str
    passed: bool
    max_residual: float
    samples: int = 0


def check_zero_sum(
    game: PolymatrixGame,
    mode: str = "exact-pairwise",
    samples: int = 1000,
    tol: float = 1e-9,
    seed: int = 0,
) -> ZeroSumReport:
    """Verify the zero-sum property.

    ``exact-pairwise`` checks ``A_ij + A_ji^T = 0`` entrywise, the sufficient
    condition the random generator enforces.  ``sampled`` draws pure profiles
    uniformly and checks ``|sum_i u_i(s)| <= tol``.  The verdict carries the
    max observed residual; no exception is raised on failure.
    """
    if mode == "exact-pairwise":
        residual = 0.0
        for (i, j) in game.edges:
            residual = max(residual, float(np.abs(game.payoffs[(i, j)] + game.payoffs[(j, i)].T).max()))
        return ZeroSumReport(mode=mode, passed=residual <= tol, max_residual=residual)
    if mode == "sampled":
        if samples < 1:
            raise ValueError("samples must be >= 1")
        rng = substream(seed, STREAM_CHECK)
        sizes = game.action_sizes
        residual = 0.0
        for _ in range(samples):
            s = [int(rng.integers(sz)) for sz in sizes]
            total = 0.0
            for (i, j) in game.edges:
                total += game.payoffs[(i, j)][s[i], s[j]] + game.payoffs[(j, i)][s[j], s[i]]
            residual = max(residual, abs(total))
        return ZeroSumReport(mode=mode, passed=residual <= tol, max_residual=residual, samples=samples)
    raise ValueError(f"unknown mode {mode!r}")


def complete_graph_edges(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def random_zero_sum_game(
    n: int,
    action_size: int | Sequence[int],
    graph: str | Iterable[tuple[int, int]] = "complete",
    seed: int = 0,
) -> PolymatrixGame:
    """Random zero-sum polymatrix game: per edge, A_ij ~ iid Uniform[-1, 1] and
    A_ji = -A_ij^T.  Deterministic given the seed (one RNG substream per edge)."""
    if n < 2:
        raise ValueError("need at least 2 players")
    sizes = tuple([int(action_size)] * n) if np.isscalar(action_size) else tuple(int(s) for s in action_size)
    if len(sizes) != n:
        raise ValueError("action_size list length must equal n")
    if graph == "complete":
        edges = complete_graph_edges(n)
    else:
        edges = [(min(int(i), int(j)), max(int(i), int(j))) for (i, j) in graph]
        if any(i == j for (i, j) in edges):
            raise ValueError("graph contains a self-edge")
        if len(set(edges)) != len(edges):
            raise ValueError("graph contains a duplicate edge")
    payoffs: dict[tuple[int, int], np.ndarray] = {}
    for (i, j) in edges:
        rng = substream(seed, STREAM_GAME, i, j)
        a = rng.uniform(-1.0, 1.0, size=(sizes[i], sizes[j]))
        payoffs[(i, j)] = a
        payoffs[(j, i)] = -a.T
    return PolymatrixGame(sizes, payoffs)


def game_stats(game: PolymatrixGame) -> GameStats:
    a_inf = 0.0
    for mat in game.payoffs.values():
        if mat.size:
            a_inf = max(a_inf, float(np.abs(mat).max()))
    d_max = max((game.degree(i) for i in range(game.n)), default=0)
    return GameStats(d_max=d_max, a_inf=a_inf, s_max=max(game.action_sizes))

"""Equilibrium metrics: KL divergences, QRE/NE gaps, a high-precision QRE
reference, and per-player regret.

The quantal response equilibrium (QRE) at temperature tau is the fixed point
``pi_i = softmax(A_i pi / tau)`` for every player; it is unique in zero-sum
polymatrix games.  All inner maxima over the simplex use exact closed forms
(max coordinate at tau = 0, tau-scaled logsumexp otherwise), always with a
max-shift so small temperatures cannot overflow.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .dynamics import (
    logsumexp,
    safe_rate,
    segment_log_normalize,
    segment_softmax,
    segments_for,
)
from .games import (
    PolymatrixGame,
    StrategyProfile,
    game_stats,
    payoff_vector,
    shannon_entropy,
)


class InfiniteDivergenceError(ValueError):
    """KL divergence is infinite: q has a zero where p has mass."""


def _clip_roundoff(v: float) -> float:
    # Quantities that are >= 0 in exact arithmetic may round to tiny negatives.
    return 0.0 if -1e-12 < v < 0.0 else v


def kl(p: np.ndarray, q: np.ndarray) -> float:
    """KL divergence sum_k p(k) log(p(k)/q(k)) with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("p and q must have equal length")
    mask = p > 0.0
    if np.any(q[mask] <= 0.0):
        raise InfiniteDivergenceError("q vanishes on the support of p")
    ps = p[mask]
    return _clip_roundoff(float(np.sum(ps * (np.log(ps) - np.log(q[mask])))))


def kl_profile(p: StrategyProfile, q: StrategyProfile) -> float:
    """Sum of per-player KL divergences."""
    if p.sizes != q.sizes:
        raise ValueError("profiles have mismatched shapes")
    return _clip_roundoff(sum(kl(pi, qi) for pi, qi in zip(p.probs, q.probs)))


def br_value(payoff_vec: np.ndarray, tau: float) -> float:
    """Best attainable entropy-regularized value against a fixed payoff vector.

    ``max_p <p, q> + tau H(p)`` equals ``tau * logsumexp(q / tau)`` for tau > 0
    and ``max_k q_k`` at tau = 0.
    """
    q = np.asarray(payoff_vec, dtype=float)
    if q.size == 0:
        raise ValueError("payoff vector must be nonempty")
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    if tau == 0.0:
        return float(q.max())
    return tau * logsumexp(q / tau)


def qre_gap(game: PolymatrixGame, profile: StrategyProfile, tau: float) -> float:
    """Largest per-player gain from a unilateral deviation in regularized utility."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    worst = -math.inf
    for i in range(game.n):
        q = payoff_vector(game, profile, i)
        u = float(profile.probs[i] @ q) + tau * shannon_entropy(profile.probs[i])
        worst = max(worst, br_value(q, tau) - u)
    return _clip_roundoff(worst)


def ne_gap(game: PolymatrixGame, profile: StrategyProfile) -> float:
    """Largest per-player gain from a unilateral deviation in plain utility."""
    worst = -math.inf
    for i in range(game.n):
        q = payoff_vector(game, profile, i)
        worst = max(worst, float(q.max()) - float(profile.probs[i] @ q))
    return _clip_roundoff(worst)


def qre_residual(game: PolymatrixGame, profile: StrategyProfile, tau: float) -> float:
    """Max over players of the inf-norm fixed-point residual pi_i - softmax(A_i pi / tau)."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    worst = 0.0
    for i in range(game.n):
        q = payoff_vector(game, profile, i) / tau
        target = np.exp(q - logsumexp(q))
        worst = max(worst, float(np.abs(profile.probs[i] - target).max()))
    return worst


@dataclass(frozen=True)
class QreSolution:
    """A computed QRE reference point with its fixed-point residual."""

    profile: StrategyProfile
    tau: float
    residual: float
    iterations: int
    converged: bool
    residual_history: Optional[tuple[float, ...]] = None

    def to_json_dict(self) -> dict:
        return {
            "action_sizes": list(self.profile.sizes),
            "probs": self.profile.to_lists(),
            "tau": self.tau,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "QreSolution":
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        profile = StrategyProfile(tuple(np.asarray(p, dtype=float) for p in doc["probs"]))
        return cls(
            profile=profile,
            tau=float(doc["tau"]),
            residual=float(doc["residual"]),
            iterations=int(doc["iterations"]),
            converged=bool(doc["converged"]),
        )


def compute_qre(
    game: PolymatrixGame,
    tau: float,
    tol: float = 1e-10,
    max_iter: int = 500_000,
    track_residuals: bool = False,
) -> QreSolution:
    """Solve for the QRE by synchronous single-timescale optimistic MWU.

    Runs the log-space kernel at the synchronous safe rate from the uniform
    profile until the fixed-point residual drops below ``tol``.  On iteration
    exhaustion the best iterate seen is returned with ``converged=False``.
    """
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    stats = game_stats(game)
    eta = safe_rate("sync", stats, tau).eta
    seg = segments_for(game.action_sizes)
    A = game.full_matrix
    log_uniform = np.repeat(-np.log(seg.sizes.astype(float)), seg.sizes)
    main = log_uniform.copy()
    extrap = log_uniform.copy()

    def residual_of(logits: np.ndarray) -> float:
        p = np.exp(logits)
        target = segment_softmax((A @ p) / tau, seg)
        return float(np.abs(p - target).max())

    res = residual_of(main)
    history = [res] if track_residuals else None
    best_res, best_main = res, main.copy()
    iterations = 0
    decay = 1.0 - eta * tau
    if res > tol:
        for t in range(max_iter):
            f = A @ np.exp(extrap)
            if t >= 1:
                main = segment_log_normalize(decay * main + eta * f, seg)
                res = residual_of(main)
                if history is not None:
                    history.append(res)
                if res < best_res:
                    best_res, best_main = res, main.copy()
            extrap = segment_log_normalize(decay * main + eta * f, seg)
            iterations = t + 1
            if best_res <= tol:
                break
    profile = StrategyProfile.from_concat(np.exp(best_main), game.action_sizes)
    return QreSolution(
        profile=profile,
        tau=tau,
        residual=best_res,
        iterations=iterations,
        converged=best_res <= tol,
        residual_history=None if history is None else tuple(history),
    )


def regret(
    game: PolymatrixGame,
    extrapolation_history: Sequence[StrategyProfile],
    i: int,
    tau: float,
) -> float:
    """Cumulative shortfall of player i versus the best fixed strategy in
    hindsight over the given extrapolation sequence.

    The comparator maximum is exact: the entropy-regularized linear objective
    has a softmax maximizer, giving ``T tau logsumexp(v / (T tau))`` for the
    accumulated payoff vector v (``max_k v_k`` at tau = 0).
    """
    T = len(extrapolation_history)
    if T == 0:
        raise ValueError("empty history")
    if tau < 0.0:
        raise ValueError("tau must be nonnegative")
    v = np.zeros(game.action_sizes[i])
    realized = 0.0
    for prof in extrapolation_history:
        q = payoff_vector(game, prof, i)
        v += q
        realized += float(prof.probs[i] @ q)
        if tau > 0.0:
            realized += tau * shannon_entropy(prof.probs[i])
    if tau == 0.0:
        best = float(v.max())
    else:
        best = T * tau * logsumexp(v / (T * tau))
    return float(best - realized)


@dataclass(frozen=True)
class RegretReport:
    """Per-player regret at one horizon; the sum over players is nonnegative
    (up to roundoff) in zero-sum games."""

    values: tuple[float, ...]
    tau: float
    horizon: int

    @property
    def total(self) -> float:
        return float(sum(self.values))


def regret_report(
    game: PolymatrixGame, extrapolation_history: Sequence[StrategyProfile], tau: float
) -> RegretReport:
    values = tuple(regret(game, extrapolation_history, i, tau) for i in range(game.n))
    return RegretReport(values=values, tau=tau, horizon=len(extrapolation_history))


def qre_gap_kl_bound(
    game: PolymatrixGame, profile: StrategyProfile, qre: QreSolution, tau: float
) -> float:
    """Upper bound on the QRE gap in terms of KL divergences to/from the QRE:
    ``tau KL(pi | pi*) + (d^2 a^2 / tau) KL(pi* | pi)``."""
    if tau <= 0.0:
        raise ValueError("tau must be positive")
    stats = game_stats(game)
    coef = (stats.d_max * stats.a_inf) ** 2 / tau
    return tau * kl_profile(profile, qre.profile) + coef * kl_profile(qre.profile, profile)

"""Log-space optimistic multiplicative-weights kernel and learning rates.

The multiplicative update ``pi(k) <- pi(k)^(1 - rate*tau) * exp(rate * q_k)``
(normalized over the simplex) is implemented on log-probabilities:

    logits <- (1 - rate*tau) * logits + rate * q,  then re-center by logsumexp

which is the same map but immune to underflow over long horizons.  One kernel
serves the main update, the single-timescale extrapolation, and the
two-timescale extrapolation; only the rate differs.

Kernel functions are pure and re-entrant; an AgentState is owned by exactly
one simulation run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .delays import DelayConstants
from .games import GameStats


def logsumexp(x: np.ndarray) -> float:
    """Max-shifted log(sum(exp(x))); safe for large-magnitude inputs."""
    x = np.asarray(x, dtype=float)
    m = float(x.max())
    return m + math.log(float(np.exp(x - m).sum()))


def log_normalize(logits: np.ndarray) -> np.ndarray:
    """Shift logits so they are exact log-probabilities."""
    logits = np.asarray(logits, dtype=float)
    return logits - logsumexp(logits)


def normalize(logits: np.ndarray) -> np.ndarray:
    """Softmax with max-shift; sums to 1 within 1e-12."""
    logits = np.asarray(logits, dtype=float)
    if not np.all(np.isfinite(logits)):
        raise ValueError("logits must be finite")
    return np.exp(log_normalize(logits))


def mwu_step(logits: np.ndarray, feedback: np.ndarray, rate: float, tau: float = 0.0) -> np.ndarray:
    """One multiplicative-weights step in log space.

    Returns ``(1 - rate*tau) * logits + rate * feedback`` re-centered to an
    exact log-probability vector.  Requires ``rate * tau <= 1``.
    """
    logits = np.asarray(logits, dtype=float)
    feedback = np.asarray(feedback, dtype=float)
    if logits.shape != feedback.shape:
        raise ValueError("logits and feedback must have equal length")
    if not np.all(np.isfinite(feedback)):
        raise ValueError("feedback must be finite")
    if rate <= 0.0:
        raise ValueError("rate must be positive")
    if tau < 0.0 or rate * tau > 1.0 + 1e-15:
        raise ValueError("need 0 <= rate*tau <= 1")
    out = (1.0 - rate * tau) * logits + rate * feedback
    return out - logsumexp(out)


def two_timescale_rate(eta: float, tau: float, gamma: int) -> float:
    """Extrapolation rate matched to a delay of gamma steps.

    Solves ``1 - eta_bar*tau = (1 - eta*tau)^(gamma+1)`` for ``eta_bar``; the
    tau -> 0 limit is ``(gamma+1) * eta``.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    if tau < 0.0 or eta * tau >= 1.0:
        raise ValueError("need 0 <= eta*tau < 1")
    if tau == 0.0:
        return (gamma + 1) * eta
    return (1.0 - (1.0 - eta * tau) ** (gamma + 1)) / tau


@dataclass(frozen=True)
class RateSetting:
    """Resolved learning rates for one run.

    In single-timescale mode the extrapolation reuses ``eta``; two-timescale
    mode inflates it to ``eta_bar`` to compensate a known delay bound.
    """

    mode: str
    tau: float
    eta: float
    eta_bar: float
    gamma: Optional[int] = None
    constants: Optional[DelayConstants] = None

    def __post_init__(self):
        if self.mode not in ("single", "two-timescale"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (self.eta > 0.0 and self.eta_bar > 0.0):
            raise ValueError("learning rates must be strictly positive")
        if self.eta * self.tau >= 1.0 or self.eta_bar * self.tau >= 1.0:
            raise ValueError("need eta*tau < 1 and eta_bar*tau < 1")
        if self.mode == "single" and self.eta_bar != self.eta:
            raise ValueError("single-timescale mode requires eta_bar == eta")
        if self.eta_bar < self.eta - 1e-15:
            raise ValueError("eta_bar must be >= eta")


def safe_rate(
    regime: str,
    stats: GameStats,
    tau: float,
    *,
    gamma: int | None = None,
    constants: DelayConstants | None = None,
) -> RateSetting:
    """Largest learning rate permitted by the convergence guarantee of a regime.

    regimes (d = max degree, a = max |payoff| entry):

    * ``sync``:      eta = min{1/(2 tau), 1/(4 d a)}; single timescale
    * ``random``:    eta = min{tau / (24 d^2 a^2 (L+1)), (zeta-1)/(tau zeta)}
                     with (zeta, L) from ``delay_constants``; single timescale
    * ``fixed``:     eta = min{1/(2 tau (gamma+1)), 1/(5 d a (gamma+1)^2)};
                     two-timescale with the matched extrapolation rate
    * ``permuted``:  eta = min{1/(2 tau (gamma+1)), 1/(28 d a (gamma+1)^2.5)};
                     two-timescale with the matched extrapolation rate

    A degenerate game with a = 0 falls back to the tau-only branch.
    """
    d, a = stats.d_max, stats.a_inf
    regime = {"random-delay": "random", "fixed-delay": "fixed"}.get(regime, regime)

    def _min_branch(*branches: float) -> float:
        finite = [b for b in branches if math.isfinite(b) and b > 0.0]
        if not finite:
            raise ValueError(f"no finite learning-rate branch for regime {regime!r}")
        return min(finite)

    if regime == "sync":
        if tau < 0.0:
            raise ValueError("tau must be nonnegative")
        b_tau = 1.0 / (2.0 * tau) if tau > 0.0 else math.inf
        b_game = 1.0 / (4.0 * d * a) if d * a > 0.0 else math.inf
        eta = _min_branch(b_tau, b_game)
        return RateSetting(mode="single", tau=tau, eta=eta, eta_bar=eta)

    if tau <= 0.0:
        raise ValueError("delay regimes require tau > 0")

    if regime == "random":
        if constants is None:
            raise ValueError("regime 'random' needs delay constants (zeta, L)")
        b_stat = (
            tau / (24.0 * d * d * a * a * (constants.L + 1.0)) if d * a > 0.0 else math.inf
        )
        b_tail = (constants.zeta - 1.0) / (tau * constants.zeta)
        eta = _min_branch(b_stat, b_tail)
        return RateSetting(mode="single", tau=tau, eta=eta, eta_bar=eta, constants=constants)

    if regime in ("fixed", "permuted"):
        if gamma is None or gamma < 0:
            raise ValueError(f"regime {regime!r} needs gamma >= 0")
        g1 = gamma + 1.0
        b_tau = 1.0 / (2.0 * tau * g1)
        if d * a > 0.0:
            b_game = 1.0 / (5.0 * d * a * g1 * g1) if regime == "fixed" else 1.0 / (
                28.0 * d * a * g1 ** 2.5
            )
        else:
            b_game = math.inf
        eta = _min_branch(b_tau, b_game)
        eta_bar = two_timescale_rate(eta, tau, gamma)
        return RateSetting(mode="two-timescale", tau=tau, eta=eta, eta_bar=eta_bar, gamma=gamma)

    raise ValueError(f"unknown regime {regime!r}")


@dataclass
class AgentState:
    """Per-player log-probabilities of the main and extrapolation iterates."""

    main_logits: np.ndarray
    extrap_logits: np.ndarray
    eta: float
    eta_bar: float
    tau: float = 0.0

    def __post_init__(self):
        self.main_logits = np.asarray(self.main_logits, dtype=float).copy()
        self.extrap_logits = np.asarray(self.extrap_logits, dtype=float).copy()
        if not (np.all(np.isfinite(self.main_logits)) and np.all(np.isfinite(self.extrap_logits))):
            raise ValueError("logits must be finite")
        if self.eta <= 0.0 or self.eta_bar < self.eta - 1e-15:
            raise ValueError("need 0 < eta <= eta_bar")

    @classmethod
    def uniform(cls, size: int, eta: float, eta_bar: float | None = None, tau: float = 0.0) -> "AgentState":
        logits = np.full(size, -math.log(size))
        return cls(logits.copy(), logits.copy(), eta, eta if eta_bar is None else eta_bar, tau)

    def main_probs(self) -> np.ndarray:
        return normalize(self.main_logits)

    def extrap_probs(self) -> np.ndarray:
        return normalize(self.extrap_logits)

    def step_main(self, feedback: np.ndarray) -> None:
        self.main_logits = mwu_step(self.main_logits, feedback, self.eta, self.tau)

    def step_extrap(self, feedback: np.ndarray) -> None:
        """Extrapolate from the current main iterate with the same feedback."""
        self.extrap_logits = mwu_step(self.main_logits, feedback, self.eta_bar, self.tau)


# -- segment numerics over concatenated per-player vectors -------------------


@dataclass(frozen=True)
class Segments:
    """Player block layout of a concatenated vector."""

    starts: np.ndarray
    sizes: np.ndarray

    @property
    def total(self) -> int:
        return int(self.sizes.sum())


def segments_for(action_sizes: Sequence[int]) -> Segments:
    sizes = np.asarray(action_sizes, dtype=np.intp)
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.intp)
    return Segments(starts=starts, sizes=sizes)


def segment_logsumexp(x: np.ndarray, seg: Segments) -> np.ndarray:
    """Per-player logsumexp of a concatenated vector (max-shifted)."""
    m = np.maximum.reduceat(x, seg.starts)
    shifted = np.exp(x - np.repeat(m, seg.sizes))
    return m + np.log(np.add.reduceat(shifted, seg.starts))


def segment_log_normalize(x: np.ndarray, seg: Segments) -> np.ndarray:
    return x - np.repeat(segment_logsumexp(x, seg), seg.sizes)


def segment_softmax(x: np.ndarray, seg: Segments) -> np.ndarray:
    return np.exp(segment_log_normalize(x, seg))

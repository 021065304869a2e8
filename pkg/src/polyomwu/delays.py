"""Feedback-delay schedules.

At iteration ``t`` each agent ``i`` receives the payoff computed from the
extrapolation profile of iteration ``kappa_i(t) = max(t - delay, 0)``.  This
module generates the per-agent index sequences for every supported delay
regime and supplies the tail/moment constants the learning-rate bounds consume.

Variants:

* ``none``      no delay, ``kappa = t``
* ``fixed``     constant known delay ``gamma``
* ``uniform``   delay drawn uniformly from ``{0, ..., gamma}`` per step
* ``poisson``   delay drawn from a Poisson distribution (optionally capped)
* ``permuted``  the feedback stream is a random permutation of the iteration
  indices with displacement at most ``gamma``; every index >= 1 is delivered
  exactly once (index 0 may repeat as a filler during the start-up phase)
* ``file``      adversarial replay of an explicit (agent, t, kappa) table

A schedule instance is stateful and single-owner: ``next_kappa(i, t)`` must be
called exactly once per (agent, iteration) in increasing ``t``.  Independent
runs use independent instances; ``replay()`` rebuilds a fresh copy from the
stored seed so sequences can be re-verified.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .rng import STREAM_DELAY, substream

VARIANTS = ("none", "fixed", "uniform", "poisson", "permuted", "file")


class OutOfOrderError(RuntimeError):
    """next_kappa was called out of order for some agent."""


@dataclass(frozen=True)
class DelayConstants:
    """Tail-decay constants (zeta, L) and a second-moment bound sigma2."""

    zeta: float
    L: float
    sigma2: float

    def __post_init__(self):
        if not (self.zeta > 1.0 and self.L >= 0.0 and self.sigma2 >= 0.0):
            raise ValueError(f"invalid delay constants: {self}")


def delay_constants(variant: str, *, gamma: int | None = None, mean: float | None = None) -> DelayConstants:
    """Constants for the statistical-delay learning-rate bound.

    For delays bounded by ``gamma``: zeta = 1 + 1/gamma, L = e*gamma*(gamma+1),
    sigma2 = gamma*(gamma+1).  For Poisson delays with mean ``mean``:
    zeta = 1 + 1/mean, L = e*mean*(1+mean), sigma2 = mean*(1+mean).
    """
    if variant in ("uniform", "bounded", "bounded-uniform"):
        if gamma is None or gamma < 1:
            raise ValueError("bounded delays need gamma >= 1")
        g = float(gamma)
        return DelayConstants(zeta=1.0 + 1.0 / g, L=math.e * g * (g + 1.0), sigma2=g * (g + 1.0))
    if variant == "poisson":
        if mean is None or mean <= 0.0:
            raise ValueError("poisson delays need mean > 0")
        m = float(mean)
        return DelayConstants(zeta=1.0 + 1.0 / m, L=math.e * m * (1.0 + m), sigma2=m * (1.0 + m))
    raise ValueError(f"no delay constants for variant {variant!r}")


class DelaySchedule:
    """Generator of per-agent feedback indices kappa_i(t); see module docstring."""

    def __init__(
        self,
        variant: str,
        n: int,
        *,
        gamma: int | None = None,
        mean: float | None = None,
        cap: int | None = None,
        seed: int = 0,
        table: dict[tuple[int, int], int] | None = None,
    ):
        if variant not in VARIANTS:
            raise ValueError(f"unknown delay variant {variant!r}")
        if n < 1:
            raise ValueError("need at least one agent")
        if variant in ("fixed", "uniform", "permuted"):
            if gamma is None or gamma < 0:
                raise ValueError(f"variant {variant!r} needs gamma >= 0")
        if variant == "poisson" and (mean is None or mean < 0.0):
            raise ValueError("variant 'poisson' needs mean >= 0")
        if variant == "file" and table is None:
            raise ValueError("variant 'file' needs a (agent, t) -> kappa table")
        self.variant = variant
        self.n = n
        self.gamma = None if gamma is None else int(gamma)
        self.mean = None if mean is None else float(mean)
        self.cap = None if cap is None else int(cap)
        self.seed = int(seed)
        self._table = dict(table) if table is not None else None
        self._next_t = [0] * n
        if variant in ("uniform", "poisson", "permuted"):
            self._rngs = [substream(self.seed, STREAM_DELAY, i) for i in range(n)]
        else:
            self._rngs = None
        # permuted: per-agent list of undelivered indices >= 1 inside the window
        self._pending: list[list[int]] = [[] for _ in range(n)]

    # -- factories -------------------------------------------------------

    @classmethod
    def none(cls, n: int) -> "DelaySchedule":
        return cls("none", n)

    @classmethod
    def fixed(cls, n: int, gamma: int) -> "DelaySchedule":
        return cls("fixed", n, gamma=gamma)

    @classmethod
    def uniform(cls, n: int, gamma: int, seed: int = 0) -> "DelaySchedule":
        return cls("uniform", n, gamma=gamma, seed=seed)

    @classmethod
    def poisson(cls, n: int, mean: float, seed: int = 0, cap: int | None = None) -> "DelaySchedule":
        return cls("poisson", n, mean=mean, seed=seed, cap=cap)

    @classmethod
    def permuted(cls, n: int, gamma: int, seed: int = 0) -> "DelaySchedule":
        return cls("permuted", n, gamma=gamma, seed=seed)

    @classmethod
    def from_file(cls, path, n: int, gamma: int | None = None) -> "DelaySchedule":
        table = load_permutation_file(path)
        agents = {i for (i, _) in table}
        if agents and max(agents) >= n:
            raise ValueError(f"table references agent {max(agents)} but n={n}")
        sched = cls("file", n, gamma=gamma, table=table)
        sched._path = path
        return sched

    # -- core ---------------------------------------------------------------

    @property
    def max_lag(self) -> Optional[int]:
        """Upper bound on t - kappa_i(t), or None when unbounded (uncapped poisson)."""
        if self.variant == "none":
            return 0
        if self.variant in ("fixed", "uniform", "permuted"):
            return self.gamma
        if self.variant == "poisson":
            return self.cap
        return max((t - k for (_, t), k in self._table.items()), default=0)

    def replay(self) -> "DelaySchedule":
        """Fresh schedule with identical parameters (and therefore identical draws)."""
        return DelaySchedule(
            self.variant,
            self.n,
            gamma=self.gamma,
            mean=self.mean,
            cap=self.cap,
            seed=self.seed,
            table=self._table,
        )

    def next_kappa(self, i: int, t: int) -> int:
        """Feedback index for agent i at iteration t; call once per (i, t), in order."""
        if not (0 <= i < self.n):
            raise IndexError(f"agent {i} out of range")
        if t != self._next_t[i]:
            raise OutOfOrderError(
                f"agent {i}: expected iteration {self._next_t[i]}, got {t}"
            )
        self._next_t[i] = t + 1

        if self.variant == "none":
            return t
        if self.variant == "fixed":
            return max(t - self.gamma, 0)
        if self.variant == "uniform":
            d = int(self._rngs[i].integers(0, self.gamma + 1))
            return max(t - d, 0)
        if self.variant == "poisson":
            d = int(self._rngs[i].poisson(self.mean))
            if self.cap is not None:
                d = min(d, self.cap)
            return max(t - d, 0)
        if self.variant == "file":
            try:
                return self._table[(i, t)]
            except KeyError:
                raise KeyError(f"permutation table has no entry for agent {i}, t {t}") from None
        return self._next_permuted(i, t)

    def _next_permuted(self, i: int, t: int) -> int:
        # Undelivered indices >= 1 live in pending; the window is [t - gamma, t].
        # The boundary index t - gamma is force-delivered so displacement never
        # exceeds gamma; index 0 is a repeatable filler while 0 is in the window.
        pending = self._pending[i]
        if t >= 1:
            pending.append(t)
        boundary = t - self.gamma
        if boundary >= 1 and pending and pending[0] == boundary:
            return pending.pop(0)
        options = len(pending) + (1 if boundary <= 0 else 0)
        pick = int(self._rngs[i].integers(options))
        if boundary <= 0:
            if pick == 0:
                return 0
            pick -= 1
        return pending.pop(pick)


@dataclass(frozen=True)
class ScheduleReport:
    """Replay summary for one agent; `ok` aggregates the variant's invariants."""

    variant: str
    agent: int
    horizon: int
    gamma: Optional[int]
    kappas: np.ndarray
    in_range: bool
    max_displacement: int
    mean_tail_displacement: float
    duplicates: tuple[int, ...]
    missing: tuple[int, ...]
    ok: bool = field(default=False)


def validate_schedule(schedule: DelaySchedule, horizon: int, i: int) -> ScheduleReport:
    """Replay kappa_i(0..horizon-1) and report displacement, duplicate and
    coverage statistics.  Violations are carried in the report, not raised."""
    fresh = schedule.replay()
    ts = np.arange(horizon)
    kappas = np.array([fresh.next_kappa(i, int(t)) for t in ts], dtype=int)
    disps = ts - kappas
    in_range = bool(np.all(kappas >= 0) and np.all(kappas <= ts))
    gamma = schedule.gamma
    if gamma is not None and horizon > gamma:
        mean_tail = float(disps[gamma:].mean())
    else:
        mean_tail = float(disps.mean()) if horizon else 0.0
    seen: set[int] = set()
    dups: list[int] = []
    for k in kappas:
        k = int(k)
        if k >= 1:
            if k in seen:
                dups.append(k)
            seen.add(k)
    missing: tuple[int, ...] = ()
    if schedule.variant == "permuted":
        upper = horizon - gamma - 1
        missing = tuple(s for s in range(1, upper + 1) if s not in seen)

    ok = in_range
    if schedule.variant == "none":
        ok = ok and int(disps.max(initial=0)) == 0
    if gamma is not None and schedule.variant in ("fixed", "uniform", "permuted", "file"):
        ok = ok and int(disps.max(initial=0)) <= gamma
    if schedule.variant == "poisson" and schedule.cap is not None:
        ok = ok and int(disps.max(initial=0)) <= schedule.cap
    if schedule.variant in ("permuted", "file"):
        ok = ok and not dups
    if schedule.variant == "permuted":
        ok = ok and not missing
    return ScheduleReport(
        variant=schedule.variant,
        agent=i,
        horizon=horizon,
        gamma=gamma,
        kappas=kappas,
        in_range=in_range,
        max_displacement=int(disps.max(initial=0)),
        mean_tail_displacement=mean_tail,
        duplicates=tuple(dups),
        missing=missing,
        ok=ok,
    )


def load_permutation_file(path) -> dict[tuple[int, int], int]:
    """Parse an adversarial-replay file: one whitespace-separated (i, t, kappa)
    integer triple per line; blank lines and #-comments allowed."""
    table: dict[tuple[int, int], int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'i t kappa', got {line!r}")
            i, t, k = (int(p) for p in parts)
            if not (0 <= k <= t):
                raise ValueError(f"{path}:{lineno}: kappa must satisfy 0 <= kappa <= t")
            if (i, t) in table:
                raise ValueError(f"{path}:{lineno}: duplicate entry for agent {i}, t {t}")
            table[(i, t)] = k
    return table


def save_permutation_file(path, table: dict[tuple[int, int], int]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for (i, t) in sorted(table):
            fh.write(f"{i} {t} {table[(i, t)]}\n")

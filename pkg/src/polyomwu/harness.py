"""Simulation harness: optimistic MWU over a game, rates, and a delay schedule.

One iteration t of a run does, for every agent i:

1. obtain the feedback index kappa_i(t) from the delay schedule;
2. form the delayed feedback f_i = A_i pibar(kappa_i(t)) from the stored
   extrapolation history;
3. for t >= 1, update the main iterate with rate eta;
4. update the extrapolation iterate from the new main iterate with rate
   eta_bar, using the *same* feedback (eta_bar = eta in single-timescale mode).

Both iterates start uniform.  A recorded row at time t holds the metrics of
the time-t objects: kl_main = KL(pi* | pi(t)), kl_extrap = KL(pi* | pibar(t)),
and gap/regret metrics evaluated on the extrapolation sequence.  Rows are
recorded just before step 4, so row t sees pibar(t) from the previous
iteration and pi(t) from this one.

A single run is strictly sequential; separate seeds own their state and may
execute concurrently over the shared read-only game and QRE reference.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .delays import DelaySchedule, delay_constants
from .dynamics import (
    RateSetting,
    safe_rate,
    segment_log_normalize,
    segment_logsumexp,
    segments_for,
    two_timescale_rate,
)
from .games import (
    PolymatrixGame,
    StrategyProfile,
    GameStats,
    game_stats,
    random_zero_sum_game,
)
from .metrics import QreSolution, compute_qre, kl_profile, _clip_roundoff

CSV_CORE = ("kl_main", "kl_extrap", "qre_gap", "ne_gap")
KNOWN_METRICS = CSV_CORE + ("regret", "potential")
DELAY_CHOICES = ("none", "fixed", "uniform", "poisson", "permuted", "file")


class DivergenceError(RuntimeError):
    """Iterates left the finite range; carries the offending iteration."""

    def __init__(self, t: int, seed: Optional[int] = None):
        self.t = t
        self.seed = seed
        where = f" (seed {seed})" if seed is not None else ""
        super().__init__(f"non-finite iterate at iteration {t}{where}")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run: game source, rates, delays, horizon."""

    tau: float
    horizon: int
    eta: float | str = "safe"
    mode: str = "single"
    eta_bar: float | str | None = None
    delay: str = "none"
    gamma: int = 0
    pmean: float = 1.0
    pcap: int | None = None
    record_every: int = 1
    seeds: tuple[int, ...] = (0,)
    metrics: tuple[str, ...] = CSV_CORE
    game_file: str | None = None
    n: int = 10
    action_size: int = 10
    graph: str = "complete"
    qre_tol: float = 1e-10
    permutation_file: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.mode not in ("single", "two-timescale"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.delay not in DELAY_CHOICES:
            raise ValueError(f"unknown delay variant {self.delay!r}")
        if self.delay == "file" and not self.permutation_file:
            raise ValueError("delay 'file' requires permutation_file")
        unknown = set(self.metrics) - set(KNOWN_METRICS)
        if unknown:
            raise ValueError(f"unknown metrics: {sorted(unknown)}")
        if isinstance(self.eta, str) and self.eta != "safe":
            raise ValueError("eta must be a number or 'safe'")
        if isinstance(self.eta_bar, str) and self.eta_bar != "theory":
            raise ValueError("eta_bar must be a number, None, or 'theory'")
        if self.mode == "single" and self.eta_bar not in (None, "theory"):
            raise ValueError("explicit eta_bar requires two-timescale mode")

    def to_json_dict(self) -> dict:
        doc = asdict(self)
        doc["seeds"] = list(self.seeds)
        doc["metrics"] = list(self.metrics)
        return doc

    def config_hash(self) -> str:
        blob = json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def _regime_for_delay(delay: str) -> str:
    return {
        "none": "sync",
        "uniform": "random",
        "poisson": "random",
        "fixed": "fixed",
        "permuted": "permuted",
        "file": "permuted",
    }[delay]


def resolve_rates(config: RunConfig, stats: GameStats) -> RateSetting:
    """Resolve 'safe'/'theory' placeholders against the game's coupling constants."""
    if config.eta == "safe":
        regime = _regime_for_delay(config.delay)
        constants = None
        if regime == "random":
            if config.delay == "uniform":
                constants = delay_constants("uniform", gamma=config.gamma)
            else:
                constants = delay_constants("poisson", mean=config.pmean)
        gamma = config.gamma if regime in ("fixed", "permuted") else None
        eta = safe_rate(regime, stats, config.tau, gamma=gamma, constants=constants).eta
    else:
        eta = float(config.eta)

    if config.mode == "single":
        eta_bar = eta
    elif config.eta_bar is None or config.eta_bar == "theory":
        if config.delay == "poisson":
            raise ValueError("poisson delays have no delay bound; pass eta_bar explicitly")
        eta_bar = two_timescale_rate(eta, config.tau, config.gamma)
    else:
        eta_bar = float(config.eta_bar)
    return RateSetting(
        mode=config.mode,
        tau=config.tau,
        eta=eta,
        eta_bar=eta_bar,
        gamma=config.gamma if config.delay in ("fixed", "uniform", "permuted", "file") else None,
    )


def make_schedule(config: RunConfig, n: int, seed: int) -> DelaySchedule:
    if config.delay == "none":
        return DelaySchedule.none(n)
    if config.delay == "fixed":
        return DelaySchedule.fixed(n, config.gamma)
    if config.delay == "uniform":
        return DelaySchedule.uniform(n, config.gamma, seed=seed)
    if config.delay == "poisson":
        return DelaySchedule.poisson(n, config.pmean, seed=seed, cap=config.pcap)
    if config.delay == "permuted":
        return DelaySchedule.permuted(n, config.gamma, seed=seed)
    return DelaySchedule.from_file(config.permutation_file, n, gamma=config.gamma or None)


def game_for(config: RunConfig, seed: int) -> PolymatrixGame:
    """The run's game: loaded from file, or regenerated per seed from the
    generator settings."""
    if config.game_file:
        return PolymatrixGame.load(config.game_file)
    return random_zero_sum_game(config.n, config.action_size, config.graph, seed=seed)


_QRE_CACHE: dict[tuple[str, float, float], QreSolution] = {}


def get_qre(game: PolymatrixGame, tau: float, tol: float = 1e-10) -> QreSolution:
    """QRE reference, cached by (game content hash, tau, tol)."""
    key = (game.content_hash(), float(tau), float(tol))
    sol = _QRE_CACHE.get(key)
    if sol is None:
        sol = compute_qre(game, tau, tol=tol)
        if not sol.converged:
            raise RuntimeError(
                f"QRE solver did not reach tol={tol} (best residual {sol.residual})"
            )
        _QRE_CACHE[key] = sol
    return sol


class _History:
    """Extrapolation-profile history; a ring of depth max_lag+1 when bounded.

    Requesting an index that was already evicted is a harness bug and raises.
    """

    def __init__(self, max_lag: Optional[int]):
        self.max_lag = max_lag
        self._buf: list[np.ndarray] = []
        self._low = 0

    def push(self, s: int, value: np.ndarray) -> None:
        expected = self._low + len(self._buf)
        if s != expected:
            raise RuntimeError(f"history push out of order: got {s}, expected {expected}")
        self._buf.append(value)
        if self.max_lag is not None and len(self._buf) > self.max_lag + 1:
            self._buf.pop(0)
            self._low += 1

    def get(self, s: int) -> np.ndarray:
        idx = s - self._low
        if idx < 0:
            raise RuntimeError(
                f"feedback index {s} was evicted from the history ring (depth "
                f"{self.max_lag}); delay exceeded the schedule's stated bound"
            )
        if idx >= len(self._buf):
            raise RuntimeError(f"feedback index {s} not yet produced")
        return self._buf[idx]


@dataclass
class Trajectory:
    """Time-indexed metric record of one run (or a seed average)."""

    t: np.ndarray
    columns: dict[str, np.ndarray]
    tau: float
    eta: float
    eta_bar: float
    mode: str
    config_hash: str
    seed: Optional[int] = None
    game_hash: Optional[str] = None
    final_main: Optional[StrategyProfile] = None
    final_extrap: Optional[StrategyProfile] = None

    @property
    def kl_main(self) -> Optional[np.ndarray]:
        return self.columns.get("kl_main")

    @property
    def kl_extrap(self) -> Optional[np.ndarray]:
        return self.columns.get("kl_extrap")

    @property
    def qre_gap(self) -> Optional[np.ndarray]:
        return self.columns.get("qre_gap")

    @property
    def ne_gap(self) -> Optional[np.ndarray]:
        return self.columns.get("ne_gap")

    @property
    def regret(self) -> Optional[np.ndarray]:
        return self.columns.get("regret")

    @property
    def potential(self) -> Optional[np.ndarray]:
        return self.columns.get("potential")

    def value_at(self, metric: str, t: int) -> float:
        idx = np.flatnonzero(self.t == t)
        if idx.size != 1:
            raise KeyError(f"time {t} not recorded")
        return float(self.columns[metric][idx[0]])

    def to_csv(self) -> str:
        """CSV with header t,kl_main,kl_extrap,qre_gap,ne_gap[,regret_0..]."""
        names = [m for m in CSV_CORE if m in self.columns]
        reg = self.columns.get("regret")
        header = ["t"] + names + (
            [f"regret_{i}" for i in range(reg.shape[1])] if reg is not None else []
        )
        lines = [",".join(header)]
        for r, t in enumerate(self.t):
            cells = [str(int(t))]
            cells += [repr(float(self.columns[m][r])) for m in names]
            if reg is not None:
                cells += [repr(float(x)) for x in reg[r]]
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.to_csv())

    def meta_dict(self) -> dict:
        return {
            "seed": self.seed,
            "game_hash": self.game_hash,
            "config_hash": self.config_hash,
            "tau": self.tau,
            "eta": self.eta,
            "eta_bar": self.eta_bar,
            "mode": self.mode,
            "rows": int(len(self.t)),
        }


def _validate_columns(columns: dict[str, np.ndarray]) -> None:
    for name, arr in columns.items():
        if not np.all(np.isfinite(arr)):
            raise RuntimeError(f"recorded metric {name!r} has non-finite values")
        if name in ("kl_main", "kl_extrap", "qre_gap", "ne_gap") and np.any(arr < 0.0):
            raise RuntimeError(f"recorded metric {name!r} has negative values")
    reg = columns.get("regret")
    if reg is not None and reg.shape[0] and float(reg.sum(axis=1).min()) < -1e-9:
        raise RuntimeError("regret sums over players dropped below -1e-9")


def run(
    config: RunConfig,
    seed: Optional[int] = None,
    game: Optional[PolymatrixGame] = None,
    qre: Optional[QreSolution] = None,
) -> Trajectory:
    """Execute one run and return its recorded trajectory."""
    seed = config.seeds[0] if seed is None else int(seed)
    if game is None:
        game = game_for(config, seed)
    stats = game_stats(game)
    rates = resolve_rates(config, stats)
    eta, eta_bar, tau = rates.eta, rates.eta_bar, config.tau

    metrics = config.metrics
    need_qre = bool({"kl_main", "kl_extrap", "potential"} & set(metrics))
    if need_qre and qre is None:
        qre = get_qre(game, tau, config.qre_tol)

    n = game.n
    seg = segments_for(game.action_sizes)
    starts, sizes = seg.starts, seg.sizes
    A = game.full_matrix
    log_uniform = np.repeat(-np.log(sizes.astype(float)), sizes)
    main = log_uniform.copy()
    extrap = log_uniform.copy()

    schedule = make_schedule(config, n, seed)
    history = _History(schedule.max_lag)
    history.push(0, np.exp(extrap))

    if need_qre:
        qstar = qre.profile.concat()
        qmask = qstar > 0.0
        qstar_pos = qstar[qmask]
        qstar_selfterm = float(qstar_pos @ np.log(qstar_pos))

    def _kl_to(logits: np.ndarray) -> float:
        # KL(pi* | softmax(logits)); logits are exact log-probabilities.
        return _clip_roundoff(qstar_selfterm - float(qstar_pos @ logits[qmask]))

    pot_coef = 1.0 - 2.0 * eta * stats.d_max * stats.a_inf
    track_regret = "regret" in metrics
    if track_regret:
        cum_v = np.zeros(seg.total)
        cum_u = np.zeros(n)

    recorded_t: list[int] = []
    cols: dict[str, list] = {m: [] for m in metrics}
    kappas = np.empty(n, dtype=int)

    for t in range(config.horizon):
        for i in range(n):
            kappas[i] = schedule.next_kappa(i, t)
        if np.all(kappas == kappas[0]):
            feedback = A @ history.get(int(kappas[0]))
        else:
            feedback = np.empty(seg.total)
            for i in range(n):
                a, s = starts[i], sizes[i]
                feedback[a : a + s] = A[a : a + s, :] @ history.get(int(kappas[i]))

        if t >= 1:
            main = segment_log_normalize((1.0 - eta * tau) * main + eta * feedback, seg)
            if not np.all(np.isfinite(main)):
                raise DivergenceError(t, seed)

        if t % config.record_every == 0:
            recorded_t.append(t)
            if "kl_main" in metrics:
                cols["kl_main"].append(_kl_to(main))
            if "kl_extrap" in metrics:
                cols["kl_extrap"].append(_kl_to(extrap))
            if "potential" in metrics:
                p_main = np.exp(main)
                kl_pred = _clip_roundoff(float(p_main @ (main - extrap)))
                cols["potential"].append(_kl_to(main) + pot_coef * kl_pred)
            if "qre_gap" in metrics or "ne_gap" in metrics:
                p_bar = np.exp(extrap)
                payoff = A @ p_bar
                u_plain = np.add.reduceat(p_bar * payoff, starts)
                if "qre_gap" in metrics:
                    br = tau * segment_logsumexp(payoff / tau, seg)
                    ent = -np.add.reduceat(p_bar * extrap, starts)
                    gap = br - (u_plain + tau * ent)
                    cols["qre_gap"].append(_clip_roundoff(float(gap.max())))
                if "ne_gap" in metrics:
                    best = np.maximum.reduceat(payoff, starts)
                    cols["ne_gap"].append(_clip_roundoff(float((best - u_plain).max())))
            if track_regret:
                if t == 0:
                    cols["regret"].append(np.zeros(n))
                else:
                    row = np.empty(n)
                    for i in range(n):
                        a, s = starts[i], sizes[i]
                        v = cum_v[a : a + s]
                        if tau > 0.0:
                            scale = t * tau
                            m = float(v.max())
                            best = m + scale * math.log(float(np.exp((v - m) / scale).sum()))
                        else:
                            best = float(v.max())
                        row[i] = best - cum_u[i]
                    cols["regret"].append(row)

        extrap = segment_log_normalize((1.0 - eta_bar * tau) * main + eta_bar * feedback, seg)
        if not np.all(np.isfinite(extrap)):
            raise DivergenceError(t, seed)
        p_bar = np.exp(extrap)
        history.push(t + 1, p_bar)
        if track_regret:
            w = A @ p_bar
            cum_v += w
            ent = -np.add.reduceat(p_bar * extrap, starts)
            cum_u += np.add.reduceat(p_bar * w, starts) + tau * ent

    columns = {
        m: (np.vstack(cols[m]) if m == "regret" else np.asarray(cols[m], dtype=float))
        for m in metrics
    }
    _validate_columns(columns)
    return Trajectory(
        t=np.asarray(recorded_t, dtype=int),
        columns=columns,
        tau=tau,
        eta=eta,
        eta_bar=eta_bar,
        mode=rates.mode,
        config_hash=config.config_hash(),
        seed=seed,
        game_hash=game.content_hash(),
        final_main=StrategyProfile.from_concat(np.exp(main), game.action_sizes),
        final_extrap=StrategyProfile.from_concat(np.exp(extrap), game.action_sizes),
    )


def mean_trajectory(trajs: Sequence[Trajectory]) -> Trajectory:
    """Arithmetic mean of each metric across runs at matching times."""
    if not trajs:
        raise ValueError("no trajectories to average")
    base = trajs[0]
    for other in trajs[1:]:
        if not np.array_equal(other.t, base.t) or set(other.columns) != set(base.columns):
            raise ValueError("trajectories have mismatched record grids")
    columns = {
        name: np.mean([tr.columns[name] for tr in trajs], axis=0) for name in base.columns
    }
    hashes = {tr.game_hash for tr in trajs}
    return Trajectory(
        t=base.t.copy(),
        columns=columns,
        tau=base.tau,
        eta=base.eta,
        eta_bar=base.eta_bar,
        mode=base.mode,
        config_hash=base.config_hash,
        seed=None,
        game_hash=hashes.pop() if len(hashes) == 1 else None,
    )


def run_averaged(config: RunConfig) -> tuple[Trajectory, list[Trajectory]]:
    """Run every seed in the config and return (mean trajectory, per-seed runs)."""
    per_seed = []
    for s in config.seeds:
        try:
            per_seed.append(run(config, seed=s))
        except DivergenceError as err:
            raise DivergenceError(err.t, s) from err
    return mean_trajectory(per_seed), per_seed


@dataclass(frozen=True)
class RateFit:
    """Empirical per-iteration contraction factor fitted on log kl_main."""

    rho: float
    slope: float
    window: tuple[int, int]
    points: int


def fit_rate(traj: Trajectory, window: tuple[int, int]) -> RateFit:
    """Least-squares slope of ln kl_main over t in [window]; rho = exp(slope)."""
    t0, t1 = window
    if traj.kl_main is None:
        raise ValueError("trajectory has no kl_main column")
    sel = (traj.t >= t0) & (traj.t <= t1)
    ts = traj.t[sel].astype(float)
    vals = traj.kl_main[sel]
    if ts.size < 2:
        raise ValueError("window contains fewer than 2 recorded points")
    if np.any(vals <= 0.0):
        raise ValueError("kl_main must be strictly positive throughout the window")
    slope = float(np.polyfit(ts, np.log(vals), 1)[0])
    return RateFit(rho=float(np.exp(slope)), slope=slope, window=(int(t0), int(t1)), points=int(ts.size))


def potential_value(
    qre: QreSolution,
    main: StrategyProfile,
    extrap: StrategyProfile,
    eta: float,
    stats: GameStats,
) -> float:
    """Contraction potential: KL(pi* | pi) + (1 - 2 eta d_max a_inf) KL(pi | pibar)."""
    coef = 1.0 - 2.0 * eta * stats.d_max * stats.a_inf
    return kl_profile(qre.profile, main) + coef * kl_profile(main, extrap)

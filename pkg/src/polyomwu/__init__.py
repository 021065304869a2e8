"""Optimistic multiplicative-weights dynamics for zero-sum polymatrix games
under delayed feedback: game representation, equilibrium metrics, the OMWU
kernel with single/two-timescale rates, delay schedules, and a deterministic
simulation harness."""

from .delays import DelayConstants, DelaySchedule, delay_constants, validate_schedule
from .dynamics import (
    AgentState,
    RateSetting,
    mwu_step,
    normalize,
    safe_rate,
    two_timescale_rate,
)
from .games import (
    GameStats,
    PolymatrixGame,
    StrategyProfile,
    check_zero_sum,
    cross_sum,
    game_stats,
    payoff_vector,
    random_zero_sum_game,
    uniform_profile,
    utility,
)
from .harness import (
    DivergenceError,
    RateFit,
    RunConfig,
    Trajectory,
    fit_rate,
    get_qre,
    potential_value,
    run,
    run_averaged,
)
from .metrics import (
    InfiniteDivergenceError,
    QreSolution,
    RegretReport,
    br_value,
    compute_qre,
    kl,
    kl_profile,
    ne_gap,
    qre_gap,
    qre_gap_kl_bound,
    qre_residual,
    regret,
    regret_report,
)
from .presets import ExperimentSpec, expand_preset

__version__ = "0.1.0"

__all__ = [
    "AgentState",
    "DelayConstants",
    "DelaySchedule",
    "DivergenceError",
    "ExperimentSpec",
    "GameStats",
    "InfiniteDivergenceError",
    "PolymatrixGame",
    "QreSolution",
    "RateFit",
    "RateSetting",
    "RegretReport",
    "RunConfig",
    "StrategyProfile",
    "Trajectory",
    "br_value",
    "check_zero_sum",
    "compute_qre",
    "cross_sum",
    "delay_constants",
    "expand_preset",
    "fit_rate",
    "game_stats",
    "get_qre",
    "kl",
    "kl_profile",
    "mwu_step",
    "ne_gap",
    "normalize",
    "payoff_vector",
    "potential_value",
    "qre_gap",
    "qre_gap_kl_bound",
    "qre_residual",
    "random_zero_sum_game",
    "regret",
    "regret_report",
    "run",
    "run_averaged",
    "safe_rate",
    "two_timescale_rate",
    "uniform_profile",
    "utility",
    "validate_schedule",
]

"""Named experiment presets.

Each preset expands deterministically into a list of labelled run
configurations at the desk-scale defaults (10 players, 10 actions each,
complete graph, tau = 0.1, horizon 5000, seeds 0..4):

* ``fig1a``  single-timescale convergence curves, no delay vs. uniform
  delays on {0..10}, over the learning-rate grid
* ``fig1b``  final accuracy after 5000 iterations vs. learning rate for the
  single- and two-timescale modes under permuted delays, gamma = 25
* ``fig1c``  final accuracy vs. the extrapolation rate with eta fixed to
  0.001 under permuted delays, gamma = 25 (theory-matched rate included)
* ``fig2a``  single vs. two-timescale curves, uniform delays on {0..25}
* ``fig2b``  single vs. two-timescale curves, fixed delay gamma = 50
* ``fig2c``  single vs. two-timescale curves, permuted delays, gamma = 25
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .harness import RunConfig

PRESET_NAMES = ("fig1a", "fig1b", "fig1c", "fig2a", "fig2b", "fig2c")

ETA_GRID = (1e-1, 5e-2, 1e-2, 5e-3, 1e-3, 5e-4, 1e-4, 5e-5, 1e-5, 5e-6, 1e-6)

_BASE = RunConfig(
    tau=0.1,
    horizon=5000,
    record_every=10,
    seeds=(0, 1, 2, 3, 4),
    n=10,
    action_size=10,
    graph="complete",
    metrics=("kl_main", "kl_extrap", "qre_gap", "ne_gap"),
)


@dataclass(frozen=True)
class ExperimentSpec:
    """A named, deterministic bundle of labelled run configurations."""

    name: str
    runs: tuple[tuple[str, RunConfig], ...]


def _eta_label(eta: float) -> str:
    return f"{eta:.0e}"


def _grid(base: RunConfig, prefix: str, **common) -> list[tuple[str, RunConfig]]:
    out = []
    for eta in ETA_GRID:
        cfg = replace(base, eta=eta, **common)
        out.append((f"{prefix}_eta{_eta_label(eta)}", cfg))
    return out


def expand_preset(
    name: str,
    *,
    horizon: int | None = None,
    seeds: tuple[int, ...] | None = None,
    record_every: int | None = None,
) -> ExperimentSpec:
    """Expand a preset name into labelled configs, with optional overrides."""
    if name not in PRESET_NAMES:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}")
    base = _BASE
    if horizon is not None:
        base = replace(base, horizon=horizon)
    if seeds is not None:
        base = replace(base, seeds=tuple(seeds))
    if record_every is not None:
        base = replace(base, record_every=record_every)

    runs: list[tuple[str, RunConfig]] = []
    if name == "fig1a":
        runs += _grid(base, "sync", delay="none", mode="single")
        runs += _grid(base, "uniform10", delay="uniform", gamma=10, mode="single")
    elif name in ("fig1b", "fig2c"):
        runs += _grid(base, "single", delay="permuted", gamma=25, mode="single")
        runs += _grid(base, "two", delay="permuted", gamma=25, mode="two-timescale", eta_bar="theory")
    elif name == "fig1c":
        eta = 1e-3
        runs.append(
            (f"single_eta{_eta_label(eta)}", replace(base, eta=eta, delay="permuted", gamma=25, mode="single"))
        )
        for eta_bar in (1e-3, 5e-3, 1e-2, 5e-2, 1e-1):
            runs.append(
                (
                    f"two_ebar{_eta_label(eta_bar)}",
                    replace(base, eta=eta, eta_bar=eta_bar, delay="permuted", gamma=25, mode="two-timescale"),
                )
            )
        runs.append(
            ("two_ebar_theory", replace(base, eta=eta, eta_bar="theory", delay="permuted", gamma=25, mode="two-timescale"))
        )
    elif name == "fig2a":
        runs += _grid(base, "single", delay="uniform", gamma=25, mode="single")
        runs += _grid(base, "two", delay="uniform", gamma=25, mode="two-timescale", eta_bar="theory")
    elif name == "fig2b":
        runs += _grid(base, "single", delay="fixed", gamma=50, mode="single")
        runs += _grid(base, "two", delay="fixed", gamma=50, mode="two-timescale", eta_bar="theory")
    return ExperimentSpec(name=name, runs=tuple(runs))

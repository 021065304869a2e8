"""Command-line front door.

Subcommands:

* ``gen``       generate a random zero-sum polymatrix game file
* ``qre``       compute a QRE reference profile for a game file
* ``run``       execute a preset, a config file, or an ad-hoc run grid
* ``validate``  check a game's zero-sum property or a delay schedule

Every command is deterministic given its flags (seeds included).  Exit codes:
0 success, 1 validation/tolerance failure, 2 usage error, 3 numerical
divergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .delays import DelaySchedule, validate_schedule
from .games import PolymatrixGame, check_zero_sum, game_stats, random_zero_sum_game
from .harness import (
    CSV_CORE,
    DivergenceError,
    RunConfig,
    Trajectory,
    mean_trajectory,
    run,
)
from .metrics import compute_qre
from .presets import PRESET_NAMES, ExperimentSpec, expand_preset

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2
EXIT_DIVERGENCE = 3


def _parse_seeds(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip() != "")
    except ValueError:
        raise ValueError(f"bad seed list {text!r}; expected e.g. '0,1,2'") from None


def _parse_eta(text: str):
    if text == "safe":
        return "safe"
    return float(text)


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# -- gen ----------------------------------------------------------------------


def cmd_gen(args) -> int:
    if args.graph == "complete":
        graph = "complete"
    else:
        with open(args.graph, "r", encoding="utf-8") as fh:
            graph = [tuple(edge) for edge in json.load(fh)]
    game = random_zero_sum_game(args.n, args.actions, graph, seed=args.seed)
    game.save(args.out)
    stats = game_stats(game)
    verdict = check_zero_sum(game, mode="exact-pairwise")
    print(f"wrote {args.out}")
    print(
        f"players={game.n} actions={list(game.action_sizes)} edges={len(game.edges)} "
        f"d_max={stats.d_max} a_inf={stats.a_inf!r} s_max={stats.s_max} "
        f"zero_sum={'pass' if verdict.passed else 'FAIL'}"
    )
    return EXIT_OK


# -- qre ----------------------------------------------------------------------


def cmd_qre(args) -> int:
    if args.tau <= 0.0:
        raise ValueError("QRE requires tau > 0")
    game = PolymatrixGame.load(args.game)
    sol = compute_qre(game, args.tau, tol=args.tol, max_iter=args.max_iter)
    if args.out:
        sol.save(args.out)
        print(f"wrote {args.out}")
    print(
        f"tau={sol.tau!r} residual={sol.residual!r} iterations={sol.iterations} "
        f"converged={sol.converged}"
    )
    return EXIT_OK if sol.converged else EXIT_VALIDATION


# -- run ----------------------------------------------------------------------


def _config_from_args(args) -> RunConfig:
    mode = "two-timescale" if (args.two_timescale or args.eta_bar is not None) else "single"
    return RunConfig(
        tau=args.tau,
        horizon=args.horizon,
        eta=_parse_eta(args.eta),
        mode=mode,
        eta_bar=None if args.eta_bar is None else _parse_eta(args.eta_bar),
        delay=args.delay,
        gamma=args.gamma,
        pmean=args.pmean,
        pcap=args.pcap,
        record_every=args.record_every,
        seeds=_parse_seeds(args.seeds),
        game_file=args.game,
        n=args.n,
        action_size=args.actions,
        metrics=tuple(args.metrics.split(",")) if args.metrics else CSV_CORE,
        permutation_file=args.perm_file,
    )


def _config_from_file(path: str) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if "seeds" in doc:
        doc["seeds"] = tuple(doc["seeds"])
    if "metrics" in doc:
        doc["metrics"] = tuple(doc["metrics"])
    return RunConfig(**doc)


def _run_task(config: RunConfig, seed: int) -> Trajectory:
    return run(config, seed=seed)


def _execute_runs(spec: ExperimentSpec, out_root: str, jobs: int) -> Path:
    digest = hashlib.sha256(
        "|".join(cfg.config_hash() for _, cfg in spec.runs).encode()
    ).hexdigest()[:12]
    out_dir = Path(out_root) / f"{spec.name}_{digest}"
    out_dir.mkdir(parents=True, exist_ok=True)

    tasks = [(label, cfg, seed) for label, cfg in spec.runs for seed in cfg.seeds]
    results: dict[tuple[str, int], Trajectory] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {
                (label, seed): pool.submit(_run_task, cfg, seed) for label, cfg, seed in tasks
            }
            for key, fut in futures.items():
                results[key] = fut.result()
    else:
        for label, cfg, seed in tasks:
            results[(label, seed)] = _run_task(cfg, seed)

    summary_lines = ["label,mode,delay,gamma,eta,eta_bar,final_t,final_kl_main"]
    for label, cfg in spec.runs:
        per_seed = [results[(label, seed)] for seed in cfg.seeds]
        mean = mean_trajectory(per_seed)
        run_dir = out_dir / label
        run_dir.mkdir(parents=True, exist_ok=True)
        for tr in per_seed:
            tr.save_csv(run_dir / f"seed{tr.seed}.csv")
        mean.save_csv(run_dir / "mean.csv")
        meta = {
            "label": label,
            "config": cfg.to_json_dict(),
            "per_seed": [
                dict(tr.meta_dict(), csv_sha256=_sha256_file(run_dir / f"seed{tr.seed}.csv"))
                for tr in per_seed
            ],
            "mean_csv_sha256": _sha256_file(run_dir / "mean.csv"),
        }
        with open(run_dir / "meta.json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(meta, fh, sort_keys=True, indent=1)
            fh.write("\n")
        if mean.kl_main is not None and len(mean.t):
            final_t, final_kl = int(mean.t[-1]), repr(float(mean.kl_main[-1]))
        else:
            final_t, final_kl = -1, ""
        summary_lines.append(
            f"{label},{mean.mode},{cfg.delay},{cfg.gamma},{mean.eta!r},{mean.eta_bar!r},"
            f"{final_t},{final_kl}"
        )
    with open(out_dir / "summary.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(summary_lines) + "\n")
    return out_dir


def cmd_run(args) -> int:
    if args.preset:
        spec = expand_preset(
            args.preset,
            horizon=args.horizon,
            seeds=_parse_seeds(args.seeds) if args.seeds else None,
            record_every=args.record_every,
        )
    elif args.config:
        cfg = _config_from_file(args.config)
        spec = ExperimentSpec(name="custom", runs=(("run", cfg),))
    else:
        if args.horizon is None:
            raise ValueError("--horizon is required without --preset/--config")
        ns = argparse.Namespace(**vars(args))
        ns.horizon = args.horizon
        ns.seeds = args.seeds or "0"
        ns.record_every = args.record_every or 1
        spec = ExperimentSpec(name="custom", runs=(("run", _config_from_args(ns)),))
    out_dir = _execute_runs(spec, args.out, args.jobs)
    print(f"wrote {out_dir}")
    return EXIT_OK


# -- validate -----------------------------------------------------------------


def cmd_validate(args) -> int:
    ok = True
    if args.game:
        game = PolymatrixGame.load(args.game)
        verdict = check_zero_sum(
            game, mode=args.mode, samples=args.samples, tol=args.tol, seed=args.seed
        )
        print(
            f"game {args.game}: mode={verdict.mode} max_residual={verdict.max_residual!r} "
            f"{'pass' if verdict.passed else 'FAIL'}"
        )
        ok = ok and verdict.passed
    if args.delay:
        if args.delay == "none":
            sched = DelaySchedule.none(args.n)
        elif args.delay == "fixed":
            sched = DelaySchedule.fixed(args.n, args.gamma)
        elif args.delay == "uniform":
            sched = DelaySchedule.uniform(args.n, args.gamma, seed=args.seed)
        elif args.delay == "poisson":
            sched = DelaySchedule.poisson(args.n, args.pmean, seed=args.seed, cap=args.pcap)
        elif args.delay == "permuted":
            sched = DelaySchedule.permuted(args.n, args.gamma, seed=args.seed)
        elif args.delay == "file":
            if not args.perm_file:
                raise ValueError("--delay file requires --perm-file")
            sched = DelaySchedule.from_file(args.perm_file, args.n, gamma=args.gamma or None)
        else:
            raise ValueError(f"unknown delay {args.delay!r}")
        for i in range(args.n):
            rep = validate_schedule(sched, args.horizon, i)
            print(
                f"agent {i}: max_disp={rep.max_displacement} "
                f"mean_tail_disp={rep.mean_tail_displacement:.4f} "
                f"dups={len(rep.duplicates)} missing={len(rep.missing)} "
                f"{'pass' if rep.ok else 'FAIL'}"
            )
            ok = ok and rep.ok
    if not args.game and not args.delay:
        raise ValueError("nothing to validate; pass --game and/or --delay")
    return EXIT_OK if ok else EXIT_VALIDATION


# -- parser -------------------------------------------------------------------

DELAY_CLI_CHOICES = ("none", "fixed", "uniform", "poisson", "permuted")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyomwu",
        description="Optimistic MWU dynamics for zero-sum polymatrix games under delayed feedback",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random zero-sum polymatrix game")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--actions", type=int, default=10)
    p.add_argument("--graph", default="complete", help="'complete' or a JSON edge-list file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("qre", help="compute a QRE reference for a game file")
    p.add_argument("--game", required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iter", type=int, default=500_000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_qre)

    p = sub.add_parser("run", help="run a preset, a config file, or an ad-hoc experiment")
    p.add_argument("--preset", choices=PRESET_NAMES)
    p.add_argument("--config", help="JSON config file mirroring the flags")
    p.add_argument("--game", help="game file (otherwise the game is generated per seed)")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--actions", type=int, default=10)
    p.add_argument("--tau", type=float, default=0.1)
    p.add_argument("--eta", default="safe", help="learning rate, or 'safe'")
    p.add_argument("--eta-bar", default=None, help="extrapolation rate (implies two-timescale)")
    p.add_argument("--two-timescale", action="store_true")
    p.add_argument("--delay", choices=DELAY_CLI_CHOICES, default="none")
    p.add_argument("--gamma", type=int, default=0)
    p.add_argument("--pmean", type=float, default=1.0)
    p.add_argument("--pcap", type=int, default=None)
    p.add_argument("--perm-file", default=None)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--record-every", type=int, default=None)
    p.add_argument("--seeds", default=None, help="comma-separated, e.g. '0,1,2'")
    p.add_argument("--metrics", default=None, help="comma-separated metric names")
    p.add_argument("--out", default="runs")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="validate a game file and/or a delay schedule")
    p.add_argument("--game")
    p.add_argument("--mode", choices=("exact-pairwise", "sampled"), default="exact-pairwise")
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--delay", choices=DELAY_CLI_CHOICES + ("file",), default=None)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--gamma", type=int, default=0)
    p.add_argument("--pmean", type=float, default=1.0)
    p.add_argument("--pcap", type=int, default=None)
    p.add_argument("--perm-file", default=None)
    p.add_argument("--horizon", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DivergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except (ValueError, TypeError, FileNotFoundError, KeyError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

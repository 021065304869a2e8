"""End-to-end acceptance suite.

One test per criterion, each printing a ``criterion N: PASS/FAIL`` line
(visible with ``pytest -s`` or in captured output).  Tolerances are fixed
here and nowhere else.
"""

import filecmp
import math
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy import stats as scipy_stats
from scipy.special import softmax as scipy_softmax

from polyomwu.delays import DelaySchedule, validate_schedule
from polyomwu.games import cross_sum, game_stats, random_zero_sum_game
from polyomwu.harness import RunConfig, get_qre, mean_trajectory, run
from polyomwu.metrics import compute_qre, kl_profile, ne_gap, qre_gap
from polyomwu.rng import STREAM_MISC, substream

from conftest import CORPUS_SEEDS, CORPUS_TAU, random_profile


def _report(num: int, ok: bool, detail: str = ""):
    print(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'} {detail}".rstrip())
    assert ok, f"criterion {num} failed: {detail}"


# -- shared runs for criteria 1-3 ----------------------------------------------


@pytest.fixture(scope="session")
def contraction_runs(corpus_games):
    """Sync single-timescale runs at eta = 1/36 on the 5-seed corpus."""
    start = time.perf_counter()
    runs = {}
    for s in CORPUS_SEEDS:
        cfg = RunConfig(
            tau=CORPUS_TAU, horizon=3002, eta=1 / 36, record_every=1, seeds=(s,),
            metrics=("kl_main", "kl_extrap", "qre_gap", "potential"),
        )
        runs[s] = run(cfg, game=corpus_games[s])
    elapsed = time.perf_counter() - start
    return runs, elapsed


def test_criterion_1_sync_contraction(contraction_runs):
    runs, elapsed = contraction_runs
    worst_main, worst_extrap = -math.inf, -math.inf
    for tr in runs.values():
        decay = 1.0 - tr.eta * tr.tau
        kl0 = tr.kl_main[0]
        T = tr.t[: 3001]
        worst_main = max(worst_main, float((tr.kl_main[:3001] - decay**T * kl0).max()))
        rows = tr.t[1:3002]
        bound = 2.0 * decay ** (rows - 1) * kl0
        worst_extrap = max(worst_extrap, float((tr.kl_extrap[1:3002] - bound).max()))
    ok = worst_main <= 1e-9 and worst_extrap <= 1e-9 and elapsed < 30.0
    _report(
        1, ok,
        f"(main slack {worst_main:.2e}, extrap slack {worst_extrap:.2e}, {elapsed:.1f}s)",
    )


def test_criterion_2_potential_monotonicity(contraction_runs):
    runs, _ = contraction_runs
    worst = -math.inf
    for tr in runs.values():
        decay = 1.0 - tr.eta * tr.tau
        pot = tr.potential
        worst = max(worst, float((pot[1:] - decay * pot[:-1]).max()))
    _report(2, worst <= 1e-10, f"(max recursion slack {worst:.2e})")


def test_criterion_3_qre_gap_bound(contraction_runs, corpus_games):
    runs, _ = contraction_runs
    worst = -math.inf
    for s, tr in runs.items():
        stats = game_stats(corpus_games[s])
        decay = 1.0 - tr.eta * tr.tau
        kl0 = tr.kl_main[0]
        coef = 1.0 / tr.eta + 2.0 * stats.d_max**2 * stats.a_inf**2 / tr.tau
        rows = tr.t[1:]
        bound = coef * decay ** (rows - 1) * kl0
        worst = max(worst, float((tr.qre_gap[1:] - bound).max()))
    _report(3, worst <= 1e-9, f"(max bound slack {worst:.2e})")


def test_criterion_4_qre_reference_quality(corpus_games, corpus_qres):
    from polyomwu.metrics import qre_residual

    res = qre_residual(corpus_games[0], corpus_qres[0].profile, CORPUS_TAU)
    ok = res <= 1e-10
    worst_diff = 0.0
    for seed in range(5):
        g = random_zero_sum_game(2, 2, "complete", seed=300 + seed)
        sol = compute_qre(g, 0.5, tol=1e-10)
        x = np.full(4, 0.5)
        for _ in range(100_000):
            q = g.full_matrix @ x
            target = np.concatenate([scipy_softmax(q[:2] / 0.5), scipy_softmax(q[2:] / 0.5)])
            x_new = 0.5 * x + 0.5 * target
            if np.abs(x_new - x).max() < 1e-15:
                x = x_new
                break
            x = x_new
        worst_diff = max(worst_diff, float(np.abs(sol.profile.concat() - x).max()))
        ok = ok and sol.converged
    ok = ok and worst_diff <= 1e-8
    _report(4, ok, f"(reference residual {res:.2e}, oracle diff {worst_diff:.2e})")


def test_criterion_5_cross_sum_vanishes():
    rng = substream(5, STREAM_MISC)
    worst = 0.0
    for k in range(100):
        n = 2 + k % 5
        size = 2 + k % 4
        g = random_zero_sum_game(n, size, "complete", seed=1000 + k)
        p = random_profile(g.action_sizes, rng)
        q = random_profile(g.action_sizes, rng)
        worst = max(worst, abs(cross_sum(g, p, q)))
    _report(5, worst <= 1e-10, f"(max |cross sum| {worst:.2e})")


@pytest.fixture(scope="session")
def gap_bound_corpus():
    """10 corpus games with QRE references at tau in {0.01, 0.1, 1}."""
    games = {s: random_zero_sum_game(10, 10, "complete", seed=s) for s in range(10)}
    refs = {
        (s, tau): get_qre(games[s], tau, 1e-10)
        for s in games
        for tau in (0.01, 0.1, 1.0)
    }
    return games, refs


def test_criterion_6_qre_gap_kl_bound(gap_bound_corpus):
    games, refs = gap_bound_corpus
    rng = substream(6, STREAM_MISC)
    worst = -math.inf
    for s, g in games.items():
        stats = game_stats(g)
        coef = (stats.d_max * stats.a_inf) ** 2
        for _ in range(10):
            prof = random_profile(g.action_sizes, rng)
            for tau in (0.01, 0.1, 1.0):
                star = refs[(s, tau)].profile
                bound = tau * kl_profile(prof, star) + (coef / tau) * kl_profile(star, prof)
                worst = max(worst, qre_gap(g, prof, tau) - bound)
    _report(6, worst <= 1e-9, f"(max bound slack {worst:.2e})")


def test_criterion_7_ne_bridge(gap_bound_corpus):
    games, _ = gap_bound_corpus
    rng = substream(7, STREAM_MISC)
    worst = -math.inf
    for g in games.values():
        log_smax = math.log(max(g.action_sizes))
        for _ in range(10):
            prof = random_profile(g.action_sizes, rng)
            nege = ne_gap(g, prof)
            for tau in (0.01, 0.1, 1.0):
                worst = max(worst, nege - (qre_gap(g, prof, tau) + tau * log_smax))
    _report(7, worst <= 1e-12, f"(max bridge slack {worst:.2e})")


def test_criterion_8_random_delay_trend(corpus_games):
    start = time.perf_counter()
    base = dict(tau=CORPUS_TAU, horizon=5001, record_every=100, seeds=CORPUS_SEEDS,
                metrics=("kl_main",))
    delayed_cfg = RunConfig(eta="safe", delay="uniform", gamma=10, **base)
    sync_cfg = RunConfig(eta="safe", delay="none", **base)
    delayed = mean_trajectory([run(delayed_cfg, seed=s, game=corpus_games[s]) for s in CORPUS_SEEDS])
    sync = mean_trajectory([run(sync_cfg, seed=s, game=corpus_games[s]) for s in CORPUS_SEEDS])
    elapsed = time.perf_counter() - start

    finite = bool(np.all(np.isfinite(delayed.kl_main)))
    endpoint = delayed.value_at("kl_main", 5000) < delayed.value_at("kl_main", 500)
    window = (delayed.t >= 500) & (delayed.t <= 5000)
    vals = delayed.kl_main[window]
    monotone = bool(np.all(vals[1:] <= vals[:-1] * (1.0 + 1e-9)))
    compare = (sync.t >= 500) & (sync.t <= 5000)
    slower = bool(np.all(delayed.kl_main[compare] > sync.kl_main[compare]))
    ok = finite and endpoint and monotone and slower and elapsed < 120.0
    _report(
        8, ok,
        f"(kl 500->{vals[0]:.6f} 5000->{vals[-1]:.6f}, slower-than-sync {slower}, {elapsed:.1f}s)",
    )


def test_criterion_9_fixed_delay_bound(corpus_games):
    gamma = 50
    worst = -math.inf
    for s in CORPUS_SEEDS:
        cfg = RunConfig(
            tau=CORPUS_TAU, horizon=5002, eta="safe", mode="two-timescale",
            delay="fixed", gamma=gamma, record_every=1, seeds=(s,), metrics=("kl_main",),
        )
        tr = run(cfg, game=corpus_games[s])
        decay = 1.0 - tr.eta * tr.tau
        kl0 = tr.kl_main[0]
        rows = tr.t[gamma + 1 :]
        bound = decay**rows * kl0 + decay ** (rows - gamma)
        worst = max(worst, float((tr.kl_main[gamma + 1 :] - bound).max()))
    _report(9, worst <= 1e-9, f"(max bound slack {worst:.2e})")


def test_criterion_10_permuted_bound_and_two_timescale_gain(corpus_games):
    gamma, T = 25, 5000
    worst_margin = -math.inf
    for s in CORPUS_SEEDS:
        cfg = RunConfig(
            tau=CORPUS_TAU, horizon=T + 1, eta="safe", mode="two-timescale",
            delay="permuted", gamma=gamma, record_every=1, seeds=(s,), metrics=("kl_main",),
        )
        tr = run(cfg, game=corpus_games[s])
        window = (tr.t > 2 * gamma) & (tr.t <= T)
        avg = float(tr.kl_main[window].mean())
        kl0 = tr.kl_main[0]
        n = 10
        rhs = (kl0 + n) / (tr.eta * tr.tau * (T - 2 * gamma)) + (
            24.0 * n * gamma * math.log(10) / (T - 2 * gamma)
        )
        worst_margin = max(worst_margin, avg - rhs)

    gains = []
    for eta in (1e-3, 1e-4):
        finals = {}
        for mode, ebar in (("single", None), ("two-timescale", "theory")):
            cfg = RunConfig(
                tau=CORPUS_TAU, horizon=T + 1, eta=eta, mode=mode, eta_bar=ebar,
                delay="permuted", gamma=gamma, record_every=T, seeds=CORPUS_SEEDS,
                metrics=("kl_main",),
            )
            mean = mean_trajectory([run(cfg, seed=s, game=corpus_games[s]) for s in CORPUS_SEEDS])
            finals[mode] = mean.value_at("kl_main", T)
        gains.append(finals["two-timescale"] < finals["single"])
    ok = worst_margin <= 0.0 and all(gains)
    _report(
        10, ok,
        f"(avg-bound margin {worst_margin:.3e}, two-timescale wins at 1e-3/1e-4: {gains})",
    )


def test_criterion_11_regret_bounds(corpus_games):
    worst_player = -math.inf
    worst_sum = math.inf
    for s in CORPUS_SEEDS:
        g = corpus_games[s]
        stats = game_stats(g)
        eta = 1.0 / (4.0 * stats.d_max * stats.a_inf + 4.0 * CORPUS_TAU)
        cfg = RunConfig(
            tau=CORPUS_TAU, horizon=1001, eta=eta, record_every=100, seeds=(s,),
            metrics=("regret",),
        )
        tr = run(cfg, game=g)
        log_sizes = np.log(np.asarray(g.action_sizes, dtype=float))
        degrees = np.array([g.degree(i) for i in range(g.n)], dtype=float)
        bound = log_sizes / eta + 16.0 * eta * degrees * stats.a_inf**2 * log_sizes.sum()
        worst_player = max(worst_player, float((tr.regret - bound[None, :]).max()))
        worst_sum = min(worst_sum, float(tr.regret.sum(axis=1).min()))
    ok = worst_player <= 1e-6 and worst_sum >= -1e-9
    _report(11, ok, f"(max bound slack {worst_player:.2e}, min regret sum {worst_sum:.2e})")


def test_criterion_12_delay_model_suite():
    # permuted: injectivity + displacement + coverage for every agent
    sched = DelaySchedule.permuted(10, gamma=25, seed=0)
    permuted_ok = all(validate_schedule(sched, 5000, i).ok for i in range(10))

    # bounded-uniform: empirical mean within 3 SE of gamma/2 over 1e5 draws
    gamma, draws = 10, 100_000
    rep = validate_schedule(DelaySchedule.uniform(1, gamma, seed=12), draws + gamma, 0)
    disps = np.arange(draws + gamma)[gamma:] - rep.kappas[gamma:]
    se = math.sqrt((gamma * (gamma + 2) / 12.0) / draws)
    mean_ok = abs(float(disps.mean()) - gamma / 2.0) <= 3.0 * se

    # poisson: chi-square goodness of fit at significance 0.001
    pvals = []
    for mean in (1.0, 5.0):
        offset = 200
        ps = DelaySchedule.poisson(1, mean, seed=21)
        ks = [ps.next_kappa(0, t) for t in range(draws + offset)]
        delays = np.array([t - k for t, k in enumerate(ks)][offset:])
        kmax = int(delays.max())
        expected = scipy_stats.poisson.pmf(np.arange(kmax + 1), mean) * draws
        cut = kmax + 1 - int(np.argmax(np.cumsum(expected[::-1]) >= 5.0))
        observed = np.bincount(delays, minlength=kmax + 2)
        obs = np.append(observed[:cut], observed[cut:].sum())
        exp = np.append(expected[:cut], draws - expected[:cut].sum())
        pvals.append(float(scipy_stats.chisquare(obs, exp).pvalue))
    poisson_ok = all(p >= 0.001 for p in pvals)

    ok = permuted_ok and mean_ok and poisson_ok
    _report(
        12, ok,
        f"(permuted {permuted_ok}, uniform mean {disps.mean():.4f}, poisson p {pvals})",
    )


def test_criterion_13_preset_determinism(tmp_path):
    args = [
        sys.executable, "-m", "polyomwu.cli", "run", "--preset", "fig2b",
        "--horizon", "120", "--record-every", "10", "--seeds", "0,1",
    ]
    for out in ("A", "B"):
        res = subprocess.run(
            args + ["--out", str(tmp_path / out)], capture_output=True, text=True
        )
        assert res.returncode == 0, res.stderr
    dir_a = next((tmp_path / "A").iterdir())
    dir_b = next((tmp_path / "B").iterdir())

    mismatches = []

    def compare(da, db):
        comp = filecmp.dircmp(da, db)
        mismatches.extend(comp.diff_files + comp.left_only + comp.right_only)
        match, mism, err = filecmp.cmpfiles(
            da, db, comp.common_files, shallow=False
        )
        mismatches.extend(mism + err)
        for sub in comp.common_dirs:
            compare(da / sub, db / sub)

    compare(dir_a, dir_b)
    _report(13, not mismatches, f"(mismatched files: {mismatches or 'none'})")

import math

import numpy as np
import pytest
from scipy import stats as scipy_stats

from polyomwu.delays import (
    DelaySchedule,
    OutOfOrderError,
    delay_constants,
    load_permutation_file,
    save_permutation_file,
    validate_schedule,
)


def replay_kappas(schedule, horizon, agent=0):
    fresh = schedule.replay()
    return [fresh.next_kappa(agent, t) for t in range(horizon)]


class TestBasicVariants:
    def test_none_is_identity(self):
        sched = DelaySchedule.none(2)
        assert sched.next_kappa(0, 0) == 0
        for t in range(1, 8):
            assert sched.next_kappa(0, t) == t

    def test_fixed_arithmetic(self):
        sched = DelaySchedule.fixed(1, gamma=3)
        ks = [sched.next_kappa(0, t) for t in range(12)]
        assert ks[2] == 0
        assert ks[10] == 7
        assert ks == [max(t - 3, 0) for t in range(12)]

    def test_permuted_gamma_zero_is_identity(self):
        sched = DelaySchedule.permuted(1, gamma=0, seed=3)
        assert [sched.next_kappa(0, t) for t in range(20)] == list(range(20))

    def test_out_of_order_rejected(self):
        sched = DelaySchedule.uniform(2, gamma=4, seed=0)
        sched.next_kappa(0, 0)
        with pytest.raises(OutOfOrderError):
            sched.next_kappa(0, 2)
        with pytest.raises(OutOfOrderError):
            sched.next_kappa(0, 0)

    def test_kappa_in_range_all_variants(self):
        scheds = [
            DelaySchedule.none(1),
            DelaySchedule.fixed(1, 7),
            DelaySchedule.uniform(1, 7, seed=1),
            DelaySchedule.poisson(1, 3.0, seed=1),
            DelaySchedule.permuted(1, 7, seed=1),
        ]
        for sched in scheds:
            for t in range(200):
                k = sched.next_kappa(0, t)
                assert 0 <= k <= t

    def test_bounded_variants_respect_gamma(self):
        for sched in (DelaySchedule.fixed(1, 5), DelaySchedule.uniform(1, 5, seed=2),
                      DelaySchedule.permuted(1, 5, seed=2)):
            for t in range(300):
                k = sched.next_kappa(0, t)
                if t >= 5:
                    assert t - k <= 5

    def test_determinism_and_replay(self):
        for sched in (
            DelaySchedule.uniform(3, 9, seed=11),
            DelaySchedule.poisson(3, 2.5, seed=11),
            DelaySchedule.permuted(3, 9, seed=11),
        ):
            a = replay_kappas(sched, 500, agent=1)
            b = replay_kappas(sched, 500, agent=1)
            assert a == b

    def test_agents_have_independent_streams(self):
        sched = DelaySchedule.uniform(2, 9, seed=5)
        a = [sched.next_kappa(0, t) for t in range(100)]
        b = [sched.next_kappa(1, t) for t in range(100)]
        assert a != b

    def test_poisson_cap(self):
        sched = DelaySchedule.poisson(1, 4.0, seed=0, cap=6)
        for t in range(2000):
            assert t - sched.next_kappa(0, t) <= 6
        assert sched.max_lag == 6
        assert DelaySchedule.poisson(1, 4.0, seed=0).max_lag is None


class TestPermuted:
    def test_injective_and_covering(self):
        sched = DelaySchedule.permuted(2, gamma=25, seed=7)
        rep = validate_schedule(sched, 5000, 1)
        assert rep.ok
        assert rep.max_displacement <= 25
        assert not rep.duplicates
        assert not rep.missing

    def test_zero_fills_startup(self):
        sched = DelaySchedule.permuted(1, gamma=10, seed=13)
        ks = [sched.next_kappa(0, t) for t in range(11)]
        assert all(0 <= k <= t for t, k in enumerate(ks))

    def test_forced_delivery_at_boundary(self):
        # every index s >= 1 must be emitted by time s + gamma
        gamma = 6
        sched = DelaySchedule.permuted(1, gamma=gamma, seed=21)
        ks = [sched.next_kappa(0, t) for t in range(400)]
        first_seen = {}
        for t, k in enumerate(ks):
            first_seen.setdefault(k, t)
        for s in range(1, 400 - gamma):
            assert s in first_seen and first_seen[s] - s <= gamma


class TestDelayConstants:
    def test_bounded_gamma_25(self):
        c = delay_constants("uniform", gamma=25)
        assert c.zeta == pytest.approx(1.04, rel=1e-14)
        assert c.L == pytest.approx(math.e * 25 * 26, rel=1e-14)
        assert c.L == pytest.approx(1766.883, abs=0.001)
        assert c.sigma2 == pytest.approx(25 * 26, rel=1e-14)

    def test_bounded_gamma_1(self):
        c = delay_constants("uniform", gamma=1)
        assert c.zeta == 2.0
        assert c.L == pytest.approx(2 * math.e, rel=1e-14)
        assert c.L == pytest.approx(5.43656, abs=1e-5)

    def test_poisson_mean_1(self):
        c = delay_constants("poisson", mean=1.0)
        assert c.zeta == 2.0
        assert c.L == pytest.approx(2 * math.e, rel=1e-14)

    def test_variants_without_constants(self):
        for variant in ("none", "fixed", "permuted"):
            with pytest.raises(ValueError):
                delay_constants(variant, gamma=5)
        with pytest.raises(ValueError):
            delay_constants("uniform", gamma=0)


class TestValidateSchedule:
    def test_fixed_displacement_exact(self):
        rep = validate_schedule(DelaySchedule.fixed(1, 50), 300, 0)
        assert rep.ok
        assert rep.max_displacement == 50
        assert rep.mean_tail_displacement == 50.0

    def test_uniform_empirical_mean(self):
        gamma, draws = 10, 100_000
        rep = validate_schedule(DelaySchedule.uniform(1, gamma, seed=3), draws + gamma, 0)
        disps = np.arange(draws + gamma)[gamma:] - rep.kappas[gamma:]
        se = math.sqrt((gamma * (gamma + 2) / 12.0) / draws)
        assert abs(disps.mean() - gamma / 2.0) <= 3 * se

    def test_duplicate_detection_on_bad_table(self, tmp_path):
        table = {(0, 0): 0, (0, 1): 1, (0, 2): 1}
        sched = DelaySchedule("file", 1, table=table)
        rep = validate_schedule(sched, 3, 0)
        assert not rep.ok and rep.duplicates == (1,)


class TestPoissonGoodnessOfFit:
    @pytest.mark.parametrize("mean", [1.0, 5.0])
    def test_chi_square(self, mean):
        draws, offset = 100_000, 200
        sched = DelaySchedule.poisson(1, mean, seed=17)
        ks = replay_kappas(sched, draws + offset)
        delays = np.array([t - k for t, k in enumerate(ks)][offset:])
        kmax = delays.max()
        pmf = scipy_stats.poisson.pmf(np.arange(kmax + 1), mean)
        # merge the tail so every expected count is >= 5
        expected = pmf * draws
        cut = int(np.argmax(np.cumsum(expected[::-1]) >= 5.0))
        cut = kmax + 1 - cut
        observed = np.bincount(delays, minlength=kmax + 2)
        obs = np.append(observed[:cut], observed[cut:].sum())
        exp = np.append(expected[:cut], draws - expected[:cut].sum())
        result = scipy_stats.chisquare(obs, exp)
        assert result.pvalue >= 0.001


class TestPermutationFiles:
    def test_round_trip(self, tmp_path):
        sched = DelaySchedule.permuted(2, gamma=4, seed=9)
        table = {(i, t): sched.next_kappa(i, t) for t in range(50) for i in range(2)}
        path = tmp_path / "perm.txt"
        save_permutation_file(path, table)
        loaded = DelaySchedule.from_file(path, 2, gamma=4)
        for t in range(50):
            for i in range(2):
                assert loaded.next_kappa(i, t) == table[(i, t)]
        rep = validate_schedule(loaded, 50, 0)
        assert rep.ok

    def test_bad_lines_rejected(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("0 1 2\n")  # kappa > t
        with pytest.raises(ValueError):
            load_permutation_file(path)
        path.write_text("0 1\n")
        with pytest.raises(ValueError):
            load_permutation_file(path)
        path.write_text("0 1 0\n0 1 1\n")
        with pytest.raises(ValueError):
            load_permutation_file(path)

    def test_missing_entry_raises(self, tmp_path):
        path = tmp_path / "perm.txt"
        path.write_text("0 0 0\n")
        sched = DelaySchedule.from_file(path, 1)
        assert sched.next_kappa(0, 0) == 0
        with pytest.raises(KeyError):
            sched.next_kappa(0, 1)

    def test_comments_and_blanks(self, tmp_path):
        path = tmp_path / "perm.txt"
        path.write_text("# header\n\n0 0 0  # inline\n")
        assert load_permutation_file(path) == {(0, 0): 0}

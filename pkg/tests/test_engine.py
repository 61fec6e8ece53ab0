"""Closed-loop engine behavior and the comparison baselines."""

import numpy as np
import pytest

from onlinepi.agent import EpsilonSchedule, action_space
from onlinepi.config import PredictorParams
from onlinepi.data import SeriesSpec, generate_synthetic
from onlinepi.engine import (
    _FixedPolicy,
    _run_loop,
    fit_online,
    repair_crossing,
    run_frozen,
    run_naive_baseline,
    run_online,
    run_online_cpi,
    strip_warmup,
)
from onlinepi.quantile import make_predictor_bank
from onlinepi.traces import format_trace

from conftest import small_engine_config


def _series(length=400, family="gaussian", seed=3, **kwargs):
    spec = SeriesSpec(family=family, length=length, seed=seed, **kwargs)
    series, _ = generate_synthetic(spec)
    return series


class TestRepairCrossing:
    def test_pass_through(self):
        assert repair_crossing(1.0, 2.0) == (1.0, 2.0, False)

    def test_midpoint_collapse(self):
        assert repair_crossing(3.0, 1.0) == (2.0, 2.0, True)

    def test_equal_bounds(self):
        assert repair_crossing(5.0, 5.0) == (5.0, 5.0, False)


class TestRecordInvariants:
    def test_reward_and_ordering(self, small_config):
        records = run_online(_series(), small_config)
        space = action_space(small_config.n_actions, small_config.beta)
        grid = set(space.proportions)
        for r in records:
            assert r.reward == -r.winkler
            assert r.lower <= r.upper
            assert r.winkler >= r.upper - r.lower - 1e-12
            assert r.crossed == (r.raw_lower > r.raw_upper)
            assert any(abs(r.proportion - g) < 1e-12 for g in grid)

    def test_steps_are_contiguous(self, small_config):
        records = run_online(_series(), small_config)
        assert records[0].step == small_config.window
        assert [r.step for r in records] == list(range(small_config.window, 400))

    def test_warmup_prefix(self, small_config):
        records = run_online(_series(), small_config)
        assert records[0].warmup
        assert not records[-1].warmup
        scored = strip_warmup(records)
        assert all(not r.warmup for r in scored)
        assert len(scored) < len(records)

    def test_series_too_short(self, small_config):
        with pytest.raises(ValueError, match="too short"):
            run_online(np.ones(small_config.window + 3), small_config)

    def test_non_finite_series_rejected(self, small_config):
        s = _series()
        s[100] = np.nan
        with pytest.raises(ValueError, match="non-finite"):
            run_online(s, small_config)


class TestDegeneracy:
    def test_single_action_equals_cpi_bitwise(self):
        cfg = small_engine_config(n_actions=1, seed=11)
        series = _series(family="lognormal", seed=5)
        opi = run_online(series, cfg)
        cpi = run_online_cpi(series, cfg)
        assert format_trace(opi) == format_trace(cpi)

    def test_cpi_ignores_configured_grid(self):
        cfg = small_engine_config(n_actions=3, seed=2)
        records = run_online_cpi(_series(), cfg)
        for r in records:
            assert r.proportion == pytest.approx(cfg.beta / 2)


class TestDeterminism:
    def test_all_runners_reproduce(self, small_config):
        series = _series(seed=7)
        for runner in (run_online, run_online_cpi):
            a = runner(series, small_config)
            b = runner(series, small_config)
            assert format_trace(a) == format_trace(b)
        for runner in (run_frozen, run_naive_baseline):
            a = runner(series, small_config, 0.6)
            b = runner(series, small_config, 0.6)
            assert format_trace(a) == format_trace(b)


class TestSelectedOnlyUpdates:
    def test_unselected_predictors_never_move(self, small_config):
        series = _series(seed=9)
        space = action_space(3, small_config.beta)
        seeds = np.random.SeedSequence(1).spawn(6)
        bank = make_predictor_bank(
            space.proportions,
            beta=small_config.beta,
            window=small_config.window,
            params=small_config.predictor,
            per=small_config.per,
            adam=small_config.adam,
            seed_seqs=seeds,
        )
        snapshot = {
            i: [w.copy() for w in pred.net.weights] for i, pred in enumerate(bank)
        }
        policy = _FixedPolicy(space, EpsilonSchedule(0.0, 0.0, 10))  # always the middle pair
        records = []
        _run_loop(series, small_config, bank, policy, small_config.window, 200, True, records)

        selected = {1, 4}  # middle lower and its paired upper
        for i, pred in enumerate(bank):
            changed = any(
                not np.array_equal(w, s) for w, s in zip(pred.net.weights, snapshot[i])
            )
            assert changed == (i in selected)


class TestFrozen:
    def test_frozen_phase_parameters_static(self, small_config):
        series = _series(length=500, seed=13)
        cut = 350
        run = fit_online(series, small_config, stop=cut)
        before = [w.copy() for pred in run.bank for w in pred.net.weights]
        records = []
        _run_loop(series, run.config, run.bank, run.policy, cut, len(series), False, records)
        after = [w for pred in run.bank for w in pred.net.weights]
        for b, a in zip(before, after):
            np.testing.assert_array_equal(b, a)
        assert len(records) == len(series) - cut
        for r in records:
            assert r.epsilon == 0.0
            assert not r.warmup

    def test_run_frozen_returns_test_records_only(self, small_config):
        series = _series(length=500, seed=13)
        records = run_frozen(series, small_config, 0.7)
        assert records[0].step == 350
        assert records[-1].step == 499

    def test_train_portion_too_small(self, small_config):
        series = _series(length=120, seed=13)
        with pytest.raises(ValueError):
            run_frozen(series, small_config, 0.1)


class TestNaiveBaseline:
    def test_constant_series(self, small_config):
        series = np.full(24 * 20, 7.5)
        records = run_naive_baseline(series, small_config, 0.7)
        for r in records:
            assert r.lower == r.upper == 7.5
            assert r.winkler == 0.0

    def test_order_statistics_rule(self, small_config):
        # hour-0 training values 1..100: positions (n+1)q give 5.05 and 95.95
        rng = np.random.default_rng(0)
        length = 24 * 143  # 100 occurrences of each hour in the first 70%
        series = rng.normal(size=length)
        hour0 = np.arange(0, int(length * 0.7), 24)
        assert len(hour0) >= 100
        series[hour0[:100]] = np.arange(1.0, 101.0)
        series[hour0[100:]] = 50.0  # keep remaining hour-0 train samples harmless
        cfg = small_engine_config(beta=0.1)

        # independent order-statistics interpolation at positions (n+1)*q
        train_hour0 = series[: int(length * 0.7)][0::24]
        n = len(train_hour0)
        srt = np.sort(train_hour0)

        def type6(q):
            h = (n + 1) * q
            lo = int(np.floor(h))
            frac = h - lo
            return srt[lo - 1] + frac * (srt[lo] - srt[lo - 1])

        records = run_naive_baseline(series, cfg, 0.7)
        hour0_records = [r for r in records if r.step % 24 == 0]
        assert hour0_records[0].lower == pytest.approx(type6(0.05))
        assert hour0_records[0].upper == pytest.approx(type6(0.95))

    def test_small_bucket_rejected(self, small_config):
        series = np.arange(24 * 12, dtype=float)  # 8 training samples per hour at 70%
        with pytest.raises(ValueError, match="training samples"):
            run_naive_baseline(series, small_config, 0.7)

    def test_affine_equivariance(self, small_config):
        series = _series(length=24 * 60, seed=21)
        a, b = 2.5, -7.0
        r1 = run_naive_baseline(series, small_config, 0.7)
        r2 = run_naive_baseline(a * series + b, small_config, 0.7)
        for x, y in zip(r1, r2):
            assert y.lower == pytest.approx(a * x.lower + b, rel=1e-12)
            assert y.upper == pytest.approx(a * x.upper + b, rel=1e-12)

    def test_coverage_near_nominal(self, small_config):
        series = _series(length=24 * 400, seed=22)
        records = run_naive_baseline(series, small_config, 0.7)
        covered = np.mean([r.lower <= r.y <= r.upper for r in records])
        assert covered == pytest.approx(1 - small_config.beta, abs=0.05)


class TestFeatureScaling:
    def test_minmax_runs(self):
        cfg = small_engine_config(feature_scaling="minmax")
        records = run_online(_series(seed=30), cfg)
        assert len(records) == 400 - cfg.window

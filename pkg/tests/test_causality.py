"""Splits, paired t-test, binomial group test, selection, and deviations."""

import datetime
import math

import numpy as np
import pytest
import scipy.stats

from semshock.causality import (
    PairResult,
    Window,
    binomial_group_test,
    binomial_tail,
    bonferroni_select,
    detect_feedback,
    evaluate_pair,
    group_tests,
    make_splits,
    paired_t,
    temporal_deviation,
)
from semshock.errors import InputError
from semshock.features import FeatureSeries


def _series(values, sid="s", kind="shock", orientation=None):
    dates = [datetime.date(2020, 1, 1) + datetime.timedelta(days=i) for i in range(len(values))]
    return FeatureSeries(sid, kind, dates, np.asarray(values, dtype=float), orientation)


class TestSplits:
    def test_static_1000(self):
        split = make_splits(1000, "static")
        assert split.train_rows == range(0, 630)
        assert split.validation_rows == range(630, 700)
        assert split.test_rows == range(700, 1000)
        # the full training block per the 70% convention
        assert len(split.train_rows) + len(split.validation_rows) == 700
        assert len(split.validation_rows) == 70
        assert len(split.test_rows) == 300

    def test_static_too_small_fatal(self):
        with pytest.raises(InputError):
            make_splits(19, "static")

    def test_rolling_1095_gives_5_windows(self):
        windows = make_splits(1095, "rolling")
        assert [w.start for w in windows] == [0, 180, 360, 540, 720]
        for w in windows:
            assert w.test_rows == range(w.start + 275, w.start + 365)
            assert w.train_rows == range(w.start, w.start + 275)

    def test_rolling_below_span_fatal(self):
        with pytest.raises(InputError):
            make_splits(364, "rolling")

    def test_unknown_mode_fatal(self):
        with pytest.raises(InputError):
            make_splits(100, "bogus")


class TestPairedT:
    def test_hand_example(self):
        res = paired_t([1.0, 2.0, 3.0])
        t_exact = 2.0 * math.sqrt(3.0)
        # exact df=2 upper-tail: 1/2 - t / (2 sqrt(2 + t^2))
        p_exact = 0.5 - t_exact / (2.0 * math.sqrt(2.0 + t_exact**2))
        assert res.t_stat == pytest.approx(t_exact, abs=1e-10)
        assert res.p_value == pytest.approx(p_exact, abs=1e-10)
        assert res.t_stat == pytest.approx(3.4641, abs=1e-4)
        assert res.p_value == pytest.approx(0.0371, abs=1e-4)
        assert not res.degenerate

    def test_degenerate_zero(self):
        res = paired_t([0.0, 0.0, 0.0])
        assert res.degenerate and res.p_value == 1.0

    def test_degenerate_positive_constant(self):
        res = paired_t([0.5, 0.5, 0.5])
        assert res.degenerate and res.p_value == 0.0

    def test_too_short_fatal(self):
        with pytest.raises(InputError):
            paired_t([1.0])

    def test_matches_scipy_one_sided(self):
        rng = np.random.default_rng(0)
        for _ in range(25):
            d = rng.standard_normal(int(rng.integers(5, 60)))
            res = paired_t(d)
            t_ref, p_ref = scipy.stats.ttest_1samp(d, 0.0, alternative="greater")
            assert res.t_stat == pytest.approx(t_ref, rel=1e-10)
            assert res.p_value == pytest.approx(p_ref, rel=1e-10)


class TestBinomial:
    def test_hand_example_20_3(self):
        p = binomial_tail(3, 20, 0.05)
        assert p == pytest.approx(0.0755, abs=1e-4)
        assert p == pytest.approx(float(scipy.stats.binom.sf(2, 20, 0.05)), rel=1e-10)

    def test_zero_hits_full_tail(self):
        assert binomial_tail(0, 20, 0.05) == 1.0

    def test_matches_scipy_randomized(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            n = int(rng.integers(1, 400))
            k = int(rng.integers(0, n + 1))
            p = float(rng.uniform(0.01, 0.3))
            assert binomial_tail(k, n, p) == pytest.approx(
                float(scipy.stats.binom.sf(k - 1, n, p)), rel=1e-9, abs=1e-300
            )

    def test_group_test_paper_rate_significant(self):
        # 19.5% significant of 200 tests is far above the 5% chance level
        p_values = [0.01] * 39 + [0.5] * 161
        res = binomial_group_test(p_values, alpha=0.05)
        assert res.rho_hat == pytest.approx(0.195)
        assert res.significant

    def test_group_test_empty_fatal(self):
        with pytest.raises(InputError):
            binomial_group_test([])


def _result(direction="econ_to_text", outlet="o1", shock="growth", lag=1,
            kind="linear", p=0.5, orientation="left"):
    return PairResult(
        direction=direction, outlet_id=outlet, shock_id=shock, lag=lag,
        model_kind=kind, mse_base=1.0, mse_enhanced=1.0, t_stat=0.0,
        p_value=p, n_test=100, degenerate=False, orientation=orientation,
    )


class TestBonferroni:
    def test_threshold_arithmetic(self):
        results = [_result(p=4e-4), _result(p=0.01), _result(p=0.2)]
        kept = bonferroni_select(results, alpha=0.05, m=100)
        assert kept == [results[0]]          # 4e-4 < 5e-4 <= 0.01

    def test_scope_counts(self):
        results = [_result(p=0.004, lag=lag) for lag in range(1, 11)]
        # 10 tests share (orientation, direction, kind): threshold 0.005
        kept = bonferroni_select(results, alpha=0.05)
        assert len(kept) == 10
        kept = bonferroni_select(results, alpha=0.05, m=20)
        assert len(kept) == 0

    def test_group_tests_keys(self):
        results = [_result(p=0.01, lag=lag, orientation=o)
                   for lag in (1, 2) for o in ("left", "right")]
        groups = group_tests(results, [["direction", "orientation", "lag"]])
        assert len(groups) == 4
        assert all(g.n_tests == 1 for g in groups)


class TestDetectFeedback:
    def test_bidirectional_flagged(self):
        results = [
            _result(direction="econ_to_text", p=1e-9, lag=2),
            _result(direction="text_to_econ", p=1e-9, lag=3),
            _result(direction="econ_to_text", outlet="o2", p=1e-9, lag=1),
            _result(direction="text_to_econ", outlet="o2", p=0.9, lag=1),
        ]
        loops = detect_feedback(results, alpha=0.05, m=4)
        assert len(loops) == 1
        assert loops[0].outlet_id == "o1"
        assert loops[0].lags["econ_to_text"] == (2,)
        assert loops[0].lags["text_to_econ"] == (3,)

    def test_empty_results(self):
        assert detect_feedback([], alpha=0.05, m=1) == []


class TestTemporalDeviation:
    def test_centering(self):
        dev = temporal_deviation([(2.0, 1.0), (3.0, 1.0), (4.0, 1.0)])
        np.testing.assert_allclose(dev.delta, [1.0, 2.0, 3.0])
        np.testing.assert_allclose(dev.deviation, [-1.0, 0.0, 1.0])
        assert abs(dev.deviation.sum()) < 1e-9

    def test_all_equal_gives_zeros(self):
        dev = temporal_deviation([(2.0, 1.5)] * 4)
        np.testing.assert_allclose(dev.deviation, np.zeros(4))

    def test_single_window_fatal(self):
        with pytest.raises(InputError):
            temporal_deviation([(1.0, 1.0)])

    def test_deviations_sum_to_zero(self):
        rng = np.random.default_rng(2)
        mses = [(float(a), float(b)) for a, b in rng.uniform(0.1, 2.0, size=(7, 2))]
        dev = temporal_deviation(mses)
        assert abs(dev.deviation.sum()) < 1e-9


class TestEvaluatePair:
    def test_planted_noiseless_coupling(self):
        rng = np.random.default_rng(3)
        lag = 2
        x = rng.standard_normal(300)
        y = np.zeros(300)
        y[lag:] = x[:-lag]                   # y_t = x_{t-lag} exactly
        res = evaluate_pair(_series(y, "y"), _series(x, "x"), lag, kind="linear")
        assert res.mse_enhanced < 1e-20
        assert res.mse_base > res.mse_enhanced
        assert res.p_value < 0.01

    def test_constant_target_degenerate(self):
        x = np.random.default_rng(4).standard_normal(100)
        res = evaluate_pair(_series(np.ones(100), "y"), _series(x, "x"), 2, kind="linear")
        assert res.degenerate

    def test_matches_manual_two_model_comparison(self):
        from semshock.models import build_design, fit_predict

        rng = np.random.default_rng(5)
        y = rng.standard_normal(200)
        x = rng.standard_normal(200)
        lag = 3
        res = evaluate_pair(_series(y, "y"), _series(x, "x"), lag, kind="linear")

        split = make_splits(200 - lag, "static")
        base = build_design(y, lag=lag)
        enhanced = build_design(y, x, lag=lag)
        fb = fit_predict(base, split.train_rows, split.test_rows, kind="linear")
        fe = fit_predict(enhanced, split.train_rows, split.test_rows, kind="linear")
        y_test = base.targets[list(split.test_rows)]
        e_b, e_e = fb.predictions - y_test, fe.predictions - y_test
        d = e_b**2 - e_e**2
        assert res.mse_base == pytest.approx(float(np.mean(e_b**2)), rel=1e-12)
        assert res.mse_enhanced == pytest.approx(float(np.mean(e_e**2)), rel=1e-12)
        # sum of d_t equals T (MSE_B - MSE_E)
        assert abs(d.sum() - res.n_test * (res.mse_base - res.mse_enhanced)) < 1e-9
        ref = paired_t(d)
        assert res.t_stat == pytest.approx(ref.t_stat, rel=1e-12)
        assert res.p_value == pytest.approx(ref.p_value, rel=1e-12)

    def test_window_split(self):
        rng = np.random.default_rng(6)
        y = rng.standard_normal(400)
        x = rng.standard_normal(400)
        w = Window(index=0, start=10, span=365, test=90)
        res = evaluate_pair(_series(y, "y"), _series(x, "x"), 3, kind="linear", split=w)
        assert res.n_test == 90

    def test_calendar_mismatch_fatal(self):
        y = _series(np.arange(50.0), "y")
        x_dates = [datetime.date(2021, 1, 1) + datetime.timedelta(days=i) for i in range(50)]
        x = FeatureSeries("x", "shock", x_dates, np.arange(50.0))
        with pytest.raises(InputError):
            evaluate_pair(y, x, 2)

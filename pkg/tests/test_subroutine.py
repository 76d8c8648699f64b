import math

import numpy as np
import pytest

from crm.errors import ConfigError, PreconditionError
from crm.subroutine import (Averaging, ConstantHypothesis, ConversionSpec, FiniteERM, GaussianNB, LastIterate,
                            LearnerSpec, ScoreBased, SGDLogistic, StumpHypothesis, clip_logistic,
                            confidence_term, empirical_regret, logistic_loss_raw, score_based_select)


class TestSGD:
    def test_single_step(self):
        m = SGDLogistic(1, lr=1.0)
        m.update([1.0], 1)
        np.testing.assert_allclose(m.params(), [0.5, 0.5])
        assert m.update_count == 1

    def test_zero_rate_keeps_weights(self):
        m = SGDLogistic(2, lr=0.0)
        m.set_params([0.3, -0.2, 0.1])
        m.update([1.0, 2.0], 0)
        np.testing.assert_allclose(m.params(), [0.3, -0.2, 0.1])

    def test_descent(self):
        m = SGDLogistic(2, lr=1e-3)
        x = np.array([0.7, -1.2])
        before = m.raw_loss(m.params(), x, 1)[0]
        m.update(x, 1)
        m.update(x, 1)
        assert m.raw_loss(m.params(), x, 1)[0] < before

    def test_dimension_mismatch(self):
        with pytest.raises(PreconditionError):
            SGDLogistic(2).update([1.0], 0)

    def test_untrained_predicts_zero(self):
        assert SGDLogistic(3).predict(np.ones((4, 3))).tolist() == [0, 0, 0, 0]

    def test_one_vs_rest(self):
        m = SGDLogistic(2, n_classes=3, lr=0.5)
        centers = np.array([[3.0, 0.0], [0.0, 3.0], [-3.0, -3.0]])
        rng = np.random.default_rng(0)
        for _ in range(300):
            y = int(rng.integers(3))
            m.update(centers[y] + rng.normal(scale=0.3, size=2), y)
        assert m.predict(centers).tolist() == [0, 1, 2]

    def test_snapshot_predictions_match(self, rng):
        m = SGDLogistic(2)
        P = rng.normal(size=(5, 3))
        x = rng.normal(size=2)
        assert m.predict_snapshots(P, x).tolist() == [int(m.predict_with(p, x)[0]) for p in P]


class TestGNB:
    def test_running_mean_example(self):
        m = GaussianNB(1)
        for v in (0.0, 2.0, 4.0):
            m.update([v], 0)
        assert m.means[0, 0] == pytest.approx(2.0) and m.counts[0] == 3

    def test_first_point_is_mean(self):
        m = GaussianNB(2)
        m.update([1.5, -2.0], 1)
        assert m.means[1].tolist() == [1.5, -2.0]

    def test_class_isolation(self):
        m = GaussianNB(1)
        m.update([1.0], 0)
        m.update([9.0], 1)
        assert m.means[0, 0] == 1.0 and m.counts[0] == 1

    def test_closest_mean(self):
        m = GaussianNB(2)
        m.update([0.0, 0.0], 0)
        m.update([2.0, 2.0], 1)
        assert m.predict([[0.5, 0.5], [2.0, 2.0]]).tolist() == [0, 1]

    def test_equidistant_goes_to_smallest_index(self):
        m = GaussianNB(1)
        m.update([0.0], 0)
        m.update([2.0], 1)
        assert m.predict([[1.0]]).tolist() == [0]

    def test_equidistant_prefers_more_frequent_class(self):
        m = GaussianNB(1)
        m.update([0.0], 0)
        m.update([2.0], 1)
        m.update([2.0], 1)
        assert m.predict([[1.0]]).tolist() == [1]

    def test_no_features_is_majority(self):
        m = GaussianNB(0, n_classes=3)
        for y in (2, 1, 2):
            m.update(np.empty(0), y)
        assert m.predict(np.empty((2, 0))).tolist() == [2, 2]

    def test_untrained_default(self):
        assert GaussianNB(2).predict([[1.0, 1.0]]).tolist() == [0]

    def test_running_equals_batch(self, rng):
        X = rng.normal(size=(500, 3))
        y = rng.integers(0, 3, 500)
        m = GaussianNB(3, n_classes=3)
        for a, b in zip(X, y):
            m.update(a, b)
        for c in range(3):
            np.testing.assert_allclose(m.means[c], X[y == c].mean(0), rtol=1e-9)

    def test_warm_start_caps_counts(self):
        p = GaussianNB(1)
        for v in (1.0, 1.0, 1.0):
            p.update([v], 0)
        c = GaussianNB(1)
        c.warm_start(p)
        assert c.counts.tolist() == [1.0, 0.0]
        c.update([3.0], 0)
        assert c.means[0, 0] == pytest.approx(2.0)


class TestERM:
    def test_picks_best(self):
        m = FiniteERM([ConstantHypothesis(0), ConstantHypothesis(1)])
        for _ in range(3):
            m.update(np.empty(0), 1)
        assert m.predict(np.empty((1, 0))).tolist() == [1]

    def test_no_updates_first_hypothesis(self):
        m = FiniteERM([ConstantHypothesis(1), ConstantHypothesis(0)])
        assert m.predict(np.empty((1, 0))).tolist() == [1]

    def test_tie_smallest_index(self):
        m = FiniteERM([ConstantHypothesis(0), ConstantHypothesis(1)])
        m.update(np.empty(0), 0)
        m.update(np.empty(0), 1)
        assert m.best() == 0

    def test_empty_list(self):
        with pytest.raises(ConfigError):
            FiniteERM([])

    def test_stump(self):
        m = FiniteERM([ConstantHypothesis(0), StumpHypothesis(0, 0.5)], n_features=1)
        for v, y in ((0.1, 0), (0.9, 1), (0.7, 1)):
            m.update([v], y)
        assert m.predict([[0.2], [0.8]]).tolist() == [0, 1]

    def test_warm_start_is_one_pseudo_observation(self):
        p = FiniteERM([ConstantHypothesis(0), ConstantHypothesis(1)])
        for y in (1, 1, 1, 0):
            p.update(np.empty(0), y)
        c = FiniteERM(p.hypotheses)
        c.warm_start(p)
        np.testing.assert_allclose(c.cumulative, [0.75, 0.25])


class TestAveraging:
    def test_two_point_mean(self):
        m = SGDLogistic(1, lr=1.0)
        conv = Averaging(m)
        for p in ([0.0, 0.0], [2.0, 2.0]):
            m.set_params(p)
            conv.after_update()
        np.testing.assert_allclose(conv.output(), [1.0, 1.0])

    def test_three_point_mean(self):
        m = SGDLogistic(0)
        conv = Averaging(m)
        for p in ([1.0], [2.0], [3.0]):
            m.set_params(p)
            conv.after_update()
        np.testing.assert_allclose(conv.output(), [2.0])

    def test_no_updates_initial(self):
        m = SGDLogistic(2)
        np.testing.assert_allclose(Averaging(m).output(), m.params())

    def test_incremental_equals_batch(self, rng):
        m = SGDLogistic(3, lr=0.3)
        conv = Averaging(m)
        snaps = []
        for _ in range(400):
            x, y = rng.normal(size=3), int(rng.integers(2))
            m.update(x, y)
            conv.after_update()
            snaps.append(m.params())
        np.testing.assert_allclose(conv.output(), np.mean(snaps, 0), rtol=1e-9, atol=1e-12)

    def test_requires_sgd(self):
        with pytest.raises(ConfigError):
            Averaging(GaussianNB(1))

    def test_jensen(self, rng):
        """Loss of the averaged weights never exceeds the average loss."""
        for _ in range(1000):
            s = int(rng.integers(1, 8))
            W = rng.normal(scale=2.0, size=(s, 3))
            x = np.append(rng.normal(size=2), 1.0)
            y = int(rng.integers(2))
            assert logistic_loss_raw(W.mean(0), x, y) <= logistic_loss_raw(W, x, y).mean() + 1e-12


class TestLoss:
    def test_clip_range(self):
        raw = np.array([0.0, math.log(100.0), 50.0])
        np.testing.assert_allclose(clip_logistic(raw), [0.0, 1.0, 1.0])

    def test_unsaturated_band(self):
        # predicted probability 0.5 for the true class
        assert clip_logistic(math.log(2.0)) == pytest.approx(math.log(2.0) / math.log(100.0))


class TestConfidence:
    def test_zero_width(self):
        assert confidence_term(1, 0, 2.0) == 0

    def test_value(self):
        assert confidence_term(2, 1, 1.0) == pytest.approx(math.sqrt(0.25 * math.log(24)), abs=1e-12)
        assert confidence_term(2, 1, 1.0) == pytest.approx(0.8914, abs=1e-4)

    def test_decreasing(self):
        c = confidence_term(4, np.arange(20), 0.1)
        assert np.all(np.diff(c) < 0)

    def test_bad_delta(self):
        with pytest.raises(ConfigError):
            confidence_term(2, 1, 0.0)

    def test_clamped_with_warning(self):
        with pytest.warns(RuntimeWarning):
            assert confidence_term(1, 3, 10.0) == 0


class TestScoreBased:
    def test_single_snapshot(self):
        assert score_based_select([0.0], 1, 0.05) == 1

    def test_example(self):
        # snapshot 1 lost 0 over 2 later points, snapshot 2 lost 1 over 1
        u1 = 0 + math.sqrt(math.log(108) / 6)
        u2 = 1 + math.sqrt(math.log(108) / 4)
        assert u1 == pytest.approx(0.8834, abs=1e-4)
        assert u2 == pytest.approx(2.0820, abs=1e-4)
        assert score_based_select([0.0, 1.0, 0.0], 3, 1.0) == 1

    def test_equal_losses_pick_first(self):
        s = 6
        remaining = s - np.arange(1, s)
        assert score_based_select(0.5 * remaining, s, 0.05) == 1

    def test_argmin_brute_force(self, rng):
        for _ in range(200):
            s = int(rng.integers(2, 12))
            remaining = s - np.arange(1, s)
            sums = rng.random(s - 1) * remaining
            delta = float(rng.uniform(0.01, 1.0))
            i = score_based_select(sums, s, delta)
            u = [sums[j] / remaining[j] + confidence_term(s, remaining[j], delta) for j in range(s - 1)]
            assert all(u[i - 1] <= v for v in u)

    def test_accumulators_match_loss_stream(self, rng):
        m = GaussianNB(1)
        conv = ScoreBased(m, delta=0.2)
        data = [(rng.normal(size=1), int(rng.integers(2))) for _ in range(30)]
        snaps = []
        for x, y in data:
            conv.before_update(x, y)
            m.update(x, y)
            conv.after_update()
            snaps.append(m.params())
        for i in range(len(data)):
            expected = sum(int(m.predict_with(snaps[i], x)[0] != y) for x, y in data[i + 1:])
            assert conv.future_sums[i] == expected

    def test_logistic_losses_in_range(self, rng):
        m = SGDLogistic(2, lr=2.0)
        conv = ScoreBased(m, loss="logistic")
        for _ in range(50):
            x, y = rng.normal(scale=5.0, size=2), int(rng.integers(2))
            before = conv.future_sums[: conv.s].copy()
            conv.before_update(x, y)
            step = conv.future_sums[: conv.s] - before
            assert np.all((step >= -1e-12) & (step <= 1 + 1e-12))
            m.update(x, y)
            conv.after_update()

    def test_predicts_with_selected_snapshot(self):
        m = FiniteERM([ConstantHypothesis(0), ConstantHypothesis(1)])
        conv = ScoreBased(m, delta=1.0)
        for y in (0, 0, 0, 1, 1):
            conv.before_update(np.empty(0), y)
            m.update(np.empty(0), y)
            conv.after_update()
        i = conv.select()
        assert conv.predict(np.empty((1, 0))).tolist() == m.predict_with(conv.snapshots[i - 1], np.empty((1, 0))).tolist()

    def test_record_losses(self):
        conv = ScoreBased(GaussianNB(0))
        conv.s = 2
        conv.record_losses([1.0, 0.0, 7.0])
        assert conv.future_sums[:3].tolist() == [1.0, 0.0, 0.0]


class TestRegret:
    def test_difference(self):
        assert empirical_regret([1, 0, 1], [0, 0, 1]) == 1

    def test_identical(self):
        assert empirical_regret([0.3, 0.4], [0.3, 0.4]) == 0

    def test_empty(self):
        assert empirical_regret([], []) == 0

    def test_mismatch(self):
        with pytest.raises(PreconditionError):
            empirical_regret([1], [1, 2])


class TestSpecs:
    def test_aliases(self):
        assert isinstance(LearnerSpec("sgd", 2).build(), SGDLogistic)
        assert isinstance(LearnerSpec("gnb", 2).build(), GaussianNB)
        assert isinstance(LearnerSpec("erm").build(), FiniteERM)
        assert ConversionSpec("score").mode == "score_based"

    def test_unknown(self):
        with pytest.raises(ConfigError):
            LearnerSpec("forest")
        with pytest.raises(ConfigError):
            ConversionSpec("median")
        with pytest.raises(ConfigError):
            ConversionSpec("score_based", delta=0.0)

    def test_build_conversions(self):
        m = SGDLogistic(1)
        assert isinstance(ConversionSpec().build(m), LastIterate)
        assert isinstance(ConversionSpec("averaging").build(m), Averaging)
        assert isinstance(ConversionSpec("score_based").build(m), ScoreBased)

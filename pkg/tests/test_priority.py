import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alap.priority import (
    Scheme,
    SchemeConfig,
    huber_loss,
    importance_weights,
    lap_probability,
    linear_beta,
    per_probability,
    weighted_loss,
)

positive = st.floats(1e-3, 1e3)


class TestPerProbability:
    def test_arithmetic(self):
        np.testing.assert_allclose(per_probability([1, 3], 1.0), [0.25, 0.75])

    def test_alpha_zero_is_uniform(self):
        np.testing.assert_allclose(per_probability([0.1, 5, 70], 0.0), [1 / 3] * 3)

    def test_direct_evaluation(self):
        expected = [v ** 0.6 for v in (1, 2, 3, 4)]
        s = sum(expected)
        np.testing.assert_allclose(per_probability([1, 2, 3, 4], 0.6), [e / s for e in expected], rtol=1e-14)

    @pytest.mark.parametrize("bad", [[1, 0], [1, -2], [1, float("nan")]])
    def test_rejects_non_positive(self, bad):
        with pytest.raises(ValueError):
            per_probability(bad, 0.6)

    @settings(max_examples=100)
    @given(st.lists(positive, min_size=1, max_size=50), st.floats(0, 1), st.floats(1e-3, 1e3))
    def test_distribution_and_scale_invariance(self, p, alpha, c):
        probs = per_probability(p, alpha)
        assert np.all(probs >= 0)
        assert abs(probs.sum() - 1) < 1e-12
        np.testing.assert_allclose(per_probability(np.array(p) * c, alpha), probs, rtol=1e-9)

    @settings(max_examples=50)
    @given(st.lists(positive, min_size=2, max_size=30), st.floats(0.05, 1))
    def test_monotone(self, p, alpha):
        probs = per_probability(p, alpha)
        order = np.argsort(p, kind="stable")
        assert np.all(np.diff(probs[order]) >= -1e-15)


class TestLapProbability:
    def test_all_small_is_exactly_uniform(self):
        d = [0.0, 0.3, 1.0, 0.999, 0.5]
        assert lap_probability(d, 0.6).tolist() == [1 / 5] * 5

    def test_arithmetic(self):
        np.testing.assert_allclose(lap_probability([0.5, 2], 1.0), [1 / 3, 2 / 3])

    def test_direct_evaluation(self):
        rng = np.random.default_rng(5)
        d = rng.exponential(2.0, size=20)
        num = np.array([max(x ** 0.6, 1.0) for x in d])
        np.testing.assert_allclose(lap_probability(d, 0.6), num / num.sum(), rtol=1e-14)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            lap_probability([1.0, float("nan")], 0.6)

    @settings(max_examples=100)
    @given(st.lists(st.floats(1.0001, 1e3), min_size=1, max_size=30), st.floats(0.05, 1))
    def test_large_errors_match_per(self, d, alpha):
        np.testing.assert_allclose(lap_probability(d, alpha), per_probability(d, alpha), rtol=1e-12)


class TestImportanceWeights:
    def test_uniform_probabilities(self):
        np.testing.assert_array_equal(importance_weights([0.25] * 4, 4, 0.7), [1.0] * 4)

    def test_beta_zero(self):
        np.testing.assert_array_equal(importance_weights([0.6, 0.3, 0.1], 3, 0.0), [1.0] * 3)

    def test_formula(self):
        # w = (1/N * 1/P)^beta = [1/1.4, 1/0.6]; normalised by the max
        w = importance_weights([0.7, 0.3], 2, 1.0)
        np.testing.assert_allclose(w, [0.6 / 1.4, 1.0], rtol=1e-12)
        assert round(w[0], 4) == 0.4286

    def test_external_max(self):
        w = importance_weights([0.5, 0.25], 4, 1.0, max_weight=10.0)
        np.testing.assert_allclose(w, [0.05, 0.1])

    def test_zero_probability(self):
        with pytest.raises(ValueError):
            importance_weights([0.0, 1.0], 2, 0.5)

    @settings(max_examples=100)
    @given(st.lists(st.floats(1e-4, 1.0), min_size=2, max_size=40), st.floats(1e-3, 1.0))
    def test_contract(self, p, beta):
        w = importance_weights(p, 1000, beta)
        assert w.max() == 1.0
        assert np.all((w > 0) & (w <= 1.0))
        order = np.argsort(p)
        assert np.all(np.diff(w[order]) <= 1e-15)


class TestHuber:
    def test_quadratic_branch(self):
        assert huber_loss(0.5) == (0.125, 0.5)

    def test_continuity(self):
        assert huber_loss(1.0)[0] == 0.5
        assert huber_loss(-1.0)[0] == 0.5
        assert huber_loss(np.nextafter(1.0, 2.0))[0] == pytest.approx(0.5, abs=1e-15)

    def test_linear_branch(self):
        assert huber_loss(-3.0) == (2.5, -1.0)

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            huber_loss(float("nan"))

    def test_vectorised(self):
        loss, grad = huber_loss(np.array([0.5, -3.0, 2.0]))
        np.testing.assert_array_equal(loss, [0.125, 2.5, 1.5])
        np.testing.assert_array_equal(grad, [0.5, -1.0, 1.0])

    @settings(max_examples=200)
    @given(st.floats(-50, 50).filter(lambda d: abs(abs(d) - 1) > 1e-3))
    def test_derivative_matches_finite_difference(self, d):
        h = 1e-6
        fd = (huber_loss(d + h)[0] - huber_loss(d - h)[0]) / (2 * h)
        assert abs(huber_loss(d)[1] - fd) < 1e-6
        assert abs(huber_loss(d)[1]) <= 1.0


class TestWeightedLoss:
    def test_unit_weights_equal_mean_huber(self):
        d = np.array([0.2, -0.7, 4.0])
        loss, _ = weighted_loss(d, np.ones(3))
        assert loss == pytest.approx(huber_loss(d)[0].mean())

    def test_zero_deltas(self):
        loss, g = weighted_loss(np.zeros(4), np.full(4, 0.3))
        assert loss == 0.0
        assert not g.any()

    def test_hand_evaluation(self):
        loss, g = weighted_loss([0.5, -3.0], [1.0, 0.5])
        assert loss == pytest.approx((1 * 0.125 + 0.5 * 2.5) / 2)
        assert loss == pytest.approx(0.6875)
        np.testing.assert_allclose(g, [0.5 / 2, 0.5 * -1 / 2])

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            weighted_loss([1.0, 2.0], [1.0])


class TestLinearBeta:
    def test_endpoints(self):
        assert linear_beta(0, 200, 0.4) == 0.4
        assert linear_beta(200, 200, 0.4) == 1.0

    def test_halfway(self):
        assert linear_beta(100, 200, 0.4) == pytest.approx(0.7)

    def test_zero_total(self):
        with pytest.raises(ValueError):
            linear_beta(0, 0, 0.4)


class TestSchemeConfig:
    def test_defaults(self):
        c = SchemeConfig()
        assert (c.alpha, c.beta0, c.epsilon) == (0.6, 0.4, 1e-6)
        assert c.scheme is Scheme.ALAP

    @pytest.mark.parametrize("kw", [{"alpha": 1.5}, {"beta0": 0.0}, {"epsilon": 0.0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            SchemeConfig(**kw)

    def test_clipping_only_for_lap(self):
        assert SchemeConfig("lap").clip_priorities
        assert not SchemeConfig("alap").clip_priorities
        assert not SchemeConfig("uniform").prioritized

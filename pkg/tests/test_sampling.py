import numpy as np
import pytest

from sensikit.models import CountingModel, ModelSpec, make_gfunction, make_linear
from sensikit.sampling import (RngStream, budget_split, derive_stream, sample_iid,
                               sample_pickfreeze, sample_pickfreeze_panel,
                               sample_triple, uniform_open)


def constant_model(p=2, c=3.0):
    return ModelSpec(p=p, func=lambda x: c, batch=lambda X: np.full(len(X), c))


class TestRngStream:
    def test_determinism(self):
        a = RngStream(42, 7).generator().random(10)
        b = RngStream(42, 7).generator().random(10)
        np.testing.assert_array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(42, 0).generator().random(10)
        b = RngStream(42, 1).generator().random(10)
        assert np.any(a != b)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            RngStream(-1)

    def test_derive_stream_stable(self):
        s1 = derive_stream(5, "study", 3)
        s2 = derive_stream(5, "study", 3)
        assert s1 == s2
        assert derive_stream(5, "study", 4) != s1
        assert derive_stream(5, "other", 3) != s1


class TestUniformOpen:
    def test_open_interval(self):
        u = uniform_open(RngStream(0).generator(), 10000)
        assert np.all(u > 0.0) and np.all(u < 1.0)

    def test_mean_reasonable(self):
        u = uniform_open(RngStream(1).generator(), 200000)
        assert abs(u.mean() - 0.5) < 0.005


class TestSampleIid:
    def test_shape_and_count(self):
        model = CountingModel(make_linear(1.0, 3))
        d = sample_iid(model, 2, RngStream(0))
        assert d.x.shape == (2, 3) and len(d.y) == 2
        assert d.evaluations == 2
        assert model.count == 2

    def test_outputs_match_model(self):
        model = make_gfunction((1.0, 2.0))
        d = sample_iid(model, 50, RngStream(3))
        np.testing.assert_array_equal(d.y, model.evaluate_batch(d.x))

    def test_determinism(self):
        model = make_linear(1.0, 2)
        d1 = sample_iid(model, 100, RngStream(9, 4))
        d2 = sample_iid(model, 100, RngStream(9, 4))
        np.testing.assert_array_equal(d1.x, d2.x)
        np.testing.assert_array_equal(d1.y, d2.y)

    def test_streams_give_different_designs(self):
        model = make_linear(1.0, 2)
        d1 = sample_iid(model, 100, RngStream(9, 0))
        d2 = sample_iid(model, 100, RngStream(9, 1))
        assert np.any(d1.x != d2.x)

    def test_n_too_small(self):
        with pytest.raises(ValueError):
            sample_iid(make_linear(1.0, 2), 1, RngStream(0))

    def test_design_immutable(self):
        d = sample_iid(make_linear(1.0, 2), 10, RngStream(0))
        with pytest.raises(ValueError):
            d.y[0] = 99.0


class TestSamplePickFreeze:
    def test_count(self):
        model = CountingModel(make_linear(1.0, 3))
        d = sample_pickfreeze(model, [1], 50, RngStream(0))
        assert model.count == 100
        assert d.evaluations == 100

    def test_full_subset_duplicates_outputs(self):
        model = make_gfunction((1.0, 2.0, 3.0))
        d = sample_pickfreeze(model, [1, 2, 3], 40, RngStream(1))
        np.testing.assert_array_equal(d.y, d.y_u)

    def test_constant_model(self):
        d = sample_pickfreeze(constant_model(), [1], 20, RngStream(2))
        assert np.all(d.y == 3.0) and np.all(d.y_u == 3.0)

    def test_empirical_covariance_matches_conditional_variance(self):
        # Cov(Y, Y_u) should equal Var(E[Y | X_1]) = 1/12 for the symmetric
        # linear model
        model = make_linear(1.0, 2)
        d = sample_pickfreeze(model, [1], 1_000_000, RngStream(5))
        cov = np.mean(d.y * d.y_u) - np.mean(d.y) * np.mean(d.y_u)
        assert cov == pytest.approx(1.0 / 12.0, rel=0.01)

    def test_invalid_subsets(self):
        model = make_linear(1.0, 2)
        for bad in ([], [0], [3], [1, 1]):
            with pytest.raises(ValueError):
                sample_pickfreeze(model, bad, 10, RngStream(0))


class TestSampleTriple:
    def test_count(self):
        model = CountingModel(make_linear(1.0, 2))
        d = sample_triple(model, [1], 30, RngStream(0))
        assert model.count == 90
        assert d.evaluations == 90

    def test_w_independent_of_y(self):
        d = sample_triple(make_linear(1.0, 2), [1], 100_000, RngStream(6))
        corr = np.corrcoef(d.y, d.w)[0, 1]
        assert abs(corr) < 0.02

    def test_determinism(self):
        model = make_linear(1.0, 2)
        d1 = sample_triple(model, [1], 64, RngStream(7, 2))
        d2 = sample_triple(model, [1], 64, RngStream(7, 2))
        np.testing.assert_array_equal(d1.w, d2.w)
        np.testing.assert_array_equal(d1.y_u, d2.y_u)


class TestPanel:
    def test_budget_is_p_plus_one_times_n(self):
        model = CountingModel(make_gfunction((1.0, 2.0, 3.0)))
        panel = sample_pickfreeze_panel(model, 25, RngStream(0))
        assert model.count == 4 * 25
        assert panel.evaluations == 4 * 25
        assert panel.y_frozen.shape == (25, 3)

    def test_design_for_shares_base(self):
        panel = sample_pickfreeze_panel(make_linear(1.0, 2), 30, RngStream(1))
        d1 = panel.design_for(1)
        np.testing.assert_array_equal(d1.y, panel.y)
        assert d1.u == (1,)
        assert d1.evaluations == 60


class TestNonUniformInputs:
    def test_marginals_follow_declared_distributions(self):
        from sensikit.models import from_quantile, uniform, uniform01

        model = ModelSpec(
            p=3,
            func=lambda x: float(x.sum()),
            batch=lambda X: X.sum(axis=1),
            inputs=(uniform01(), uniform(2.0, 4.0),
                    from_quantile(lambda u: -np.log(1.0 - u))),
        )
        d = sample_iid(model, 200_000, RngStream(21))
        assert abs(d.x[:, 0].mean() - 0.5) < 0.01
        assert abs(d.x[:, 1].mean() - 3.0) < 0.01
        assert d.x[:, 1].min() > 2.0 and d.x[:, 1].max() < 4.0
        assert abs(d.x[:, 2].mean() - 1.0) < 0.01  # exponential mean


class TestBudgetSplit:
    def test_integer_division(self):
        assert budget_split(700, 6) == (700, 100)
        assert budget_split(200, 50) == (200, 3)
        assert budget_split(70, 6) == (70, 10)

    def test_rounds_down(self):
        assert budget_split(69, 6) == (69, 9)

    def test_invalid(self):
        with pytest.raises(ValueError):
            budget_split(0, 3)

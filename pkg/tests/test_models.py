import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sensikit.models import (GFunctionParams, LinearModelParams,
                             from_quantile, gfunction_eval, gfunction_exact_sobol,
                             linear_exact_sobol, make_gfunction, make_linear,
                             make_model, register_model, transform_input, uniform,
                             uniform01)


class TestGFunctionEval:
    def test_midpoint_kills_abs_term(self):
        # |4*0.5 - 2| = 0, so each factor reduces to a_i / (1 + a_i)
        params = GFunctionParams((1.0, 2.0))
        assert gfunction_eval(params, [0.5, 0.5]) == pytest.approx(1.0 / 3.0, rel=1e-14)

    def test_boundary(self):
        params = GFunctionParams((1.0, 2.0, 3.0))
        expect = (2 + 1) / 2 * (2 + 2) / 3 * (2 + 3) / 4
        assert gfunction_eval(params, [0.0, 0.0, 0.0]) == pytest.approx(expect, rel=1e-14)

    def test_point_value(self):
        # hand evaluation of the product at x_i = 0.1, a_i = i: 187473/78125
        params = GFunctionParams(tuple(range(1, 7)))
        got = gfunction_eval(params, [0.1] * 6)
        assert got == pytest.approx(2.3996544, rel=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            gfunction_eval(GFunctionParams((1.0, 2.0)), [0.5])

    def test_positive_output(self):
        rng = np.random.default_rng(0)
        params = GFunctionParams((0.0, 1.0, 9.0))
        for _ in range(50):
            assert gfunction_eval(params, rng.random(3)) > 0.0

    def test_reflection_invariance(self):
        # |4x - 2| is symmetric about x = 1/2
        rng = np.random.default_rng(1)
        params = GFunctionParams((1.0, 2.0, 3.0, 4.0))
        for _ in range(50):
            x = rng.random(4)
            k = rng.integers(0, 4)
            x_ref = x.copy()
            x_ref[k] = 1.0 - x_ref[k]
            assert gfunction_eval(params, x_ref) == pytest.approx(
                gfunction_eval(params, x), rel=1e-12)


class TestGFunctionExactSobol:
    def test_reference_values(self):
        # four-decimal references; the oracle test below pins these tighter
        got = gfunction_exact_sobol(GFunctionParams(tuple(range(1, 7))))
        expect = [0.4607, 0.2048, 0.1152, 0.0737, 0.0512, 0.0376]
        np.testing.assert_allclose(got, expect, atol=1e-4)
        # high-precision values from a 10^7-point nested QMC run
        oracle = [0.46063, 0.20472, 0.11518, 0.07373, 0.05119, 0.03762]
        np.testing.assert_allclose(got, oracle, atol=1e-3)

    def test_oracle_agreement(self):
        # brute-force oracle: stratified outer grid for the conditioning
        # coordinate, midpoint-grid inner average for the rest (p = 2 here
        # so the inner integral is one-dimensional and cheap)
        params = GFunctionParams((1.0, 2.0))
        analytic = gfunction_exact_sobol(params)
        K, M = 2000, 2000
        xs = (np.arange(K) + 0.5) / K
        inner = (np.arange(M) + 0.5) / M
        model = make_gfunction(params.a)
        grid = np.stack(np.meshgrid(xs, inner), axis=-1).reshape(-1, 2)
        all_vals = model.evaluate_batch(grid)
        var_y = all_vals.var()
        est = np.empty(2)
        for i in range(2):
            X = np.empty((K, M, 2))
            X[:, :, i] = xs[:, None]
            X[:, :, 1 - i] = inner[None, :]
            cond = model.evaluate_batch(X.reshape(-1, 2)).reshape(K, M).mean(axis=1)
            est[i] = cond.var()
        np.testing.assert_allclose(est / var_y, analytic, atol=1e-3)

    def test_single_input_explains_everything(self):
        got = gfunction_exact_sobol(GFunctionParams((3.7,)))
        assert got.shape == (1,)
        assert got[0] == pytest.approx(1.0, rel=1e-12)

    def test_equal_coefficients_symmetric(self):
        got = gfunction_exact_sobol(GFunctionParams((2.0, 2.0)))
        assert got[0] == got[1]

    def test_sum_below_one(self):
        for a in [(1.0, 2.0), (0.0, 0.0, 0.0), tuple(range(1, 9))]:
            s = gfunction_exact_sobol(GFunctionParams(a)).sum()
            assert s < 1.0

    def test_decreasing_in_coefficient(self):
        got = gfunction_exact_sobol(GFunctionParams(tuple(range(1, 7))))
        assert np.all(np.diff(got) < 0)

    def test_negative_coefficient_rejected(self):
        with pytest.raises(ValueError):
            GFunctionParams((1.0, -0.5))


class TestLinearExactSobol:
    def test_symmetric_case(self):
        got = linear_exact_sobol(LinearModelParams(1.0, 2))
        np.testing.assert_allclose(got, [0.5, 0.5], rtol=1e-14)

    def test_weighted_case(self):
        got = linear_exact_sobol(LinearModelParams(2.0, 3))
        assert got[0] == pytest.approx(4.0 / 6.0, rel=1e-12)
        np.testing.assert_allclose(got[1:], 1.0 / 6.0, rtol=1e-12)

    def test_small_alpha_limit(self):
        got = linear_exact_sobol(LinearModelParams(1e-8, 4))
        assert got[0] == pytest.approx(0.0, abs=1e-15)

    def test_sums_to_one(self):
        for alpha, p in [(1.0, 2), (2.0, 3), (0.3, 7)]:
            got = linear_exact_sobol(LinearModelParams(alpha, p))
            assert got.sum() == pytest.approx(1.0, abs=1e-12)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            LinearModelParams(0.0, 3)
        with pytest.raises(ValueError):
            LinearModelParams(1.0, 1)


class TestTransformInput:
    def test_uniform01_identity(self):
        assert transform_input(uniform01(), 0.3) == 0.3

    def test_uniform_interval_midpoint(self):
        assert transform_input(uniform(-1.0, 1.0), 0.5) == pytest.approx(0.0, abs=1e-15)

    def test_exponential_quantile(self):
        dist = from_quantile(lambda u: -np.log(1.0 - u))
        assert transform_input(dist, 1.0 - math.exp(-2.0)) == pytest.approx(2.0, rel=1e-12)

    def test_rejects_boundary(self):
        for u in (0.0, 1.0, -0.1, 1.1):
            with pytest.raises(ValueError):
                transform_input(uniform01(), u)

    def test_invalid_interval(self):
        with pytest.raises(ValueError):
            uniform(2.0, 2.0)

    @settings(max_examples=100, deadline=None)
    @given(u1=st.floats(1e-9, 1.0 - 1e-9), u2=st.floats(1e-9, 1.0 - 1e-9),
           kind=st.sampled_from(["uniform01", "uniform", "inverse_cdf"]))
    def test_monotone(self, u1, u2, kind):
        if kind == "uniform01":
            dist = uniform01()
        elif kind == "uniform":
            dist = uniform(-3.0, 5.0)
        else:
            dist = from_quantile(lambda u: np.log(u / (1.0 - u)))
        lo, hi = sorted((u1, u2))
        assert transform_input(dist, lo) <= transform_input(dist, hi)


class TestModelSpec:
    def test_batch_matches_scalar(self):
        model = make_gfunction((1.0, 2.0, 3.0))
        rng = np.random.default_rng(2)
        X = rng.random((20, 3))
        batch = model.evaluate_batch(X)
        single = np.array([model.evaluate(row) for row in X])
        np.testing.assert_array_equal(batch, single)

    def test_deterministic(self):
        model = make_linear(2.0, 3)
        x = np.array([0.1, 0.2, 0.3])
        assert model.evaluate(x) == model.evaluate(x)

    def test_fd_fallback_matches_analytic(self):
        analytic = make_linear(2.5, 3)
        bare = analytic.__class__(p=3, func=analytic.func, batch=analytic.batch)
        rng = np.random.default_rng(3)
        X = rng.random((50, 3))
        np.testing.assert_allclose(bare.derivative1_batch(X),
                                   analytic.derivative1_batch(X), atol=1e-6)

    def test_fd_fallback_clamps_at_boundary(self):
        model = make_linear(2.0, 2)
        bare = model.__class__(p=2, func=model.func, batch=model.batch)
        X = np.array([[0.0, 0.5], [1.0, 0.5]])
        np.testing.assert_allclose(bare.derivative1_batch(X), 2.0, rtol=1e-6)

    def test_wrong_shape_rejected(self):
        model = make_linear(1.0, 2)
        with pytest.raises(ValueError):
            model.evaluate([0.1, 0.2, 0.3])
        with pytest.raises(ValueError):
            model.evaluate_batch(np.zeros((4, 3)))


class TestRegistry:
    def test_builtins(self):
        g = make_model("gfunction", a=(1, 2))
        lin = make_model("linear", alpha=2.0, p=3)
        assert g.p == 2 and lin.p == 3

    def test_custom_registration(self):
        register_model("__test_first_coord", lambda p: make_linear(1.0, p))
        model = make_model("__test_first_coord", p=4)
        assert model.p == 4

    def test_unknown_name(self):
        with pytest.raises(KeyError):
            make_model("no-such-model")

"""Tests for the least-squares fitting layer.

Optimizer cases are checked against closed-form normal-equation solutions
and classical benchmark minima; weight formulas against finite-difference
vega oracles; end-to-end fits against synthetic smiles whose generating
parameters are known.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quadsmile.black import black_otm, implied_vol
from quadsmile.calibration import (
    CalibrationConfig,
    LMOptions,
    PositiveTransform,
    QuoteSet,
    build_model,
    calibrate,
    levenberg_marquardt,
    residuals_price,
    residuals_vol,
    vega_weights,
)
from quadsmile.errors import (
    InvalidQuotesError,
    NonFiniteResidualError,
)
from quadsmile.parameterization import make_linear_model, solve_with_c3

FLAT_STRIKES = np.array([0.85, 0.90, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2, 1.3, 1.4])
FLAT_FORWARD = 1.025
FLAT_MATURITY = 0.25
FLAT_VOL = 0.20


def flat_quotes() -> QuoteSet:
    return QuoteSet(
        strikes=FLAT_STRIKES,
        vols=np.full(FLAT_STRIKES.size, FLAT_VOL),
        forward=FLAT_FORWARD,
        maturity=FLAT_MATURITY,
    )


# ---------------------------------------------------------------------------
# QuoteSet
# ---------------------------------------------------------------------------


class TestQuoteSet:
    def test_defaults_derive_prices_and_weights(self):
        q = flat_quotes()
        assert q.size == 10
        assert np.all(q.weights == 1.0)
        # Prices must agree with direct undiscounted OTM evaluation.
        for k, v, p in zip(q.strikes, q.vols, q.prices):
            assert p == pytest.approx(
                black_otm(FLAT_FORWARD, float(k), FLAT_MATURITY, float(v)),
                rel=1e-15,
            )

    def test_atm_vol_interpolates(self):
        strikes = np.array([90.0, 100.0, 110.0])
        vols = np.array([0.25, 0.20, 0.22])
        q = QuoteSet(strikes=strikes, vols=vols, forward=105.0, maturity=1.0)
        assert q.atm_vol() == pytest.approx(0.21, rel=1e-14)
        assert q.vol_curve(80.0) == pytest.approx(0.25)
        assert q.vol_curve(120.0) == pytest.approx(0.22)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"strikes": np.array([2.0, 1.0]), "vols": np.array([0.2, 0.2])},
            {"strikes": np.array([1.0, 1.0]), "vols": np.array([0.2, 0.2])},
            {"strikes": np.array([1.0, 2.0]), "vols": np.array([0.2, -0.2])},
            {"strikes": np.array([1.0, 2.0]), "vols": np.array([0.2])},
            {
                "strikes": np.array([1.0, 2.0]),
                "vols": np.array([0.2, 0.2]),
                "weights": np.array([1.0]),
            },
            {
                "strikes": np.array([1.0, 2.0]),
                "vols": np.array([0.2, 0.2]),
                "weights": np.array([0.0, 0.0]),
            },
            {
                "strikes": np.array([1.0, 2.0]),
                "vols": np.array([0.2, 0.2]),
                "forward": -1.0,
            },
            {
                "strikes": np.array([1.0, 2.0]),
                "vols": np.array([0.2, 0.2]),
                "maturity": 0.0,
            },
        ],
    )
    def test_validation_failures(self, kwargs):
        kwargs.setdefault("forward", 1.5)
        kwargs.setdefault("maturity", 1.0)
        with pytest.raises(InvalidQuotesError):
            QuoteSet(**kwargs)


# ---------------------------------------------------------------------------
# Weights
# ---------------------------------------------------------------------------


class TestVegaWeights:
    def test_matches_finite_difference_vega(self):
        q = flat_quotes()
        w = vega_weights(q)
        h = 1e-6
        for i, (k, v) in enumerate(zip(q.strikes, q.vols)):
            up = black_otm(q.forward, float(k), q.maturity, float(v) + h)
            dn = black_otm(q.forward, float(k), q.maturity, float(v) - h)
            vega_fd = (up - dn) / (2.0 * h)
            assert w[i] == pytest.approx(1.0 / vega_fd, rel=1e-7)

    def test_deep_wing_hits_cap(self):
        # A far out-of-the-money strike at a short maturity has negligible
        # vega, so its weight must equal the cap exactly.
        strikes = np.array([1.0, 30.0])
        vols = np.array([0.2, 0.2])
        q = QuoteSet(strikes=strikes, vols=vols, forward=1.0, maturity=0.1)
        w = vega_weights(q)
        assert w[1] == pytest.approx(1e6 / q.forward, rel=1e-15)
        assert w[0] < 1e6

    def test_zero_mu_gives_zero_weight(self):
        q = QuoteSet(
            strikes=np.array([0.9, 1.0, 1.1]),
            vols=np.array([0.2, 0.2, 0.2]),
            forward=1.0,
            maturity=1.0,
            weights=np.array([1.0, 0.0, 2.0]),
        )
        w = vega_weights(q)
        assert w[1] == 0.0
        assert w[2] == pytest.approx(2.0 * w[0] * 1.0, rel=1e-10) or w[2] > 0


# ---------------------------------------------------------------------------
# Levenberg-Marquardt
# ---------------------------------------------------------------------------


class TestLevenbergMarquardt:
    def test_linear_least_squares_matches_normal_equations(self):
        rng = np.random.default_rng(7)
        a = rng.normal(size=(12, 4))
        b = rng.normal(size=12)
        expected, *_ = np.linalg.lstsq(a, b, rcond=None)

        res = levenberg_marquardt(lambda x: a @ x - b, np.zeros(4))
        assert res.converged
        assert np.allclose(res.x, expected, rtol=0.0, atol=1e-8)

    def test_rosenbrock_valley(self):
        def fn(x: np.ndarray) -> np.ndarray:
            return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])

        res = levenberg_marquardt(
            fn, np.array([-1.2, 1.0]), LMOptions(max_iterations=500)
        )
        assert res.converged
        assert np.allclose(res.x, [1.0, 1.0], atol=1e-8)
        assert res.objective < 1e-16

    def test_already_optimal_start_stops_immediately(self):
        a = np.eye(3)
        b = np.array([1.0, 2.0, 3.0])
        res = levenberg_marquardt(lambda x: a @ x - b, b.copy())
        assert res.converged
        assert res.iterations <= 1

    def test_trace_never_increases(self):
        rng = np.random.default_rng(11)
        a = rng.normal(size=(8, 3))
        b = rng.normal(size=8)

        def fn(x: np.ndarray) -> np.ndarray:
            return np.concatenate([a @ x - b, [0.1 * x[0] * x[1]]])

        res = levenberg_marquardt(fn, np.array([5.0, -3.0, 2.0]))
        assert all(
            later <= earlier + 1e-15
            for earlier, later in zip(res.trace, res.trace[1:])
        )

    @settings(max_examples=25, deadline=None)
    @given(
        seed=st.integers(min_value=0, max_value=10_000),
        n=st.integers(min_value=1, max_value=5),
    )
    def test_random_linear_problems_converge(self, seed: int, n: int):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(n + 3, n)) + np.eye(n + 3, n)
        b = rng.normal(size=n + 3)
        expected, *_ = np.linalg.lstsq(a, b, rcond=None)
        res = levenberg_marquardt(lambda x: a @ x - b, np.zeros(n))
        assert res.converged
        assert np.allclose(res.x, expected, rtol=0.0, atol=1e-6)
        assert all(
            later <= earlier + 1e-12
            for earlier, later in zip(res.trace, res.trace[1:])
        )

    def test_non_finite_start_raises(self):
        with pytest.raises(NonFiniteResidualError):
            levenberg_marquardt(
                lambda x: np.array([np.nan]), np.array([1.0])
            )

    def test_iteration_cap_reported(self):
        def fn(x: np.ndarray) -> np.ndarray:
            return np.array([10.0 * (x[1] - x[0] ** 2), 1.0 - x[0]])

        res = levenberg_marquardt(
            fn, np.array([-1.2, 1.0]), LMOptions(max_iterations=3)
        )
        assert not res.converged
        assert res.iterations == 3
        assert res.message == "maximum iterations reached"


# ---------------------------------------------------------------------------
# Positive transform
# ---------------------------------------------------------------------------


class TestPositiveTransform:
    def test_round_trip_below_cap(self):
        t = PositiveTransform(cap=100.0)
        p = np.array([0.5, 3.0, 42.0])
        assert np.allclose(t(t.inverse(p)), p, rtol=0.0, atol=1e-12)

    def test_identity_region_is_exact_shifted_square(self):
        t = PositiveTransform(cap=10.0)
        u = np.array([0.0, 1.0, 3.0])
        assert np.allclose(t(u), u**2 + 1e-8, rtol=0.0, atol=0.0)

    def test_saturation_and_limit(self):
        t = PositiveTransform(cap=10.0)
        values = t(np.array([4.0, 10.0, 100.0, 1e4]))
        assert np.all(np.diff(values) >= 0.0)
        assert np.all(values <= 20.0)
        assert values[-1] == pytest.approx(20.0, rel=1e-6)
        assert t.saturated(np.array([4.0]))
        assert not t.saturated(np.array([3.0]))

    def test_positivity_floor(self):
        t = PositiveTransform()
        assert t(np.array([0.0]))[0] == pytest.approx(1e-8, rel=0.0)


# ---------------------------------------------------------------------------
# Residuals
# ---------------------------------------------------------------------------


def synthetic_linear_quotes() -> tuple[QuoteSet, np.ndarray]:
    """Quotes generated by a known interpolation model (round-trip seed)."""
    strikes = np.array([90.0, 95.0, 100.0, 110.0, 120.0])
    forward = 105.0
    maturity = 0.5
    model = make_linear_model(strikes, forward, 45.0, 240.0, "bachelier")
    params = np.array([21.0, 20.0, 19.5, 20.5, 21.5])
    fit = solve_with_c3(model, params, maturity, max_iterations=12, tol=1e-12)
    prices = np.array([fit.solution.value(float(k)) for k in strikes])
    vols = np.array(
        [
            implied_vol(float(p), forward, float(k), maturity, "otm")
            for p, k in zip(prices, strikes)
        ]
    )
    quotes = QuoteSet(
        strikes=strikes, vols=vols, forward=forward, maturity=maturity
    )
    return quotes, params


class TestResiduals:
    def test_zero_at_generating_parameters(self):
        quotes, params = synthetic_linear_quotes()
        config = CalibrationConfig(model="bachelier")
        model = build_model(
            quotes,
            CalibrationConfig(model="bachelier", lower=45.0, upper=240.0),
        )
        weights = vega_weights(quotes)
        seed = quotes.atm_price()
        r_price = residuals_price(model, params, quotes, config, weights, seed)
        r_vol = residuals_vol(model, params, quotes, config, seed)
        assert float(np.max(np.abs(r_price))) < 1e-7
        assert float(np.max(np.abs(r_vol))) < 1e-8

    def test_perturbation_increases_norm(self):
        quotes, params = synthetic_linear_quotes()
        config = CalibrationConfig(model="bachelier")
        model = build_model(
            quotes,
            CalibrationConfig(model="bachelier", lower=45.0, upper=240.0),
        )
        weights = vega_weights(quotes)
        seed = quotes.atm_price()
        base = np.linalg.norm(
            residuals_price(model, params, quotes, config, weights, seed)
        )
        bumped = np.linalg.norm(
            residuals_price(
                model, params * 1.05, quotes, config, weights, seed
            )
        )
        assert bumped > base * 10.0

    def test_invalid_parameters_return_finite_penalty(self):
        quotes, params = synthetic_linear_quotes()
        config = CalibrationConfig(model="bachelier")
        model = build_model(
            quotes,
            CalibrationConfig(model="bachelier", lower=45.0, upper=240.0),
        )
        weights = vega_weights(quotes)
        bad = params.copy()
        bad[2] = -1.0
        r = residuals_price(
            model, bad, quotes, config, weights, quotes.atm_price()
        )
        assert np.all(np.isfinite(r))
        assert np.all(r == r[0])
        assert r[0] > 1e3


# ---------------------------------------------------------------------------
# End-to-end calibration
# ---------------------------------------------------------------------------


class TestCalibrate:
    def test_flat_smile_quadratic(self):
        res = calibrate(flat_quotes(), CalibrationConfig(model="quadratic"))
        assert res.converged
        assert res.rmse_vol < 1e-6
        assert res.c3_residual is not None and res.c3_residual <= 1e-8
        assert not res.bound_active
        assert all(
            later <= earlier + 1e-18
            for earlier, later in zip(
                res.objective_trace, res.objective_trace[1:]
            )
        )

    def test_flat_smile_linear_black(self):
        res = calibrate(flat_quotes(), CalibrationConfig(model="black"))
        assert res.converged
        assert res.rmse_vol < 1e-6

    def test_vol_objective_path(self):
        res = calibrate(
            flat_quotes(),
            CalibrationConfig(model="quadratic", objective="vol"),
        )
        assert res.converged
        assert res.rmse_vol < 1e-6

    def test_recovers_generating_model(self):
        quotes, params = synthetic_linear_quotes()
        res = calibrate(
            quotes,
            CalibrationConfig(model="bachelier", lower=45.0, upper=240.0),
        )
        assert res.rmse_vol < 1e-8
        assert np.allclose(res.params, params, rtol=1e-4)

    def test_boundaries_must_bracket(self):
        with pytest.raises(InvalidQuotesError):
            calibrate(
                flat_quotes(),
                CalibrationConfig(model="quadratic", lower=0.9),
            )
        with pytest.raises(InvalidQuotesError):
            calibrate(
                flat_quotes(),
                CalibrationConfig(model="quadratic", upper=1.3),
            )

    def test_subsampling_reduces_parameters(self):
        res = calibrate(
            flat_quotes(),
            CalibrationConfig(model="bachelier", max_params=5),
        )
        # Stride-2 subsampling keeps six of the ten strikes (the last is
        # always forced in); the inserted forward adds a tied node.
        assert res.model.nodes.size == 7
        assert res.params.size == 6
        assert res.rmse_vol < 5e-3

"""Calibration of smile parameterizations to market quotes.

The pipeline fits the free parameters of a :mod:`quadsmile.parameterization`
model by damped (Levenberg-Marquardt) least squares on weighted price
residuals, with the forward-smoothness fixed point embedded in every residual
evaluation.  Weights convert price errors to a volatility scale through
capped inverse vegas, so the reported volatility RMSE and the optimized
objective agree closely.

Positivity of the parameters is enforced by optimizing an unconstrained
vector ``u`` with ``param = u**2 + eps``, plus a soft saturation well above
the initial scale that reins in runaway directions without distorting the
useful range.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Literal

import numpy as np

from .black import black_atm_otm, black_otm, black_vega, implied_vol
from .errors import (
    InvalidQuotesError,
    NonFiniteResidualError,
    QuadSmileError,
)
from .parameterization import (
    LinearVolModel,
    SplineVolModel,
    make_linear_model,
    make_spline_model,
    solve_with_c3,
    solve_without_c3,
)
from .pdde import LocalVarianceFunction, LVGSolution, solve_pdde

__all__ = [
    "QuoteSet",
    "CalibrationConfig",
    "CalibrationResult",
    "LMOptions",
    "LMResult",
    "vega_weights",
    "levenberg_marquardt",
    "PositiveTransform",
    "build_model",
    "residuals_price",
    "residuals_vol",
    "calibrate",
]

WEIGHT_CAP_SCALE = 1e6
POSITIVITY_EPS = 1e-8


# ---------------------------------------------------------------------------
# Quotes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class QuoteSet:
    """One maturity's market smile.

    Attributes:
        strikes: Strictly increasing strike array.
        vols: Black implied volatilities (annualized) per strike.
        forward: Forward price of the underlying at the maturity.
        maturity: Year fraction to expiry.
        weights: Nonnegative fit weights (defaults to ones).
        prices: Undiscounted out-of-the-money option prices; derived from
            the vols when not given.
        discount: Optional discount factor, carried for reporting only.
    """

    strikes: np.ndarray
    vols: np.ndarray
    forward: float
    maturity: float
    weights: np.ndarray | None = None
    prices: np.ndarray | None = None
    discount: float | None = None

    def __post_init__(self) -> None:
        strikes = np.asarray(self.strikes, dtype=float)
        vols = np.asarray(self.vols, dtype=float)
        object.__setattr__(self, "strikes", strikes)
        object.__setattr__(self, "vols", vols)
        if strikes.ndim != 1 or strikes.size < 1:
            raise InvalidQuotesError("at least one strike is required")
        if not np.all(np.diff(strikes) > 0.0):
            raise InvalidQuotesError("strikes must be strictly increasing")
        if vols.shape != strikes.shape:
            raise InvalidQuotesError("vols must match strikes in length")
        if not np.all(vols > 0.0):
            raise InvalidQuotesError("implied volatilities must be positive")
        if not self.forward > 0.0 or not np.isfinite(self.forward):
            raise InvalidQuotesError("forward must be positive and finite")
        if not self.maturity > 0.0:
            raise InvalidQuotesError("maturity must be positive")
        if self.weights is None:
            weights = np.ones_like(strikes)
        else:
            weights = np.asarray(self.weights, dtype=float)
        if weights.shape != strikes.shape or np.any(weights < 0.0):
            raise InvalidQuotesError("weights must be nonnegative, one per strike")
        if not np.any(weights > 0.0):
            raise InvalidQuotesError("at least one weight must be positive")
        object.__setattr__(self, "weights", weights)
        if self.prices is None:
            prices = np.array(
                [
                    black_otm(self.forward, float(k), self.maturity, float(v))
                    for k, v in zip(strikes, vols)
                ]
            )
        else:
            prices = np.asarray(self.prices, dtype=float)
            if prices.shape != strikes.shape or not np.all(prices > 0.0):
                raise InvalidQuotesError("prices must be positive, one per strike")
        object.__setattr__(self, "prices", prices)

    @property
    def size(self) -> int:
        return int(self.strikes.size)

    def atm_vol(self) -> float:
        """Implied volatility linearly interpolated at the forward."""
        return float(np.interp(self.forward, self.strikes, self.vols))

    def vol_curve(self, price: float) -> float:
        """Market vol interpolated at ``price`` (flat beyond the strikes)."""
        return float(np.interp(price, self.strikes, self.vols))

    def atm_price(self) -> float:
        """Out-of-the-money price at the forward from the interpolated vol."""
        return black_atm_otm(self.forward, self.maturity, self.atm_vol())


def vega_weights(quotes: QuoteSet) -> np.ndarray:
    """Capped inverse-vega weights ``min(1/vega, 1e6/F) * mu``."""
    cap = WEIGHT_CAP_SCALE / quotes.forward
    out = np.empty(quotes.size)
    for i in range(quotes.size):
        vega = black_vega(
            quotes.forward,
            float(quotes.strikes[i]),
            quotes.maturity,
            float(quotes.vols[i]),
        )
        inv = cap if vega <= 1.0 / cap else min(1.0 / vega, cap)
        out[i] = inv * float(quotes.weights[i])
    return out


# ---------------------------------------------------------------------------
# Levenberg-Marquardt
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LMOptions:
    """Termination and stepping controls for :func:`levenberg_marquardt`."""

    max_iterations: int = 200
    gradient_tol: float = 1e-10
    step_tol: float = 1e-12
    fd_step: float = 1e-7
    initial_damping: float = 1e-3


@dataclass
class LMResult:
    """Optimizer outcome.

    ``x`` is the argument of the residual function (the unconstrained vector
    when a transform is used).  ``trace`` holds the objective after every
    accepted step, starting with the initial value; it never increases.
    """

    x: np.ndarray
    objective: float
    iterations: int
    converged: bool
    message: str
    trace: list[float]


def _jacobian(
    fn: Callable[[np.ndarray], np.ndarray],
    x: np.ndarray,
    r0: np.ndarray,
    fd_step: float,
) -> np.ndarray:
    jac = np.empty((r0.size, x.size))
    for j in range(x.size):
        h = fd_step * (1.0 + abs(float(x[j])))
        xp = x.copy()
        xp[j] += h
        rp = fn(xp)
        jac[:, j] = (rp - r0) / h
    return jac


def levenberg_marquardt(
    fn: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    options: LMOptions | None = None,
) -> LMResult:
    """Damped least squares with gain-ratio-controlled damping.

    Minimizes ``0.5 * ||fn(x)||^2`` from ``x0`` using forward-difference
    Jacobians.  The damping parameter follows the standard gain-ratio
    schedule: shrink fast after good steps, grow geometrically after
    rejected ones.

    Raises:
        NonFiniteResidualError: If the residual at ``x0`` is not finite.
    """
    opts = options or LMOptions()
    x = np.asarray(x0, dtype=float).copy()
    r = np.asarray(fn(x), dtype=float)
    if not np.all(np.isfinite(r)):
        raise NonFiniteResidualError("residual is not finite at the start point")
    objective = float(r @ r)
    trace = [objective]

    jac = _jacobian(fn, x, r, opts.fd_step)
    grad = jac.T @ r
    hess_diag = np.einsum("ij,ij->j", jac, jac)
    damping = opts.initial_damping * float(np.max(hess_diag)) if hess_diag.size else 1.0
    damping = max(damping, 1e-300)
    growth = 2.0

    converged = False
    message = "maximum iterations reached"
    iterations = 0
    for iterations in range(1, opts.max_iterations + 1):
        if float(np.max(np.abs(grad))) < opts.gradient_tol:
            converged, message = True, "gradient below tolerance"
            iterations -= 1
            break
        a = jac.T @ jac + damping * np.eye(x.size)
        try:
            step = np.linalg.solve(a, -grad)
        except np.linalg.LinAlgError:
            damping *= growth
            growth *= 2.0
            continue
        if float(np.linalg.norm(step)) < opts.step_tol * (
            float(np.linalg.norm(x)) + opts.step_tol
        ):
            converged, message = True, "step below tolerance"
            break
        x_new = x + step
        r_new = np.asarray(fn(x_new), dtype=float)
        finite = bool(np.all(np.isfinite(r_new)))
        objective_new = float(r_new @ r_new) if finite else np.inf
        predicted = float(step @ (damping * step - grad))
        gain = (objective - objective_new) / predicted if predicted > 0.0 else -1.0
        if finite and gain > 0.0:
            x, r, objective = x_new, r_new, objective_new
            trace.append(objective)
            jac = _jacobian(fn, x, r, opts.fd_step)
            grad = jac.T @ r
            damping *= max(1.0 / 3.0, 1.0 - (2.0 * gain - 1.0) ** 3)
            growth = 2.0
        else:
            damping *= growth
            growth *= 2.0
    return LMResult(
        x=x,
        objective=objective,
        iterations=iterations,
        converged=converged,
        message=message,
        trace=trace,
    )


@dataclass(frozen=True)
class PositiveTransform:
    """Map an unconstrained vector to positive parameters.

    ``param = u**2 + eps`` guarantees positivity; above ``cap`` the map
    saturates smoothly toward ``2 * cap`` so runaway directions stall
    instead of diverging.  ``cap`` is normally twenty times the largest
    initial parameter.
    """

    eps: float = POSITIVITY_EPS
    cap: float | None = None

    def __call__(self, u: np.ndarray) -> np.ndarray:
        p = np.square(u) + self.eps
        if self.cap is not None:
            over = p > self.cap
            if np.any(over):
                p = p.copy()
                p[over] = self.cap * (2.0 - np.exp(-(p[over] - self.cap) / self.cap))
        return p

    def inverse(self, params: np.ndarray) -> np.ndarray:
        """Unconstrained seed whose image is ``params`` (below the cap)."""
        params = np.asarray(params, dtype=float)
        return np.sqrt(np.maximum(params - self.eps, 0.0))

    def saturated(self, u: np.ndarray) -> bool:
        """True when any component runs beyond the soft cap."""
        if self.cap is None:
            return False
        return bool(np.any(np.square(u) + self.eps > self.cap))


# ---------------------------------------------------------------------------
# Residuals and calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CalibrationConfig:
    """Choices defining one calibration run.

    Attributes:
        model: ``bachelier`` / ``black`` (piecewise-linear level families)
            or ``quadratic`` (B-spline).
        knots: Knot strategy for the quadratic model.
        max_params: Optional strike-subsampling target (number of nodes).
        lower, upper: Domain boundaries; ``None`` selects ``K1/2`` and
            ``2*Kn``.
        enforce_c3: Tie one parameter to the forward-smoothness condition.
        objective: Optimize weighted price residuals (default) or weighted
            vol residuals.
        c3_iterations: Fixed-point rounds inside each residual evaluation.
        lm: Optimizer options.
        min_gap: Optional minimum node spacing before building models.
    """

    model: Literal["bachelier", "black", "quadratic"] = "quadratic"
    knots: str = "mid-xx"
    max_params: int | None = None
    lower: float | None = None
    upper: float | None = None
    enforce_c3: bool = True
    objective: Literal["price", "vol"] = "price"
    c3_iterations: int = 3
    lm: LMOptions = field(default_factory=LMOptions)
    min_gap: float | None = None


@dataclass
class CalibrationResult:
    """Calibrated model plus fit diagnostics."""

    localvar: LocalVarianceFunction
    solution: LVGSolution
    params: np.ndarray
    slot: float | None
    rmse_vol: float
    rmse_price: float
    iterations: int
    converged: bool
    message: str
    objective_trace: list[float]
    bound_active: bool
    c3_residual: float | None
    model: LinearVolModel | SplineVolModel
    config: CalibrationConfig
    quotes: QuoteSet


def build_model(quotes: QuoteSet, config: CalibrationConfig):
    """Construct the parameterization named by the config for these quotes."""
    lower = quotes.strikes[0] / 2.0 if config.lower is None else config.lower
    upper = 2.0 * quotes.strikes[-1] if config.upper is None else config.upper
    if not lower < quotes.strikes[0] or not upper > quotes.strikes[-1]:
        raise InvalidQuotesError("boundaries must bracket the strike range")
    if not lower < quotes.forward < upper:
        raise InvalidQuotesError("boundaries must bracket the forward")
    if config.model in ("bachelier", "black"):
        return make_linear_model(
            quotes.strikes,
            quotes.forward,
            lower,
            upper,
            config.model,
            max_nodes=config.max_params,
            enforce_c3=config.enforce_c3,
            min_gap=config.min_gap,
        )
    if config.model == "quadratic":
        return make_spline_model(
            quotes.strikes,
            quotes.forward,
            lower,
            upper,
            config.knots,
            max_nodes=config.max_params,
            enforce_c3=config.enforce_c3,
            min_gap=config.min_gap,
        )
    raise InvalidQuotesError(f"unknown model {config.model!r}")


def _solve_params(
    model,
    params: np.ndarray,
    quotes: QuoteSet,
    config: CalibrationConfig,
    theta_seed: float,
    fixed_slot: float | None = None,
) -> LVGSolution:
    if model.enforce_c3:
        res = solve_with_c3(
            model,
            params,
            quotes.maturity,
            theta_init=theta_seed,
            iterations=config.c3_iterations,
            tol=1e-9,
        )
        return res.solution
    return solve_without_c3(model, params, quotes.maturity, slot=fixed_slot)


def _model_prices(solution: LVGSolution, strikes: np.ndarray) -> np.ndarray:
    return np.array([solution.value(float(k)) for k in strikes])


def _penalty(params: np.ndarray, size: int) -> np.ndarray:
    # Finite, parameter-growing penalty so rejected regions push the
    # optimizer back toward feasibility instead of poisoning it with NaNs.
    level = 1e3 * (1.0 + float(np.sum(np.abs(params))))
    return np.full(size, level)


def residuals_price(
    model,
    params: np.ndarray,
    quotes: QuoteSet,
    config: CalibrationConfig,
    weights: np.ndarray,
    theta_seed: float,
    fixed_slot: float | None = None,
) -> np.ndarray:
    """Weighted out-of-the-money price residuals, optimizer-safe."""
    try:
        solution = _solve_params(
            model, params, quotes, config, theta_seed, fixed_slot
        )
        prices = _model_prices(solution, quotes.strikes)
    except QuadSmileError:
        return _penalty(params, quotes.size)
    return weights * (prices - quotes.prices)


def residuals_vol(
    model,
    params: np.ndarray,
    quotes: QuoteSet,
    config: CalibrationConfig,
    theta_seed: float,
    fixed_slot: float | None = None,
) -> np.ndarray:
    """Weighted implied-volatility residuals, optimizer-safe."""
    try:
        solution = _solve_params(
            model, params, quotes, config, theta_seed, fixed_slot
        )
        prices = _model_prices(solution, quotes.strikes)
        vols = np.array(
            [
                implied_vol(
                    float(p), quotes.forward, float(k), quotes.maturity, "otm"
                )
                for p, k in zip(prices, quotes.strikes)
            ]
        )
    except QuadSmileError:
        return _penalty(params, quotes.size)
    return quotes.weights * (vols - quotes.vols)


def _weighted_rms(errors: np.ndarray, weights: np.ndarray) -> float:
    mask = weights > 0.0
    if not np.any(mask):
        return float("nan")
    w2 = np.square(weights[mask])
    return float(np.sqrt(np.sum(w2 * np.square(errors[mask])) / np.sum(w2)))


def calibrate(quotes: QuoteSet, config: CalibrationConfig | None = None) -> CalibrationResult:
    """Fit the configured parameterization to one quote set.

    Runs boundary selection, model construction, ATM-level initialization,
    damped least squares on the chosen residuals, and a final
    smoothness-polished solve, then reports RMSE in both price and vol
    spaces.
    """
    config = config or CalibrationConfig()
    model = build_model(quotes, config)
    p0 = model.initial_params(quotes.vol_curve)
    theta_seed = quotes.atm_price()
    # Frozen value of the reserved coefficient when the smoothness
    # condition is off (None for models without a reserved slot).
    fixed_slot = None if model.enforce_c3 else model.seed_slot(quotes.vol_curve)
    weights = vega_weights(quotes)
    transform = PositiveTransform(cap=20.0 * float(np.max(p0)))

    if config.objective == "price":

        def fn(u: np.ndarray) -> np.ndarray:
            return residuals_price(
                model, transform(u), quotes, config, weights, theta_seed,
                fixed_slot,
            )

    else:

        def fn(u: np.ndarray) -> np.ndarray:
            return residuals_vol(
                model, transform(u), quotes, config, theta_seed, fixed_slot
            )

    lm_result = levenberg_marquardt(fn, transform.inverse(p0), config.lm)
    params = transform(lm_result.x)

    slot: float | None = None
    c3_residual: float | None = None
    if model.enforce_c3:
        polished = solve_with_c3(
            model,
            params,
            quotes.maturity,
            theta_init=theta_seed,
            iterations=config.c3_iterations,
            max_iterations=12,
            tol=1e-10,
        )
        solution = polished.solution
        localvar = polished.localvar
        slot = polished.slot
        c3_residual = polished.residual
    else:
        localvar = model.build(params, fixed_slot)
        solution = solve_pdde(localvar, quotes.maturity)
        slot = fixed_slot

    prices = _model_prices(solution, quotes.strikes)
    vols = np.array(
        [
            implied_vol(float(p), quotes.forward, float(k), quotes.maturity, "otm")
            for p, k in zip(prices, quotes.strikes)
        ]
    )
    return CalibrationResult(
        localvar=localvar,
        solution=solution,
        params=params,
        slot=slot,
        rmse_vol=_weighted_rms(vols - quotes.vols, quotes.weights),
        rmse_price=_weighted_rms(prices - quotes.prices, weights),
        iterations=lm_result.iterations,
        converged=lm_result.converged,
        message=lm_result.message,
        objective_trace=lm_result.trace,
        bound_active=transform.saturated(lm_result.x),
        c3_residual=c3_residual,
        model=model,
        config=config,
        quotes=quotes,
    )

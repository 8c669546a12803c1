"""Arbitrage-free option-smile interpolation via a quadratic local-variance model.

The package calibrates a piecewise-quadratic local-variance function to market
option quotes by solving the forward pricing equation in closed form on each
piece, producing smooth arbitrage-free prices, implied volatilities and an
implied risk-neutral density.
"""

from __future__ import annotations

from .black import (
    black_atm_otm,
    black_call,
    black_otm,
    black_put,
    black_vega,
    implied_vol,
    implied_vol_curve,
)
from .errors import (
    ArbitrageViolationError,
    DenominatorNearZeroError,
    InvalidLocalVarianceError,
    InvalidQuotesError,
    InvalidStrategyError,
    MissingMetadataError,
    NonPositiveParameterError,
    OutOfDomainError,
    ParseError,
    PriceOutOfBoundsError,
    QuadSmileError,
    SingularSystemError,
)
from .calibration import (
    CalibrationConfig,
    CalibrationResult,
    LMOptions,
    LMResult,
    QuoteSet,
    build_model,
    calibrate,
    levenberg_marquardt,
    vega_weights,
)
from .kernel import Branch, PieceKernel, QuadraticPiece, build_kernel, classify_piece
from .parameterization import (
    KNOT_STRATEGIES,
    C3Result,
    LinearVolModel,
    SplineVolModel,
    make_linear_model,
    make_spline_knots,
    make_spline_model,
    solve_with_c3,
    solve_without_c3,
    subsample_strikes,
)
from .marketdata import (
    CURVE_COLUMNS,
    ZERO_BID_WEIGHT,
    builtin_fixtures,
    emit_curve_csv,
    fixture_names,
    load_fixture,
    parse_curve_csv,
    parse_quote_csv,
)
from .pdde import (
    LocalVarianceFunction,
    LVGSolution,
    TridiagonalSystem,
    assemble_system,
    solve_pdde,
    solve_theta,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "QuadSmileError",
    "OutOfDomainError",
    "InvalidLocalVarianceError",
    "SingularSystemError",
    "DenominatorNearZeroError",
    "NonPositiveParameterError",
    "ArbitrageViolationError",
    "PriceOutOfBoundsError",
    "InvalidQuotesError",
    "ParseError",
    "InvalidStrategyError",
    # reference pricing
    "black_call",
    "black_put",
    "black_otm",
    "black_atm_otm",
    "black_vega",
    "implied_vol",
    "implied_vol_curve",
    # model core
    "Branch",
    "QuadraticPiece",
    "PieceKernel",
    "classify_piece",
    "build_kernel",
    "LocalVarianceFunction",
    "TridiagonalSystem",
    "LVGSolution",
    "assemble_system",
    "solve_theta",
    "solve_pdde",
    # parameterizations
    "KNOT_STRATEGIES",
    "LinearVolModel",
    "SplineVolModel",
    "C3Result",
    "make_linear_model",
    "make_spline_knots",
    "make_spline_model",
    "solve_with_c3",
    "solve_without_c3",
    "subsample_strikes",
    # calibration
    "QuoteSet",
    "CalibrationConfig",
    "CalibrationResult",
    "LMOptions",
    "LMResult",
    "vega_weights",
    "levenberg_marquardt",
    "build_model",
    "calibrate",
    # market data / fixtures
    "CURVE_COLUMNS",
    "ZERO_BID_WEIGHT",
    "MissingMetadataError",
    "parse_quote_csv",
    "parse_curve_csv",
    "emit_curve_csv",
    "builtin_fixtures",
    "fixture_names",
    "load_fixture",
]
